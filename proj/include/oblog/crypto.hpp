#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/rng.hpp"

namespace oblog::crypto {

inline constexpr size_t PRF_KEY_LEN = 16;
inline constexpr size_t SYM_KEY_LEN = 32;
inline constexpr size_t NONCE_LEN = 24;
inline constexpr size_t TAG_LEN = 16;
inline constexpr size_t BOX_KEY_LEN = 32;
inline constexpr size_t PK_SEAL_OVERHEAD = 48;  // 32 ephemeral public key + 16 tag
inline constexpr size_t SIG_LEN = 64;
inline constexpr size_t SEED_LEN = 32;

using PrfKey = std::array<uint8_t, PRF_KEY_LEN>;
using SymKey = std::array<uint8_t, SYM_KEY_LEN>;
using Nonce = std::array<uint8_t, NONCE_LEN>;
using Seed = std::array<uint8_t, SEED_LEN>;
using PublicKey = std::array<uint8_t, BOX_KEY_LEN>;
using SecretKey = std::array<uint8_t, BOX_KEY_LEN>;
using Signature = std::array<uint8_t, SIG_LEN>;

struct BoxKeyPair {
    PublicKey pk;
    SecretKey sk;
};

// Ed25519; secret held as the 32-byte seed.
struct SignKeyPair {
    PublicKey pk;
    SecretKey sk;
};

void init();

// Keyed 64-bit PRF (SipHash-2-4) reduced into [0, modulus) without modulo
// bias: rejection-sample over fresh (input, attempt) blocks.
uint64_t prf(const PrfKey& key, uint64_t input, uint64_t modulus);

// Deterministic expansion of a 32-byte seed into len pseudorandom bytes.
// Prefix-stable: expanding to a longer length extends the same stream.
bytes prng_expand(const Seed& seed, size_t len);
void prng_expand_into(const Seed& seed, uint8_t* out, size_t len);

// Authenticated symmetric encryption (XSalsa20-Poly1305).
// ciphertext = plaintext + 16.
bytes seal(const SymKey& key, const Nonce& nonce, byte_view plaintext);
std::optional<bytes> open(const SymKey& key, const Nonce& nonce, byte_view ciphertext);

BoxKeyPair box_keygen(Rng& rng);
BoxKeyPair box_keygen_from_seed(const Seed& seed);

// Sealed box against a recipient public key: an ephemeral key agreement per
// call, ciphertext = plaintext + 48. The ephemeral seed comes from the caller
// rng; output opens with the standard sealed-box layout.
bytes pk_seal(const PublicKey& recipient, byte_view plaintext, Rng& rng);
std::optional<bytes> pk_open(const BoxKeyPair& recipient, byte_view ciphertext);

SignKeyPair sign_keygen(Rng& rng);
SignKeyPair sign_keygen_from_seed(const Seed& seed);
Signature sign(const SecretKey& sign_seed, byte_view message);
bool verify(const PublicKey& pk, byte_view message, const Signature& sig);

// h Bloom positions in [0, m_bits) for one item; deterministic in the item.
std::vector<uint32_t> bloom_positions(byte_view item, uint32_t h, uint32_t m_bits);

bytes digest(byte_view data, size_t out_len = 32);

// Incremental BLAKE2b for digesting large state without copies.
class Hasher {
public:
    explicit Hasher(size_t out_len = 32);
    Hasher& update(byte_view data);
    Hasher& update_u64(uint64_t v);
    bytes finish();

private:
    alignas(64) std::array<uint8_t, 384> state_;
    size_t out_len_;
};

}  // namespace oblog::crypto
