#include "oblog/crypto.hpp"

#include <sodium.h>

#include <mutex>
#include <stdexcept>

namespace oblog::crypto {

void init() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

uint64_t prf(const PrfKey& key, uint64_t input, uint64_t modulus) {
    if (modulus == 0) throw std::invalid_argument("prf: modulus must be positive");
    init();
    // Draws in the biased tail [2^64 - (2^64 mod m), 2^64) are rejected and
    // redrawn from a fresh (input, attempt) block.
    uint64_t tail = (UINT64_MAX % modulus + 1) % modulus;  // 2^64 mod m
    uint8_t block[16];
    for (uint64_t attempt = 0;; ++attempt) {
        for (int i = 0; i < 8; ++i) block[i] = uint8_t(input >> (8 * i));
        for (int i = 0; i < 8; ++i) block[8 + i] = uint8_t(attempt >> (8 * i));
        uint8_t out[crypto_shorthash_BYTES];
        crypto_shorthash(out, block, sizeof block, key.data());
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(out[i]) << (8 * i);
        if (tail == 0 || v <= UINT64_MAX - tail) return v % modulus;
    }
}

void prng_expand_into(const Seed& seed, uint8_t* out, size_t len) {
    init();
    static const uint8_t nonce[crypto_stream_chacha20_NONCEBYTES] = {0};
    crypto_stream_chacha20(out, len, nonce, seed.data());
}

bytes prng_expand(const Seed& seed, size_t len) {
    bytes out(len);
    if (len > 0) prng_expand_into(seed, out.data(), len);
    return out;
}

bytes seal(const SymKey& key, const Nonce& nonce, byte_view plaintext) {
    init();
    bytes out(plaintext.size() + crypto_secretbox_MACBYTES);
    crypto_secretbox_easy(out.data(), plaintext.data(), plaintext.size(), nonce.data(),
                          key.data());
    return out;
}

std::optional<bytes> open(const SymKey& key, const Nonce& nonce, byte_view ciphertext) {
    init();
    if (ciphertext.size() < crypto_secretbox_MACBYTES) return std::nullopt;
    bytes out(ciphertext.size() - crypto_secretbox_MACBYTES);
    if (crypto_secretbox_open_easy(out.data(), ciphertext.data(), ciphertext.size(),
                                   nonce.data(), key.data()) != 0)
        return std::nullopt;
    return out;
}

BoxKeyPair box_keygen_from_seed(const Seed& seed) {
    init();
    BoxKeyPair kp;
    crypto_box_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    return kp;
}

BoxKeyPair box_keygen(Rng& rng) {
    Seed s;
    rng.fill(s.data(), s.size());
    return box_keygen_from_seed(s);
}

static Nonce seal_nonce(const uint8_t* epk, const PublicKey& recipient) {
    Nonce n;
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, n.size());
    crypto_generichash_update(&st, epk, BOX_KEY_LEN);
    crypto_generichash_update(&st, recipient.data(), recipient.size());
    crypto_generichash_final(&st, n.data(), n.size());
    return n;
}

bytes pk_seal(const PublicKey& recipient, byte_view plaintext, Rng& rng) {
    init();
    Seed es;
    rng.fill(es.data(), es.size());
    uint8_t epk[BOX_KEY_LEN], esk[BOX_KEY_LEN];
    crypto_box_seed_keypair(epk, esk, es.data());
    Nonce nonce = seal_nonce(epk, recipient);
    bytes out(BOX_KEY_LEN + plaintext.size() + crypto_box_MACBYTES);
    std::memcpy(out.data(), epk, BOX_KEY_LEN);
    if (crypto_box_easy(out.data() + BOX_KEY_LEN, plaintext.data(), plaintext.size(),
                        nonce.data(), recipient.data(), esk) != 0)
        throw std::runtime_error("pk_seal: box failed");
    sodium_memzero(esk, sizeof esk);
    return out;
}

std::optional<bytes> pk_open(const BoxKeyPair& recipient, byte_view ciphertext) {
    init();
    if (ciphertext.size() < PK_SEAL_OVERHEAD) return std::nullopt;
    bytes out(ciphertext.size() - PK_SEAL_OVERHEAD);
    if (crypto_box_seal_open(out.data(), ciphertext.data(), ciphertext.size(),
                             recipient.pk.data(), recipient.sk.data()) != 0)
        return std::nullopt;
    return out;
}

SignKeyPair sign_keygen_from_seed(const Seed& seed) {
    init();
    SignKeyPair kp;
    uint8_t sk[crypto_sign_SECRETKEYBYTES];
    crypto_sign_seed_keypair(kp.pk.data(), sk, seed.data());
    kp.sk = seed;
    sodium_memzero(sk, sizeof sk);
    return kp;
}

SignKeyPair sign_keygen(Rng& rng) {
    Seed s;
    rng.fill(s.data(), s.size());
    return sign_keygen_from_seed(s);
}

Signature sign(const SecretKey& sign_seed, byte_view message) {
    init();
    uint8_t pk[crypto_sign_PUBLICKEYBYTES], sk[crypto_sign_SECRETKEYBYTES];
    crypto_sign_seed_keypair(pk, sk, sign_seed.data());
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), sk);
    sodium_memzero(sk, sizeof sk);
    return sig;
}

bool verify(const PublicKey& pk, byte_view message, const Signature& sig) {
    init();
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(),
                                       pk.data()) == 0;
}

std::vector<uint32_t> bloom_positions(byte_view item, uint32_t h, uint32_t m_bits) {
    if (m_bits == 0) throw std::invalid_argument("bloom_positions: m_bits must be positive");
    init();
    std::vector<uint32_t> out;
    out.reserve(h);
    for (uint32_t i = 0; i < h; ++i) {
        crypto_generichash_state st;
        crypto_generichash_init(&st, nullptr, 0, 8);
        crypto_generichash_update(&st, item.data(), item.size());
        uint8_t idx[4];
        for (int j = 0; j < 4; ++j) idx[j] = uint8_t(i >> (8 * j));
        crypto_generichash_update(&st, idx, 4);
        uint8_t out8[8];
        crypto_generichash_final(&st, out8, 8);
        uint64_t v = 0;
        for (int j = 0; j < 8; ++j) v |= uint64_t(out8[j]) << (8 * j);
        // Multiply-shift reduction; bias below m_bits / 2^64.
        out.push_back(uint32_t((unsigned __int128)v * m_bits >> 64));
    }
    return out;
}

bytes digest(byte_view data, size_t out_len) {
    init();
    bytes out(out_len);
    crypto_generichash(out.data(), out_len, data.data(), data.size(), nullptr, 0);
    return out;
}

static_assert(sizeof(crypto_generichash_state) <= 384);

Hasher::Hasher(size_t out_len) : out_len_(out_len) {
    init();
    crypto_generichash_init(reinterpret_cast<crypto_generichash_state*>(state_.data()),
                            nullptr, 0, out_len_);
}

Hasher& Hasher::update(byte_view data) {
    crypto_generichash_update(reinterpret_cast<crypto_generichash_state*>(state_.data()),
                              data.data(), data.size());
    return *this;
}

Hasher& Hasher::update_u64(uint64_t v) {
    uint8_t buf[8];
    store_u64be(buf, v);
    return update(byte_view(buf, 8));
}

bytes Hasher::finish() {
    bytes out(out_len_);
    crypto_generichash_final(reinterpret_cast<crypto_generichash_state*>(state_.data()),
                             out.data(), out_len_);
    return out;
}

}  // namespace oblog::crypto
