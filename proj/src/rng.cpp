#include "oblog/rng.hpp"

#include <sodium.h>

#include "oblog/crypto.hpp"

namespace oblog {

uint64_t Rng::uniform(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform: bound must be positive");
    uint64_t tail = (UINT64_MAX % bound + 1) % bound;
    for (;;) {
        uint64_t v = next_u64();
        if (tail == 0 || v <= UINT64_MAX - tail) return v % bound;
    }
}

DetRng::DetRng(uint64_t seed) {
    crypto::init();
    uint8_t buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = uint8_t(seed >> (8 * i));
    crypto_generichash(key_.data(), key_.size(), buf, sizeof buf, nullptr, 0);
}

void DetRng::fill(uint8_t* out, size_t n) {
    crypto::init();
    uint8_t nonce[crypto_stream_chacha20_NONCEBYTES];
    for (int i = 0; i < 8; ++i) nonce[i] = uint8_t(block_ >> (8 * i));
    ++block_;
    crypto_stream_chacha20(out, n, nonce, key_.data());
}

DetRng DetRng::fork(uint64_t label) {
    crypto::init();
    std::array<uint8_t, 32> child;
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, child.size());
    crypto_generichash_update(&st, key_.data(), key_.size());
    uint8_t buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = uint8_t(label >> (8 * i));
    crypto_generichash_update(&st, buf, sizeof buf);
    crypto_generichash_final(&st, child.data(), child.size());
    return DetRng(child);
}

void OsRng::fill(uint8_t* out, size_t n) {
    crypto::init();
    randombytes_buf(out, n);
}

}  // namespace oblog
