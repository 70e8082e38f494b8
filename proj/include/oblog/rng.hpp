#pragma once

#include <array>
#include <cstdint>
#include <cstring>

#include "oblog/bytes.hpp"

namespace oblog {

// Randomness source. Everything that flips a coin takes one of these so the
// harness can pin a whole run to a script seed.
class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(uint8_t* out, size_t n) = 0;

    bytes gen(size_t n) {
        bytes b(n);
        fill(b.data(), n);
        return b;
    }

    template <size_t N>
    std::array<uint8_t, N> gen_array() {
        std::array<uint8_t, N> a;
        fill(a.data(), N);
        return a;
    }

    uint64_t next_u64() {
        uint8_t buf[8];
        fill(buf, 8);
        uint64_t v;
        std::memcpy(&v, buf, 8);
        return v;
    }

    // Unbiased draw in [0, bound) by rejection.
    uint64_t uniform(uint64_t bound);
};

// ChaCha20 keystream counter mode: fully determined by the 32-byte seed.
class DetRng : public Rng {
public:
    explicit DetRng(const std::array<uint8_t, 32>& seed) : key_(seed) {}
    explicit DetRng(uint64_t seed);

    void fill(uint8_t* out, size_t n) override;

    DetRng fork(uint64_t label);

private:
    std::array<uint8_t, 32> key_;
    uint64_t block_ = 0;
};

class OsRng : public Rng {
public:
    void fill(uint8_t* out, size_t n) override;
};

}  // namespace oblog
