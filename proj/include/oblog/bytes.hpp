#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oblog {

using bytes = std::vector<uint8_t>;
using byte_view = std::span<const uint8_t>;

inline void xor_into(uint8_t* dst, const uint8_t* src, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        uint64_t a, b;
        std::memcpy(&a, dst + i, 8);
        std::memcpy(&b, src + i, 8);
        a ^= b;
        std::memcpy(dst + i, &a, 8);
    }
    for (; i < n; ++i) dst[i] ^= src[i];
}

inline void store_u16be(uint8_t* p, uint16_t v) {
    p[0] = uint8_t(v >> 8);
    p[1] = uint8_t(v);
}

inline void store_u32be(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v >> 24);
    p[1] = uint8_t(v >> 16);
    p[2] = uint8_t(v >> 8);
    p[3] = uint8_t(v);
}

inline void store_u64be(uint8_t* p, uint64_t v) {
    store_u32be(p, uint32_t(v >> 32));
    store_u32be(p + 4, uint32_t(v));
}

inline uint16_t load_u16be(const uint8_t* p) {
    return uint16_t(uint16_t(p[0]) << 8 | p[1]);
}

inline uint32_t load_u32be(const uint8_t* p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
}

inline uint64_t load_u64be(const uint8_t* p) {
    return uint64_t(load_u32be(p)) << 32 | load_u32be(p + 4);
}

inline void append_u16be(bytes& b, uint16_t v) {
    size_t at = b.size();
    b.resize(at + 2);
    store_u16be(b.data() + at, v);
}

inline void append_u32be(bytes& b, uint32_t v) {
    size_t at = b.size();
    b.resize(at + 4);
    store_u32be(b.data() + at, v);
}

inline void append_u64be(bytes& b, uint64_t v) {
    size_t at = b.size();
    b.resize(at + 8);
    store_u64be(b.data() + at, v);
}

inline void append_bytes(bytes& b, byte_view v) {
    b.insert(b.end(), v.begin(), v.end());
}

std::string to_hex(byte_view data);
bytes from_hex(const std::string& hex);

inline bytes to_bytes(const std::string& s) {
    return bytes(s.begin(), s.end());
}

inline std::string to_string(byte_view b) {
    return std::string(b.begin(), b.end());
}

}  // namespace oblog
