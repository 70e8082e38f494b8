#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/rng.hpp"

namespace oblog {
using LogId = std::array<uint8_t, 16>;
}

namespace oblog::notify {

struct BloomParams {
    uint32_t m_bits = 0;
    uint32_t h = 0;

    bool operator==(const BloomParams&) const = default;
};

// Classic sizing: m = -n ln p / (ln 2)^2, h = (m/n) ln 2, for the number of
// entries the whole window is expected to retain.
uint32_t bloom_m_bits(uint64_t n_window, double p);
uint32_t bloom_hash_count(uint32_t m_bits, uint64_t n_window);
BloomParams derive_params(uint64_t n_window, double p);

// The h filter positions announcing (log id, seqNo); a fake announcement
// hashes 24 random bytes instead and is shaped identically.
std::vector<uint32_t> make_interest(const BloomParams& bp, const LogId& id, uint64_t seq_no);
std::vector<uint32_t> make_fake_interest(const BloomParams& bp, Rng& rng);

struct DeltaFilter {
    uint32_t m_bits = 0;
    std::vector<uint64_t> words;

    static DeltaFilter empty(uint32_t m_bits) {
        DeltaFilter d;
        d.m_bits = m_bits;
        d.words.assign((m_bits + 63) / 64, 0);
        return d;
    }

    bool get(uint32_t pos) const { return (words[pos / 64] >> (pos % 64)) & 1; }
    void set(uint32_t pos) { words[pos / 64] |= uint64_t(1) << (pos % 64); }
    void or_with(const DeltaFilter& other);
    uint64_t ones() const;
};

// Rolling window of at most W delta filters, all m_bits wide. Membership is
// judged against the OR of the window, so nothing inside the window can be
// missed; entries fall off once their delta rotates out.
class Window {
public:
    Window(const BloomParams& bp, uint32_t w);

    void absorb(std::span<const uint32_t> positions);
    void rotate();
    bool check(std::span<const uint32_t> positions) const;

    // Absolute index of the oldest delta still held.
    uint64_t base() const { return base_; }
    // Absolute index of the delta currently absorbing writes.
    uint64_t newest() const { return base_ + deltas_.size() - 1; }
    size_t size() const { return deltas_.size(); }
    const DeltaFilter& delta(size_t i) const { return deltas_[i]; }
    const BloomParams& params() const { return params_; }
    uint32_t capacity() const { return w_; }

    bytes digest() const;
    // Digest over just the first count deltas; used when the last delta is
    // still absorbing writes and must stay out of anything signed.
    bytes digest(size_t count) const;

    // Replace contents wholesale (client mirror applying a server update).
    void reset(uint64_t base, std::deque<DeltaFilter> deltas);
    std::deque<DeltaFilter>& deltas() { return deltas_; }

private:
    BloomParams params_;
    uint32_t w_;
    uint64_t base_ = 0;
    std::deque<DeltaFilter> deltas_;
};

// Set-bit positions as delta-gap varints: varint(m_bits), varint(count),
// then the first index and successive differences.
bytes encode_delta(const DeltaFilter& d);
std::optional<DeltaFilter> decode_delta(byte_view buf);

// Same gap coding for a raw position list (an interest announcement), padded
// with zeros to a fixed capacity so every announcement is the same length.
bytes encode_positions(std::span<const uint32_t> positions, size_t cap);
std::optional<std::vector<uint32_t>> decode_positions(byte_view buf);

}  // namespace oblog::notify
