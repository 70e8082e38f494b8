#include "oblog/notify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace oblog::notify {

uint32_t bloom_m_bits(uint64_t n_window, double p) {
    if (n_window == 0) throw std::invalid_argument("bloom_m_bits: empty window");
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("bloom_m_bits: p outside (0,1)");
    double ln2 = std::log(2.0);
    return uint32_t(std::ceil(-double(n_window) * std::log(p) / (ln2 * ln2)));
}

uint32_t bloom_hash_count(uint32_t m_bits, uint64_t n_window) {
    if (n_window == 0) throw std::invalid_argument("bloom_hash_count: empty window");
    double h = std::round(double(m_bits) / double(n_window) * std::log(2.0));
    return h < 1.0 ? 1 : uint32_t(h);
}

BloomParams derive_params(uint64_t n_window, double p) {
    BloomParams bp;
    bp.m_bits = bloom_m_bits(n_window, p);
    bp.h = bloom_hash_count(bp.m_bits, n_window);
    return bp;
}

std::vector<uint32_t> make_interest(const BloomParams& bp, const LogId& id, uint64_t seq_no) {
    uint8_t item[24];
    std::memcpy(item, id.data(), id.size());
    store_u64be(item + 16, seq_no);
    return crypto::bloom_positions(byte_view(item, sizeof item), bp.h, bp.m_bits);
}

std::vector<uint32_t> make_fake_interest(const BloomParams& bp, Rng& rng) {
    uint8_t item[24];
    rng.fill(item, sizeof item);
    return crypto::bloom_positions(byte_view(item, sizeof item), bp.h, bp.m_bits);
}

void DeltaFilter::or_with(const DeltaFilter& other) {
    if (other.m_bits != m_bits) throw std::invalid_argument("DeltaFilter: width mismatch");
    for (size_t i = 0; i < words.size(); ++i) words[i] |= other.words[i];
}

uint64_t DeltaFilter::ones() const {
    uint64_t n = 0;
    for (uint64_t w : words) n += std::popcount(w);
    return n;
}

Window::Window(const BloomParams& bp, uint32_t w) : params_(bp), w_(w) {
    if (w == 0) throw std::invalid_argument("Window: need at least one delta");
    if (bp.m_bits == 0 || bp.h == 0) throw std::invalid_argument("Window: bad bloom params");
    deltas_.push_back(DeltaFilter::empty(bp.m_bits));
}

void Window::absorb(std::span<const uint32_t> positions) {
    for (uint32_t p : positions) {
        if (p >= params_.m_bits) throw std::invalid_argument("Window: position out of range");
        deltas_.back().set(p);
    }
}

void Window::rotate() {
    deltas_.push_back(DeltaFilter::empty(params_.m_bits));
    while (deltas_.size() > w_) {
        deltas_.pop_front();
        ++base_;
    }
}

bool Window::check(std::span<const uint32_t> positions) const {
    for (uint32_t p : positions) {
        if (p >= params_.m_bits) return false;
        bool set = false;
        for (const DeltaFilter& d : deltas_) {
            if (d.get(p)) {
                set = true;
                break;
            }
        }
        if (!set) return false;
    }
    return true;
}

bytes Window::digest() const { return digest(deltas_.size()); }

bytes Window::digest(size_t count) const {
    if (count > deltas_.size()) throw std::invalid_argument("Window::digest: count too large");
    crypto::Hasher h;
    h.update(to_bytes("interest-window-v1"));
    h.update_u64(params_.m_bits);
    h.update_u64(params_.h);
    h.update_u64(w_);
    h.update_u64(base_);
    h.update_u64(count);
    for (size_t i = 0; i < count; ++i) {
        const DeltaFilter& d = deltas_[i];
        h.update(byte_view(reinterpret_cast<const uint8_t*>(d.words.data()),
                           d.words.size() * 8));
    }
    return h.finish();
}

void Window::reset(uint64_t base, std::deque<DeltaFilter> deltas) {
    if (deltas.empty() || deltas.size() > w_)
        throw std::invalid_argument("Window::reset: bad delta count");
    for (const DeltaFilter& d : deltas)
        if (d.m_bits != params_.m_bits)
            throw std::invalid_argument("Window::reset: width mismatch");
    base_ = base;
    deltas_ = std::move(deltas);
}

static void put_varint(bytes& out, uint64_t v) {
    while (v >= 0x80) {
        out.push_back(uint8_t(v) | 0x80);
        v >>= 7;
    }
    out.push_back(uint8_t(v));
}

static std::optional<uint64_t> get_varint(byte_view buf, size_t& at) {
    uint64_t v = 0;
    int shift = 0;
    while (at < buf.size() && shift < 64) {
        uint8_t b = buf[at++];
        v |= uint64_t(b & 0x7f) << shift;
        if (!(b & 0x80)) return v;
        shift += 7;
    }
    return std::nullopt;
}

bytes encode_delta(const DeltaFilter& d) {
    bytes out;
    put_varint(out, d.m_bits);
    put_varint(out, d.ones());
    uint64_t prev = 0;
    bool first = true;
    for (uint32_t w = 0; w < d.words.size(); ++w) {
        uint64_t word = d.words[w];
        while (word) {
            uint32_t bit = uint32_t(std::countr_zero(word));
            uint64_t pos = uint64_t(w) * 64 + bit;
            put_varint(out, first ? pos : pos - prev);
            prev = pos;
            first = false;
            word &= word - 1;
        }
    }
    return out;
}

std::optional<DeltaFilter> decode_delta(byte_view buf) {
    size_t at = 0;
    auto m = get_varint(buf, at);
    auto count = get_varint(buf, at);
    if (!m || !count || *m == 0 || *m > UINT32_MAX) return std::nullopt;
    DeltaFilter d = DeltaFilter::empty(uint32_t(*m));
    uint64_t pos = 0;
    for (uint64_t i = 0; i < *count; ++i) {
        auto gap = get_varint(buf, at);
        if (!gap) return std::nullopt;
        if (i == 0)
            pos = *gap;
        else {
            if (*gap == 0) return std::nullopt;
            pos += *gap;
        }
        if (pos >= *m) return std::nullopt;
        d.set(uint32_t(pos));
    }
    if (at != buf.size()) return std::nullopt;
    return d;
}

bytes encode_positions(std::span<const uint32_t> positions, size_t cap) {
    std::vector<uint32_t> sorted(positions.begin(), positions.end());
    std::sort(sorted.begin(), sorted.end());
    bytes out;
    put_varint(out, sorted.size());
    uint64_t prev = 0;
    for (size_t i = 0; i < sorted.size(); ++i) {
        put_varint(out, i == 0 ? sorted[i] : sorted[i] - prev);
        prev = sorted[i];
    }
    if (out.size() > cap)
        throw std::invalid_argument("encode_positions: exceeds field capacity");
    out.resize(cap, 0);
    return out;
}

std::optional<std::vector<uint32_t>> decode_positions(byte_view buf) {
    size_t at = 0;
    auto count = get_varint(buf, at);
    if (!count || *count > buf.size() * 8) return std::nullopt;
    std::vector<uint32_t> out;
    out.reserve(size_t(*count));
    uint64_t pos = 0;
    for (uint64_t i = 0; i < *count; ++i) {
        auto gap = get_varint(buf, at);
        if (!gap) return std::nullopt;
        pos = i == 0 ? *gap : pos + *gap;
        if (pos > UINT32_MAX) return std::nullopt;
        out.push_back(uint32_t(pos));
    }
    // Whatever follows is fixed-field padding.
    return out;
}

}  // namespace oblog::notify
