#include "oblog/wire.hpp"

#include <cstring>
#include <stdexcept>

namespace oblog::wire {

namespace {

bool known_kind(uint8_t k) {
    switch (Kind(k)) {
        case Kind::Write:
        case Kind::Read:
        case Kind::GetUpdates:
        case Kind::WriteAck:
        case Kind::ReadReply:
        case Kind::UpdatesReply:
        case Kind::SequencedWrite:
        case Kind::MaskedAnswer:
        case Kind::WindowSig:
        case Kind::SealMark:
        case Kind::Hello:
        case Kind::HelloAck:
        case Kind::Error:
            return true;
    }
    return false;
}

class Cursor {
public:
    explicit Cursor(byte_view buf) : buf_(buf) {}

    bool take(size_t n, byte_view& out) {
        if (buf_.size() - pos_ < n) return false;
        out = buf_.subspan(pos_, n);
        pos_ += n;
        return true;
    }
    bool u8(uint8_t& out) {
        byte_view v;
        if (!take(1, v)) return false;
        out = v[0];
        return true;
    }
    bool u16(uint16_t& out) {
        byte_view v;
        if (!take(2, v)) return false;
        out = load_u16be(v.data());
        return true;
    }
    bool u32(uint32_t& out) {
        byte_view v;
        if (!take(4, v)) return false;
        out = load_u32be(v.data());
        return true;
    }
    bool u64(uint64_t& out) {
        byte_view v;
        if (!take(8, v)) return false;
        out = load_u64be(v.data());
        return true;
    }
    bool done() const { return pos_ == buf_.size(); }
    size_t remaining() const { return buf_.size() - pos_; }

private:
    byte_view buf_;
    size_t pos_ = 0;
};

}  // namespace

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Write: return "write";
        case Kind::Read: return "read";
        case Kind::GetUpdates: return "get_updates";
        case Kind::WriteAck: return "write_ack";
        case Kind::ReadReply: return "read_reply";
        case Kind::UpdatesReply: return "updates_reply";
        case Kind::SequencedWrite: return "sequenced_write";
        case Kind::MaskedAnswer: return "masked_answer";
        case Kind::WindowSig: return "window_sig";
        case Kind::SealMark: return "seal_mark";
        case Kind::Hello: return "hello";
        case Kind::HelloAck: return "hello_ack";
        case Kind::Error: return "error";
    }
    return "unknown";
}

const char* status_name(Status s) {
    switch (s) {
        case Status::Ok: return "ok";
        case Status::Malformed: return "malformed";
        case Status::RateLimited: return "rate_limited";
        case Status::EpochUnavailable: return "epoch_unavailable";
        case Status::Internal: return "internal";
    }
    return "unknown";
}

bytes encode_frame(const Frame& f) {
    if (f.payload.size() > MAX_FRAME_BODY) throw std::length_error("frame body too large");
    bytes out;
    out.reserve(FRAME_HEADER_LEN + f.payload.size());
    append_u32be(out, uint32_t(f.payload.size()));
    out.push_back(uint8_t(f.kind));
    append_bytes(out, f.payload);
    return out;
}

void FrameReader::feed(byte_view data) {
    if (poisoned_) return;
    buf_.insert(buf_.end(), data.begin(), data.end());
}

std::optional<Frame> FrameReader::next() {
    if (poisoned_) return std::nullopt;
    if (buf_.size() - pos_ < FRAME_HEADER_LEN) {
        if (pos_) {
            buf_.erase(buf_.begin(), buf_.begin() + ptrdiff_t(pos_));
            pos_ = 0;
        }
        return std::nullopt;
    }
    uint32_t body_len = load_u32be(buf_.data() + pos_);
    uint8_t kind = buf_[pos_ + 4];
    if (body_len > MAX_FRAME_BODY || !known_kind(kind)) {
        poisoned_ = true;
        return std::nullopt;
    }
    if (buf_.size() - pos_ - FRAME_HEADER_LEN < body_len) return std::nullopt;
    Frame f;
    f.kind = Kind(kind);
    f.payload.assign(buf_.begin() + ptrdiff_t(pos_ + FRAME_HEADER_LEN),
                     buf_.begin() + ptrdiff_t(pos_ + FRAME_HEADER_LEN + body_len));
    pos_ += FRAME_HEADER_LEN + body_len;
    if (pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    return f;
}

bytes encode_write(const logproto::WriteRequest& w, size_t item_len) {
    if (w.data.size() != item_len) throw std::invalid_argument("write item has wrong size");
    bytes out;
    out.reserve(write_body_len(item_len));
    append_u32be(out, w.beta1);
    append_u32be(out, w.beta2);
    append_bytes(out, w.data);
    append_bytes(out, notify::encode_positions(w.interest, INTEREST_FIELD_LEN));
    return out;
}

std::optional<logproto::WriteRequest> decode_write(byte_view buf, size_t item_len) {
    if (buf.size() != write_body_len(item_len)) return std::nullopt;
    Cursor c(buf);
    logproto::WriteRequest w;
    byte_view data, interest;
    if (!c.u32(w.beta1) || !c.u32(w.beta2) || !c.take(item_len, data) ||
        !c.take(INTEREST_FIELD_LEN, interest))
        return std::nullopt;
    w.data.assign(data.begin(), data.end());
    auto pos = notify::decode_positions(interest);
    if (!pos) return std::nullopt;
    w.interest = std::move(*pos);
    return w;
}

bytes encode_read_share(const pir::QueryVector& q, const crypto::Seed& seed) {
    bytes out;
    out.reserve(q.data.size() + seed.size());
    append_bytes(out, q.data);
    out.insert(out.end(), seed.begin(), seed.end());
    return out;
}

std::optional<std::pair<pir::QueryVector, crypto::Seed>> decode_read_share(byte_view buf,
                                                                           uint32_t buckets) {
    if (buf.size() != read_share_plain_len(buckets)) return std::nullopt;
    pir::QueryVector q;
    q.bit_count = buckets;
    q.data.assign(buf.begin(), buf.begin() + ptrdiff_t(qv_len(buckets)));
    if (buckets % 8) {
        uint8_t mask = uint8_t(0xffu << (buckets % 8));
        if (q.data.back() & mask) return std::nullopt;
    }
    crypto::Seed seed;
    std::memcpy(seed.data(), buf.data() + qv_len(buckets), seed.size());
    return std::make_pair(std::move(q), seed);
}

bytes encode_read(const ReadRequest& r) {
    bytes out;
    append_u64be(out, r.epoch);
    for (const auto& b : r.blobs) append_bytes(out, b);
    return out;
}

std::optional<ReadRequest> decode_read(byte_view buf, uint32_t servers, uint32_t buckets) {
    if (buf.size() != read_body_len(servers, buckets)) return std::nullopt;
    Cursor c(buf);
    ReadRequest r;
    if (!c.u64(r.epoch)) return std::nullopt;
    for (uint32_t i = 0; i < servers; ++i) {
        byte_view blob;
        if (!c.take(read_blob_len(buckets), blob)) return std::nullopt;
        r.blobs.emplace_back(blob.begin(), blob.end());
    }
    return r;
}

bytes encode_get_updates(uint64_t next_delta) {
    bytes out;
    append_u64be(out, next_delta);
    return out;
}

std::optional<uint64_t> decode_get_updates(byte_view buf) {
    if (buf.size() != 8) return std::nullopt;
    return load_u64be(buf.data());
}

bytes encode_write_ack(const WriteAck& a) {
    bytes out;
    append_u32be(out, a.corr);
    out.push_back(uint8_t(a.status));
    append_u64be(out, a.epoch);
    return out;
}

std::optional<WriteAck> decode_write_ack(byte_view buf) {
    if (buf.size() != 13) return std::nullopt;
    Cursor c(buf);
    WriteAck a;
    uint8_t st;
    if (!c.u32(a.corr) || !c.u8(st) || !c.u64(a.epoch)) return std::nullopt;
    a.status = Status(st);
    return a;
}

bytes encode_read_reply(const ReadReply& r) {
    bytes out;
    out.reserve(13 + r.block.size());
    append_u32be(out, r.corr);
    out.push_back(uint8_t(r.status));
    append_u64be(out, r.epoch);
    append_bytes(out, r.block);
    return out;
}

std::optional<ReadReply> decode_read_reply(byte_view buf, size_t bucket_size) {
    if (buf.size() != 13 + bucket_size) return std::nullopt;
    Cursor c(buf);
    ReadReply r;
    uint8_t st;
    byte_view block;
    if (!c.u32(r.corr) || !c.u8(st) || !c.u64(r.epoch) || !c.take(bucket_size, block))
        return std::nullopt;
    r.status = Status(st);
    r.block.assign(block.begin(), block.end());
    return r;
}

bytes encode_updates_reply(const UpdatesReply& u) {
    bytes out;
    append_u32be(out, u.corr);
    out.push_back(uint8_t(u.status));
    append_u64be(out, u.window_base);
    append_u64be(out, u.first_delta);
    append_u16be(out, uint16_t(u.deltas.size()));
    for (const auto& d : u.deltas) {
        append_u32be(out, uint32_t(d.size()));
        append_bytes(out, d);
    }
    out.push_back(uint8_t(u.sigs.size()));
    for (const auto& s : u.sigs) out.insert(out.end(), s.begin(), s.end());
    return out;
}

std::optional<UpdatesReply> decode_updates_reply(byte_view buf) {
    Cursor c(buf);
    UpdatesReply u;
    uint8_t st;
    uint16_t count;
    if (!c.u32(u.corr) || !c.u8(st) || !c.u64(u.window_base) || !c.u64(u.first_delta) ||
        !c.u16(count))
        return std::nullopt;
    u.status = Status(st);
    for (uint16_t i = 0; i < count; ++i) {
        uint32_t len;
        byte_view d;
        if (!c.u32(len) || len > MAX_FRAME_BODY || !c.take(len, d)) return std::nullopt;
        u.deltas.emplace_back(d.begin(), d.end());
    }
    uint8_t nsigs;
    if (!c.u8(nsigs)) return std::nullopt;
    for (uint8_t i = 0; i < nsigs; ++i) {
        byte_view s;
        if (!c.take(crypto::SIG_LEN, s)) return std::nullopt;
        crypto::Signature sig;
        std::memcpy(sig.data(), s.data(), sig.size());
        u.sigs.push_back(sig);
    }
    if (!c.done()) return std::nullopt;
    return u;
}

bytes encode_sequenced_write(const SequencedWrite& s, size_t item_len) {
    bytes out;
    append_u64be(out, s.seq);
    out.push_back(s.seal_after ? 1 : 0);
    bytes body = encode_write(s.write, item_len);
    append_bytes(out, body);
    return out;
}

std::optional<SequencedWrite> decode_sequenced_write(byte_view buf, size_t item_len) {
    if (buf.size() != 9 + write_body_len(item_len)) return std::nullopt;
    Cursor c(buf);
    SequencedWrite s;
    uint8_t flags;
    if (!c.u64(s.seq) || !c.u8(flags)) return std::nullopt;
    if (flags > 1) return std::nullopt;
    s.seal_after = flags == 1;
    byte_view body;
    c.take(c.remaining(), body);
    auto w = decode_write(body, item_len);
    if (!w) return std::nullopt;
    s.write = std::move(*w);
    return s;
}

bytes encode_masked_answer(const MaskedAnswer& m) {
    bytes out;
    out.reserve(5 + m.block.size());
    append_u32be(out, m.corr);
    out.push_back(uint8_t(m.status));
    append_bytes(out, m.block);
    return out;
}

std::optional<MaskedAnswer> decode_masked_answer(byte_view buf, size_t bucket_size) {
    if (buf.size() != 5 + bucket_size) return std::nullopt;
    Cursor c(buf);
    MaskedAnswer m;
    uint8_t st;
    byte_view block;
    if (!c.u32(m.corr) || !c.u8(st) || !c.take(bucket_size, block)) return std::nullopt;
    m.status = Status(st);
    m.block.assign(block.begin(), block.end());
    return m;
}

bytes encode_window_sig(const WindowSig& w) {
    bytes out;
    append_u64be(out, w.window_base);
    append_u64be(out, w.newest_delta);
    out.insert(out.end(), w.sig.begin(), w.sig.end());
    return out;
}

std::optional<WindowSig> decode_window_sig(byte_view buf) {
    if (buf.size() != 16 + crypto::SIG_LEN) return std::nullopt;
    WindowSig w;
    w.window_base = load_u64be(buf.data());
    w.newest_delta = load_u64be(buf.data() + 8);
    std::memcpy(w.sig.data(), buf.data() + 16, w.sig.size());
    return w;
}

bytes encode_hello(const Hello& h) {
    if (h.config_digest.size() != 32) throw std::invalid_argument("hello digest must be 32 bytes");
    bytes out;
    append_bytes(out, h.config_digest);
    out.push_back(h.server_index);
    append_u64be(out, h.latest_epoch);
    return out;
}

std::optional<Hello> decode_hello(byte_view buf) {
    if (buf.size() != 41) return std::nullopt;
    Hello h;
    h.config_digest.assign(buf.begin(), buf.begin() + 32);
    h.server_index = buf[32];
    h.latest_epoch = load_u64be(buf.data() + 33);
    return h;
}

bytes encode_hello_ack(const HelloAck& a) {
    if (a.config_digest.size() != 32) throw std::invalid_argument("hello digest must be 32 bytes");
    bytes out;
    out.push_back(uint8_t(a.role));
    append_bytes(out, a.config_digest);
    if (a.role == Role::Leader) {
        if (!a.sig) throw std::invalid_argument("leader hello needs a signature");
        out.insert(out.end(), a.sig->begin(), a.sig->end());
    }
    return out;
}

std::optional<HelloAck> decode_hello_ack(byte_view buf) {
    if (buf.size() < 33) return std::nullopt;
    HelloAck a;
    if (buf[0] == uint8_t(Role::Client)) {
        if (buf.size() != 33) return std::nullopt;
        a.role = Role::Client;
    } else if (buf[0] == uint8_t(Role::Leader)) {
        if (buf.size() != 33 + crypto::SIG_LEN) return std::nullopt;
        a.role = Role::Leader;
        crypto::Signature sig;
        std::memcpy(sig.data(), buf.data() + 33, sig.size());
        a.sig = sig;
    } else {
        return std::nullopt;
    }
    a.config_digest.assign(buf.begin() + 1, buf.begin() + 33);
    return a;
}

bytes encode_error(const ErrorBody& e) {
    bytes out;
    append_u32be(out, e.corr);
    out.push_back(uint8_t(e.status));
    append_bytes(out, to_bytes(e.message));
    return out;
}

std::optional<ErrorBody> decode_error(byte_view buf) {
    if (buf.size() < 5) return std::nullopt;
    Cursor c(buf);
    ErrorBody e;
    uint8_t st;
    if (!c.u32(e.corr) || !c.u8(st)) return std::nullopt;
    e.status = Status(st);
    byte_view msg;
    c.take(c.remaining(), msg);
    e.message = to_string(msg);
    return e;
}

}  // namespace oblog::wire
