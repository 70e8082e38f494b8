#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/logproto.hpp"
#include "oblog/notify.hpp"
#include "oblog/pir.hpp"

namespace oblog::wire {

enum class Kind : uint8_t {
    Write = 0x01,
    Read = 0x02,
    GetUpdates = 0x03,
    WriteAck = 0x04,
    ReadReply = 0x05,
    UpdatesReply = 0x06,
    SequencedWrite = 0x10,
    MaskedAnswer = 0x11,
    WindowSig = 0x12,
    SealMark = 0x13,
    Hello = 0x20,
    HelloAck = 0x21,
    Error = 0x7F,
};

const char* kind_name(Kind k);

inline constexpr size_t FRAME_HEADER_LEN = 5;  // body length u32 BE, kind u8
inline constexpr size_t MAX_FRAME_BODY = size_t(1) << 26;

// Every write announces interest in this many bytes regardless of how many
// filter positions it actually sets.
inline constexpr size_t INTEREST_FIELD_LEN = 64;

struct Frame {
    Kind kind = Kind::Error;
    bytes payload;
};

bytes encode_frame(const Frame& f);

// Incremental parser over a TCP byte stream.
class FrameReader {
public:
    void feed(byte_view data);
    // One complete frame, or nullopt if more bytes are needed.
    // Oversized or unknown-kind frames poison the stream.
    std::optional<Frame> next();
    bool poisoned() const { return poisoned_; }

private:
    bytes buf_;
    size_t pos_ = 0;
    bool poisoned_ = false;
};

enum class Status : uint8_t {
    Ok = 0,
    Malformed = 1,
    RateLimited = 2,
    EpochUnavailable = 3,
    Internal = 4,
};

const char* status_name(Status s);

// ---- request bodies (client to front server) ----

// beta1 u32 | beta2 u32 | item data | interest field
bytes encode_write(const logproto::WriteRequest& w, size_t item_len);
std::optional<logproto::WriteRequest> decode_write(byte_view buf, size_t item_len);
inline constexpr size_t write_body_len(size_t item_len) {
    return 8 + item_len + INTEREST_FIELD_LEN;
}

inline constexpr size_t qv_len(uint32_t buckets) { return (size_t(buckets) + 7) / 8; }
inline constexpr size_t read_share_plain_len(uint32_t buckets) {
    return qv_len(buckets) + crypto::SEED_LEN;
}
inline constexpr size_t read_blob_len(uint32_t buckets) {
    return read_share_plain_len(buckets) + crypto::PK_SEAL_OVERHEAD;
}

// Per-server share before sealing: selection vector bytes | answer mask seed.
bytes encode_read_share(const pir::QueryVector& q, const crypto::Seed& seed);
std::optional<std::pair<pir::QueryVector, crypto::Seed>> decode_read_share(byte_view buf,
                                                                           uint32_t buckets);

// epoch u64 | one sealed share blob per server
struct ReadRequest {
    uint64_t epoch = 0;
    std::vector<bytes> blobs;
};
bytes encode_read(const ReadRequest& r);
std::optional<ReadRequest> decode_read(byte_view buf, uint32_t servers, uint32_t buckets);
inline constexpr size_t read_body_len(uint32_t servers, uint32_t buckets) {
    return 8 + size_t(servers) * read_blob_len(buckets);
}

// next delta index the client wants
bytes encode_get_updates(uint64_t next_delta);
std::optional<uint64_t> decode_get_updates(byte_view buf);

// ---- reply bodies ----

struct WriteAck {
    uint32_t corr = 0;
    Status status = Status::Ok;
    uint64_t epoch = 0;
};
bytes encode_write_ack(const WriteAck& a);
std::optional<WriteAck> decode_write_ack(byte_view buf);

struct ReadReply {
    uint32_t corr = 0;
    Status status = Status::Ok;
    uint64_t epoch = 0;
    bytes block;  // bucket_size bytes, zero unless status == Ok
};
bytes encode_read_reply(const ReadReply& r);
std::optional<ReadReply> decode_read_reply(byte_view buf, size_t bucket_size);

struct UpdatesReply {
    uint32_t corr = 0;
    Status status = Status::Ok;
    uint64_t window_base = 0;
    uint64_t first_delta = 0;
    std::vector<bytes> deltas;  // encoded filters, consecutive from first_delta
    std::vector<crypto::Signature> sigs;
};
bytes encode_updates_reply(const UpdatesReply& u);
std::optional<UpdatesReply> decode_updates_reply(byte_view buf);

// ---- replica link bodies ----

struct SequencedWrite {
    uint64_t seq = 0;
    bool seal_after = false;
    logproto::WriteRequest write;
};
bytes encode_sequenced_write(const SequencedWrite& s, size_t item_len);
std::optional<SequencedWrite> decode_sequenced_write(byte_view buf, size_t item_len);

struct MaskedAnswer {
    uint32_t corr = 0;
    Status status = Status::Ok;
    bytes block;
};
bytes encode_masked_answer(const MaskedAnswer& m);
std::optional<MaskedAnswer> decode_masked_answer(byte_view buf, size_t bucket_size);

struct WindowSig {
    uint64_t window_base = 0;
    uint64_t newest_delta = 0;
    crypto::Signature sig{};
};
bytes encode_window_sig(const WindowSig& w);
std::optional<WindowSig> decode_window_sig(byte_view buf);

// ---- session handshake bodies (sent encrypted) ----

struct Hello {
    bytes config_digest;  // 32
    uint8_t server_index = 0;
    uint64_t latest_epoch = 0;
};
bytes encode_hello(const Hello& h);
std::optional<Hello> decode_hello(byte_view buf);

enum class Role : uint8_t { Client = 1, Leader = 2 };

struct HelloAck {
    Role role = Role::Client;
    bytes config_digest;                    // 32
    std::optional<crypto::Signature> sig;   // leader proves itself
};
bytes encode_hello_ack(const HelloAck& a);
std::optional<HelloAck> decode_hello_ack(byte_view buf);

struct ErrorBody {
    uint32_t corr = 0;
    Status status = Status::Internal;
    std::string message;
};
bytes encode_error(const ErrorBody& e);
std::optional<ErrorBody> decode_error(byte_view buf);

}  // namespace oblog::wire
