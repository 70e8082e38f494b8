#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/notify.hpp"
#include "oblog/rng.hpp"

namespace oblog::logproto {

inline constexpr uint64_t RESERVED_SEQNO = UINT64_MAX;

// Capability for one log: possession grants read access, and (by convention)
// write access to whoever the creator shares it with.
struct LogHandle {
    LogId id{};
    crypto::SymKey k_enc{};
    crypto::PrfKey k_s1{};
    crypto::PrfKey k_s2{};

    bool operator==(const LogHandle& o) const { return id == o.id; }
};

LogHandle gen_handle(Rng& rng);

std::string handle_to_json(const LogHandle& h);
LogHandle handle_from_json(const std::string& text);

// Sizes of the fixed slot payload for a deployment message bound z:
// 24-byte nonce, then the sealed record (8-byte seqNo + z padded bytes + tag).
inline constexpr size_t record_len(size_t z) { return 8 + z; }
inline constexpr size_t item_data_len(size_t z) {
    return crypto::NONCE_LEN + record_len(z) + crypto::TAG_LEN;
}
// Two bytes of the padded region carry the true message length.
inline constexpr size_t max_payload(size_t z) { return z - 2; }

struct MessageTooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct WriteRequest {
    uint32_t beta1 = 0;
    uint32_t beta2 = 0;
    bytes data;                      // item_data_len(z) bytes
    std::vector<uint32_t> interest;  // bloom positions announced with the write
};

// Deterministic in (handle, seq_no, msg): replay produces identical bytes.
WriteRequest real_write(const LogHandle& h, uint64_t seq_no, byte_view msg,
                        uint32_t buckets, size_t z, const notify::BloomParams& bp);

// Indistinguishable cover traffic: random buckets, a throwaway key over the
// reserved seqNo and zero payload, a random interest announcement.
WriteRequest fake_write(uint32_t buckets, size_t z, const notify::BloomParams& bp, Rng& rng);

enum class Attempt : uint8_t { First = 1, Second = 2 };

struct ReadPlan {
    uint32_t target = 0;
    Attempt attempt = Attempt::First;
    bool fake = false;
};

ReadPlan read_plan(const LogHandle& h, uint64_t seq_no, Attempt attempt, uint32_t buckets);
ReadPlan fake_read_plan(uint32_t buckets, Rng& rng);

// Try every slot of a recovered bucket against the log key, looking for the
// exact sequence number.
std::optional<bytes> try_decrypt_bucket(const LogHandle& h, uint64_t seq_no,
                                        byte_view bucket, size_t z);

enum class ControlKind : uint8_t {
    Heartbeat = 0,
    LatestSeqNoQuery = 1,
    LatestSeqNoReply = 2,
    RetransmitRequest = 3,
    HandleGrant = 4,
    HandleRevoke = 5,
};

struct ControlMessage {
    ControlKind kind = ControlKind::Heartbeat;
    LogId subject{};
    uint64_t seq_no = 0;
    std::optional<LogHandle> handle;  // HandleGrant payload
};

bytes encode_control(const ControlMessage& m);
std::optional<ControlMessage> decode_control(byte_view buf);

}  // namespace oblog::logproto
