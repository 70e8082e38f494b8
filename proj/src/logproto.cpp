#include "oblog/logproto.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <stdexcept>

namespace oblog::logproto {

LogHandle gen_handle(Rng& rng) {
    LogHandle h;
    rng.fill(h.id.data(), h.id.size());
    rng.fill(h.k_enc.data(), h.k_enc.size());
    rng.fill(h.k_s1.data(), h.k_s1.size());
    rng.fill(h.k_s2.data(), h.k_s2.size());
    return h;
}

std::string handle_to_json(const LogHandle& h) {
    nlohmann::json j;
    j["id"] = to_hex(h.id);
    j["k_enc"] = to_hex(h.k_enc);
    j["k_s1"] = to_hex(h.k_s1);
    j["k_s2"] = to_hex(h.k_s2);
    return j.dump();
}

template <size_t N>
static std::array<uint8_t, N> hex_field(const nlohmann::json& j, const char* name) {
    bytes raw = from_hex(j.at(name).get<std::string>());
    if (raw.size() != N) throw std::invalid_argument("handle field length mismatch");
    std::array<uint8_t, N> out;
    std::memcpy(out.data(), raw.data(), N);
    return out;
}

LogHandle handle_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    LogHandle h;
    h.id = hex_field<16>(j, "id");
    h.k_enc = hex_field<32>(j, "k_enc");
    h.k_s1 = hex_field<16>(j, "k_s1");
    h.k_s2 = hex_field<16>(j, "k_s2");
    return h;
}

static crypto::Nonce derive_nonce(const LogId& id, uint64_t seq_no) {
    crypto::Hasher h(crypto::NONCE_LEN);
    h.update(to_bytes("log-nonce-v1"));
    h.update(byte_view(id.data(), id.size()));
    h.update_u64(seq_no);
    bytes d = h.finish();
    crypto::Nonce n;
    std::memcpy(n.data(), d.data(), n.size());
    return n;
}

WriteRequest real_write(const LogHandle& h, uint64_t seq_no, byte_view msg,
                        uint32_t buckets, size_t z, const notify::BloomParams& bp) {
    if (seq_no == RESERVED_SEQNO)
        throw std::invalid_argument("real_write: sequence number reserved for cover traffic");
    if (z < 2) throw std::invalid_argument("real_write: z too small");
    if (msg.size() > max_payload(z)) throw MessageTooLarge("real_write: message exceeds z-2");

    bytes record(record_len(z), 0);
    store_u64be(record.data(), seq_no);
    store_u16be(record.data() + 8, uint16_t(msg.size()));
    std::memcpy(record.data() + 10, msg.data(), msg.size());

    crypto::Nonce nonce = derive_nonce(h.id, seq_no);
    bytes ct = crypto::seal(h.k_enc, nonce, record);

    WriteRequest w;
    w.beta1 = uint32_t(crypto::prf(h.k_s1, seq_no, buckets));
    w.beta2 = uint32_t(crypto::prf(h.k_s2, seq_no, buckets));
    w.data.reserve(item_data_len(z));
    append_bytes(w.data, byte_view(nonce.data(), nonce.size()));
    append_bytes(w.data, ct);
    w.interest = notify::make_interest(bp, h.id, seq_no);
    return w;
}

WriteRequest fake_write(uint32_t buckets, size_t z, const notify::BloomParams& bp, Rng& rng) {
    if (buckets == 0) throw std::invalid_argument("fake_write: no buckets");
    if (z < 2) throw std::invalid_argument("fake_write: z too small");

    bytes record(record_len(z), 0);
    store_u64be(record.data(), RESERVED_SEQNO);

    crypto::SymKey ephemeral;
    rng.fill(ephemeral.data(), ephemeral.size());
    crypto::Nonce nonce;
    rng.fill(nonce.data(), nonce.size());
    bytes ct = crypto::seal(ephemeral, nonce, record);

    WriteRequest w;
    w.beta1 = uint32_t(rng.uniform(buckets));
    w.beta2 = uint32_t(rng.uniform(buckets));
    w.data.reserve(item_data_len(z));
    append_bytes(w.data, byte_view(nonce.data(), nonce.size()));
    append_bytes(w.data, ct);
    w.interest = notify::make_fake_interest(bp, rng);
    return w;
}

ReadPlan read_plan(const LogHandle& h, uint64_t seq_no, Attempt attempt, uint32_t buckets) {
    ReadPlan p;
    p.attempt = attempt;
    p.target = uint32_t(crypto::prf(attempt == Attempt::First ? h.k_s1 : h.k_s2,
                                    seq_no, buckets));
    return p;
}

ReadPlan fake_read_plan(uint32_t buckets, Rng& rng) {
    if (buckets == 0) throw std::invalid_argument("fake_read_plan: no buckets");
    ReadPlan p;
    p.target = uint32_t(rng.uniform(buckets));
    p.fake = true;
    return p;
}

std::optional<bytes> try_decrypt_bucket(const LogHandle& h, uint64_t seq_no,
                                        byte_view bucket, size_t z) {
    size_t slot_len = item_data_len(z);
    if (slot_len == 0 || bucket.size() % slot_len != 0)
        throw std::invalid_argument("try_decrypt_bucket: bucket not a whole number of slots");
    size_t depth = bucket.size() / slot_len;
    for (size_t s = 0; s < depth; ++s) {
        const uint8_t* slot = bucket.data() + s * slot_len;
        crypto::Nonce nonce;
        std::memcpy(nonce.data(), slot, nonce.size());
        auto record = crypto::open(h.k_enc, nonce,
                                   byte_view(slot + nonce.size(), slot_len - nonce.size()));
        if (!record) continue;
        uint64_t got = load_u64be(record->data());
        if (got != seq_no) continue;
        uint16_t len = load_u16be(record->data() + 8);
        if (len > max_payload(z)) continue;
        return bytes(record->begin() + 10, record->begin() + 10 + len);
    }
    return std::nullopt;
}

bytes encode_control(const ControlMessage& m) {
    bytes out;
    out.push_back(uint8_t(m.kind));
    switch (m.kind) {
        case ControlKind::Heartbeat:
            break;
        case ControlKind::LatestSeqNoQuery:
        case ControlKind::HandleRevoke:
            append_bytes(out, byte_view(m.subject.data(), m.subject.size()));
            break;
        case ControlKind::LatestSeqNoReply:
        case ControlKind::RetransmitRequest:
            append_bytes(out, byte_view(m.subject.data(), m.subject.size()));
            append_u64be(out, m.seq_no);
            break;
        case ControlKind::HandleGrant: {
            if (!m.handle) throw std::invalid_argument("encode_control: grant needs a handle");
            const LogHandle& h = *m.handle;
            append_bytes(out, byte_view(h.id.data(), h.id.size()));
            append_bytes(out, byte_view(h.k_enc.data(), h.k_enc.size()));
            append_bytes(out, byte_view(h.k_s1.data(), h.k_s1.size()));
            append_bytes(out, byte_view(h.k_s2.data(), h.k_s2.size()));
            break;
        }
    }
    return out;
}

std::optional<ControlMessage> decode_control(byte_view buf) {
    if (buf.empty()) return std::nullopt;
    ControlMessage m;
    uint8_t kind = buf[0];
    byte_view body = buf.subspan(1);
    switch (kind) {
        case uint8_t(ControlKind::Heartbeat):
            if (!body.empty()) return std::nullopt;
            m.kind = ControlKind::Heartbeat;
            return m;
        case uint8_t(ControlKind::LatestSeqNoQuery):
        case uint8_t(ControlKind::HandleRevoke):
            if (body.size() != 16) return std::nullopt;
            m.kind = ControlKind(kind);
            std::memcpy(m.subject.data(), body.data(), 16);
            return m;
        case uint8_t(ControlKind::LatestSeqNoReply):
        case uint8_t(ControlKind::RetransmitRequest):
            if (body.size() != 24) return std::nullopt;
            m.kind = ControlKind(kind);
            std::memcpy(m.subject.data(), body.data(), 16);
            m.seq_no = load_u64be(body.data() + 16);
            return m;
        case uint8_t(ControlKind::HandleGrant): {
            if (body.size() != 80) return std::nullopt;
            m.kind = ControlKind::HandleGrant;
            LogHandle h;
            std::memcpy(h.id.data(), body.data(), 16);
            std::memcpy(h.k_enc.data(), body.data() + 16, 32);
            std::memcpy(h.k_s1.data(), body.data() + 48, 16);
            std::memcpy(h.k_s2.data(), body.data() + 64, 16);
            m.subject = h.id;
            m.handle = h;
            return m;
        }
        default:
            return std::nullopt;
    }
}

}  // namespace oblog::logproto
