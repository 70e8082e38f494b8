#include "oblog/params.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "oblog/logproto.hpp"
#include "oblog/notify.hpp"
#include "oblog/rng.hpp"
#include "oblog/wire.hpp"

namespace oblog::params {

DeploymentParams from_config(const Config& cfg, uint64_t online_users) {
    DeploymentParams p;
    p.l = cfg.server_count();
    p.n = cfg.capacity_n;
    p.b = cfg.buckets();
    p.d = cfg.depth_d;
    p.z = cfg.message_z;
    p.w = cfg.write_interval_ms ? 1000.0 / cfg.write_interval_ms : 0.0;
    p.r = cfg.read_interval_ms ? 1000.0 / cfg.read_interval_ms : 0.0;
    p.m = online_users;
    return p;
}

void check(const DeploymentParams& p) {
    if (!p.l || !p.n || !p.b || !p.d || !p.z)
        throw std::invalid_argument("params: dimensions must be positive");
}

double ttl_seconds(const DeploymentParams& p) {
    check(p);
    double drain = double(p.m) * p.w;
    if (drain <= 0.0) throw std::invalid_argument("params: ttl needs m*w > 0");
    return double(p.n) / drain;
}

double load_factor(const DeploymentParams& p) {
    check(p);
    return double(p.n) / (double(p.b) * double(p.d));
}

bool over_design_load(const DeploymentParams& p) {
    return load_factor(p) > Config::kDesignLoad + 1e-9;
}

uint64_t query_vector_bytes(const DeploymentParams& p) { return (p.b + 7) / 8; }

uint64_t slot_bytes(const DeploymentParams& p) { return logproto::item_data_len(p.z); }

uint64_t read_request_bytes(const DeploymentParams& p) {
    return uint64_t(p.l) *
           (query_vector_bytes(p) + crypto::SEED_LEN + crypto::PK_SEAL_OVERHEAD);
}

uint64_t read_response_bytes(const DeploymentParams& p) {
    return 13 + uint64_t(p.d) * slot_bytes(p);
}

uint64_t write_request_bytes(const DeploymentParams& p) {
    return 8 + slot_bytes(p) + wire::INTEREST_FIELD_LEN;
}

uint64_t write_ack_bytes() { return 13; }

uint64_t get_updates_request_bytes() { return 8; }

uint64_t frame_overhead_bytes() { return wire::FRAME_HEADER_LEN + 1 + crypto::TAG_LEN; }

uint64_t read_request_wire_bytes(const DeploymentParams& p) {
    return frame_overhead_bytes() + 8 + read_request_bytes(p);
}

uint64_t read_response_wire_bytes(const DeploymentParams& p) {
    return frame_overhead_bytes() + read_response_bytes(p);
}

uint64_t write_request_wire_bytes(const DeploymentParams& p) {
    return frame_overhead_bytes() + write_request_bytes(p);
}

uint64_t write_ack_wire_bytes() { return frame_overhead_bytes() + write_ack_bytes(); }

uint64_t get_updates_wire_bytes() {
    return frame_overhead_bytes() + get_updates_request_bytes();
}

double daily_client_bytes(const DeploymentParams& p, uint32_t get_updates_every,
                          double updates_reply_bytes) {
    check(p);
    double reads = 86400.0 * p.r;
    double writes = 86400.0 * p.w;
    double fetches = get_updates_every ? reads / get_updates_every : 0.0;
    return reads * double(read_request_wire_bytes(p) + read_response_wire_bytes(p)) +
           writes * double(write_request_wire_bytes(p) + write_ack_wire_bytes()) +
           fetches * (double(get_updates_wire_bytes()) + updates_reply_bytes);
}

uint64_t estimate_delta_bytes(const Config& cfg, uint64_t seed) {
    auto bp = cfg.bloom_params();
    DetRng rng(seed);
    auto d = notify::DeltaFilter::empty(bp.m_bits);
    for (uint32_t i = 0; i < cfg.rotate_writes(); ++i)
        for (uint32_t pos : notify::make_fake_interest(bp, rng)) d.set(pos);
    return notify::encode_delta(d).size();
}

double estimate_updates_reply_bytes(const Config& cfg, uint64_t seed) {
    // corr, status, base, first, count, per-delta length prefix, signatures.
    uint64_t fixed = 4 + 1 + 8 + 8 + 2 + 1 + uint64_t(cfg.server_count()) * crypto::SIG_LEN;
    return double(fixed) + 4.0 + double(estimate_delta_bytes(cfg, seed));
}

namespace {

struct Derived {
    DeploymentParams p;
    uint32_t gu_every;
    double updates_reply;
    double daily;
    double ttl;
};

Derived derive(const Config& cfg, uint64_t online_users) {
    Derived d;
    d.p = from_config(cfg, online_users);
    d.gu_every = cfg.get_updates_every;
    d.updates_reply = estimate_updates_reply_bytes(cfg, 1);
    d.daily = daily_client_bytes(d.p, d.gu_every, d.updates_reply);
    d.ttl = online_users ? ttl_seconds(d.p) : 0.0;
    return d;
}

std::string human_bytes(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    if (v >= 1024.0 * 1024.0 * 1024.0)
        os << v / (1024.0 * 1024.0 * 1024.0) << " GiB";
    else if (v >= 1024.0 * 1024.0)
        os << v / (1024.0 * 1024.0) << " MiB";
    else if (v >= 1024.0)
        os << v / 1024.0 << " KiB";
    else
        os << v << " B";
    return os.str();
}

}  // namespace

std::string render_table(const Config& cfg, uint64_t online_users) {
    Derived d = derive(cfg, online_users);
    const DeploymentParams& p = d.p;
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os << "servers (l)              " << p.l << "\n";
    os << "messages retained (n)    " << p.n << "\n";
    os << "buckets (b)              " << p.b << "\n";
    os << "bucket depth (d)         " << p.d << "\n";
    os << "message bound (z)        " << p.z << "\n";
    os.precision(4);
    os << "write rate/user (w)      " << p.w << "/s\n";
    os << "read rate/user (r)       " << p.r << "/s\n";
    os.precision(3);
    os << "load factor              " << load_factor(p)
       << (over_design_load(p) ? "  (warning: exceeds design load 0.95)" : "") << "\n";
    if (p.m) {
        os << "online users (m)         " << p.m << "\n";
        os.precision(1);
        os << "message ttl              " << d.ttl << " s\n";
    }
    os << "read request             " << human_bytes(double(read_request_bytes(p)))
       << "  (" << read_request_bytes(p) << " B body, " << read_request_wire_bytes(p)
       << " B framed)\n";
    os << "read response            " << human_bytes(double(read_response_bytes(p)))
       << "  (" << read_response_wire_bytes(p) << " B framed)\n";
    os << "write request            " << human_bytes(double(write_request_bytes(p)))
       << "  (" << write_request_wire_bytes(p) << " B framed)\n";
    os << "interest update (est.)   " << human_bytes(d.updates_reply) << "\n";
    os << "client bytes/day         " << human_bytes(d.daily) << "\n";
    return os.str();
}

std::string render_json(const Config& cfg, uint64_t online_users) {
    Derived d = derive(cfg, online_users);
    const DeploymentParams& p = d.p;
    nlohmann::json j;
    j["l"] = p.l;
    j["n"] = p.n;
    j["b"] = p.b;
    j["d"] = p.d;
    j["z"] = p.z;
    j["w"] = p.w;
    j["r"] = p.r;
    j["m"] = p.m;
    j["load_factor"] = load_factor(p);
    j["over_design_load"] = over_design_load(p);
    if (p.m) j["ttl_seconds"] = d.ttl;
    j["query_vector_bytes"] = query_vector_bytes(p);
    j["read_request_bytes"] = read_request_bytes(p);
    j["read_request_wire_bytes"] = read_request_wire_bytes(p);
    j["read_response_bytes"] = read_response_bytes(p);
    j["write_request_bytes"] = write_request_bytes(p);
    j["write_request_wire_bytes"] = write_request_wire_bytes(p);
    j["updates_reply_bytes_estimate"] = d.updates_reply;
    j["daily_client_bytes"] = d.daily;
    return j.dump(2);
}

}  // namespace oblog::params
