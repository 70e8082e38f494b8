#include "oblog/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "oblog/logproto.hpp"

namespace oblog {

using nlohmann::json;

uint32_t Config::buckets() const {
    if (buckets_b) return buckets_b;
    double b = std::ceil(double(capacity_n) / (kDesignLoad * double(depth_d)));
    return uint32_t(b);
}

uint32_t Config::rotate_writes() const {
    if (giv_rotate_writes) return giv_rotate_writes;
    uint64_t r = capacity_n / window_deltas;
    return uint32_t(r ? r : 1);
}

notify::BloomParams Config::bloom_params() const {
    return notify::derive_params(effective_n_window(), bloom_p);
}

size_t Config::item_size() const { return logproto::item_data_len(message_z); }

size_t Config::bucket_size() const { return size_t(depth_d) * item_size(); }

void Config::validate() const {
    if (servers.size() < 2) throw std::invalid_argument("config: need at least 2 servers");
    if (capacity_n == 0) throw std::invalid_argument("config: capacity must be positive");
    if (depth_d == 0) throw std::invalid_argument("config: depth must be positive");
    if (message_z < 2) throw std::invalid_argument("config: message size too small");
    if (buckets() == 0) throw std::invalid_argument("config: bucket count must be positive");
    if (capacity_n > uint64_t(buckets()) * depth_d)
        throw std::invalid_argument("config: capacity exceeds table slots");
    if (window_deltas == 0) throw std::invalid_argument("config: window needs at least one delta");
    if (epoch_ring == 0) throw std::invalid_argument("config: epoch ring must be positive");
    if (!(bloom_p > 0.0 && bloom_p < 1.0))
        throw std::invalid_argument("config: false-positive rate out of range");
    if (write_interval_ms == 0 || read_interval_ms == 0)
        throw std::invalid_argument("config: intervals must be positive");
}

bytes Config::digest() const {
    crypto::Hasher h(32);
    h.update(to_bytes("config-v1"));
    h.update_u64(capacity_n);
    h.update_u64(depth_d);
    h.update_u64(buckets());
    h.update_u64(message_z);
    h.update_u64(window_deltas);
    h.update_u64(effective_n_window());
    h.update_u64(rotate_writes());
    h.update_u64(epoch_seal_writes);
    h.update_u64(epoch_ring);
    h.update_u64(uint64_t(bloom_p * 1e9));
    h.update(byte_view(s_cuckoo.data(), s_cuckoo.size()));
    h.update_u64(servers.size());
    for (const auto& s : servers) {
        h.update(byte_view(s.box_pk.data(), s.box_pk.size()));
        h.update(byte_view(s.sign_pk.data(), s.sign_pk.size()));
    }
    return h.finish();
}

namespace {

template <size_t N>
std::array<uint8_t, N> hex_arr(const json& j, const char* field) {
    bytes raw = from_hex(j.at(field).get<std::string>());
    if (raw.size() != N) {
        std::ostringstream os;
        os << "config: field " << field << " must be " << N << " bytes";
        throw std::invalid_argument(os.str());
    }
    std::array<uint8_t, N> out{};
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

}  // namespace

Config config_from_json(const std::string& text) {
    json j = json::parse(text);
    Config c;
    c.capacity_n = j.at("n").get<uint64_t>();
    c.depth_d = j.at("d").get<uint32_t>();
    c.buckets_b = j.value("b", 0u);
    c.message_z = j.at("z").get<uint32_t>();
    c.write_interval_ms = j.value("write_interval_ms", 1000u);
    c.read_interval_ms = j.value("read_interval_ms", 1000u);
    c.jitter_ms = j.value("jitter_ms", 0u);
    c.get_updates_every = j.value("get_updates_every", 20u);
    c.notify_scan_ahead = j.value("notify_scan_ahead", 4u);
    c.bloom_p = j.value("bloom_p", 0.02);
    c.bloom_n_window = j.value("n_window", uint64_t(0));
    c.window_deltas = j.value("window_deltas", 100u);
    c.giv_rotate_writes = j.value("giv_rotate_writes", 0u);
    c.epoch_seal_writes = j.value("epoch_seal_writes", 64u);
    c.epoch_seal_interval_ms = j.value("epoch_seal_interval_ms", 50u);
    c.epoch_ring = j.value("epoch_ring", 16u);
    c.rate_limit = j.value("rate_limit", true);
    c.s_cuckoo = hex_arr<crypto::SEED_LEN>(j, "s_cuckoo");
    for (const auto& sj : j.at("servers")) {
        ServerInfo s;
        s.host = sj.value("host", std::string("127.0.0.1"));
        s.port = sj.value("port", uint16_t(0));
        s.box_pk = hex_arr<crypto::BOX_KEY_LEN>(sj, "box_pk");
        s.sign_pk = hex_arr<crypto::BOX_KEY_LEN>(sj, "sign_pk");
        if (sj.contains("box_sk")) s.box_sk = hex_arr<crypto::BOX_KEY_LEN>(sj, "box_sk");
        if (sj.contains("sign_sk")) s.sign_sk = hex_arr<crypto::SEED_LEN>(sj, "sign_sk");
        c.servers.push_back(std::move(s));
    }
    c.validate();
    return c;
}

std::string config_to_json(const Config& c) {
    json j;
    j["n"] = c.capacity_n;
    j["d"] = c.depth_d;
    if (c.buckets_b) j["b"] = c.buckets_b;
    j["z"] = c.message_z;
    j["write_interval_ms"] = c.write_interval_ms;
    j["read_interval_ms"] = c.read_interval_ms;
    j["jitter_ms"] = c.jitter_ms;
    j["get_updates_every"] = c.get_updates_every;
    j["notify_scan_ahead"] = c.notify_scan_ahead;
    j["bloom_p"] = c.bloom_p;
    if (c.bloom_n_window) j["n_window"] = c.bloom_n_window;
    j["window_deltas"] = c.window_deltas;
    if (c.giv_rotate_writes) j["giv_rotate_writes"] = c.giv_rotate_writes;
    j["epoch_seal_writes"] = c.epoch_seal_writes;
    j["epoch_seal_interval_ms"] = c.epoch_seal_interval_ms;
    j["epoch_ring"] = c.epoch_ring;
    j["rate_limit"] = c.rate_limit;
    j["s_cuckoo"] = to_hex(byte_view(c.s_cuckoo.data(), c.s_cuckoo.size()));
    j["servers"] = json::array();
    for (const auto& s : c.servers) {
        json sj;
        sj["host"] = s.host;
        sj["port"] = s.port;
        sj["box_pk"] = to_hex(byte_view(s.box_pk.data(), s.box_pk.size()));
        sj["sign_pk"] = to_hex(byte_view(s.sign_pk.data(), s.sign_pk.size()));
        if (s.box_sk) sj["box_sk"] = to_hex(byte_view(s.box_sk->data(), s.box_sk->size()));
        if (s.sign_sk) sj["sign_sk"] = to_hex(byte_view(s.sign_sk->data(), s.sign_sk->size()));
        j["servers"].push_back(std::move(sj));
    }
    return j.dump(2);
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

void save_config(const Config& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << config_to_json(c) << "\n";
}

Config make_local_config(uint32_t servers, Rng& rng) {
    Config c;
    rng.fill(c.s_cuckoo.data(), c.s_cuckoo.size());
    for (uint32_t i = 0; i < servers; ++i) {
        ServerInfo s;
        crypto::Seed box_seed{}, sign_seed{};
        rng.fill(box_seed.data(), box_seed.size());
        rng.fill(sign_seed.data(), sign_seed.size());
        auto bk = crypto::box_keygen_from_seed(box_seed);
        auto sk = crypto::sign_keygen_from_seed(sign_seed);
        s.box_pk = bk.pk;
        s.box_sk = bk.sk;
        s.sign_pk = sk.pk;
        s.sign_sk = sk.sk;
        c.servers.push_back(std::move(s));
    }
    return c;
}

}  // namespace oblog
