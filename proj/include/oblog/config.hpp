#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/notify.hpp"

namespace oblog {

struct ServerInfo {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    crypto::PublicKey box_pk{};
    crypto::PublicKey sign_pk{};
    // Secrets ride along in harness configs; a hardened deployment would keep
    // each server's own pair elsewhere.
    std::optional<crypto::SecretKey> box_sk;
    std::optional<crypto::SecretKey> sign_sk;
};

struct Config {
    uint64_t capacity_n = 1024;
    uint32_t depth_d = 4;
    uint32_t buckets_b = 0;  // 0: derive from n, d at the design load factor
    uint32_t message_z = 1024;

    uint32_t write_interval_ms = 1000;
    uint32_t read_interval_ms = 1000;
    uint32_t jitter_ms = 0;
    uint32_t get_updates_every = 20;
    uint32_t notify_scan_ahead = 4;

    double bloom_p = 0.02;
    uint64_t bloom_n_window = 0;  // 0: capacity_n
    uint32_t window_deltas = 100;
    uint32_t giv_rotate_writes = 0;  // 0: max(1, n / window_deltas)

    uint32_t epoch_seal_writes = 64;
    uint32_t epoch_seal_interval_ms = 50;
    uint32_t epoch_ring = 16;
    bool rate_limit = true;

    crypto::Seed s_cuckoo{};
    std::vector<ServerInfo> servers;

    static constexpr double kDesignLoad = 0.95;

    uint32_t server_count() const { return uint32_t(servers.size()); }
    uint32_t buckets() const;
    uint64_t effective_n_window() const { return bloom_n_window ? bloom_n_window : capacity_n; }
    uint32_t rotate_writes() const;
    notify::BloomParams bloom_params() const;
    size_t item_size() const;    // slot payload bytes
    size_t bucket_size() const;  // depth * item_size

    void validate() const;

    // Digest over everything replicas and clients must agree on (dimensions,
    // cadence, seeds, public keys); ports and secrets excluded.
    bytes digest() const;
};

Config config_from_json(const std::string& text);
std::string config_to_json(const Config& c);
Config load_config(const std::string& path);
void save_config(const Config& c, const std::string& path);

// Localhost harness config with freshly generated server keys.
Config make_local_config(uint32_t servers, Rng& rng);

}  // namespace oblog
