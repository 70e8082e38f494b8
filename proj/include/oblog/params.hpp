#pragma once

#include <cstdint>
#include <string>

#include "oblog/config.hpp"

namespace oblog::params {

// Planning view of one deployment: table dimensions plus the measured side
// (per-user request rates and how many users are online).
struct DeploymentParams {
    uint32_t l = 0;  // servers
    uint64_t n = 0;  // messages retained
    uint64_t b = 0;  // buckets
    uint32_t d = 0;  // slots per bucket
    uint32_t z = 0;  // message payload bound
    double w = 0.0;  // writes per second per user (cover writes included)
    double r = 0.0;  // reads per second per user
    uint64_t m = 0;  // online users
};

DeploymentParams from_config(const Config& cfg, uint64_t online_users);

// Throws std::invalid_argument on nonpositive dimensions.
void check(const DeploymentParams& p);

// Seconds a message survives before FIFO garbage collection reclaims its
// slot: the store holds n items and the user base replaces m*w per second.
double ttl_seconds(const DeploymentParams& p);

double load_factor(const DeploymentParams& p);
bool over_design_load(const DeploymentParams& p);

uint64_t query_vector_bytes(const DeploymentParams& p);
uint64_t slot_bytes(const DeploymentParams& p);

// Request/reply body sizes, sealing included, session framing excluded.
uint64_t read_request_bytes(const DeploymentParams& p);
uint64_t read_response_bytes(const DeploymentParams& p);
uint64_t write_request_bytes(const DeploymentParams& p);
uint64_t write_ack_bytes();
uint64_t get_updates_request_bytes();

// Per-frame cost on an established session: length header, inner kind, tag.
uint64_t frame_overhead_bytes();

// The same quantities as a session byte counter sees them.
uint64_t read_request_wire_bytes(const DeploymentParams& p);
uint64_t read_response_wire_bytes(const DeploymentParams& p);
uint64_t write_request_wire_bytes(const DeploymentParams& p);
uint64_t write_ack_wire_bytes();
uint64_t get_updates_wire_bytes();

// Interest-update replies vary with window content, so their size is fed in
// (measured or estimated) rather than derived.
double daily_client_bytes(const DeploymentParams& p, uint32_t get_updates_every,
                          double updates_reply_bytes);

// Encodes one rotation's worth of synthetic interest announcements and
// reports the byte size, as an estimate for the variable update row.
uint64_t estimate_delta_bytes(const Config& cfg, uint64_t seed);
double estimate_updates_reply_bytes(const Config& cfg, uint64_t seed);

std::string render_table(const Config& cfg, uint64_t online_users);
std::string render_json(const Config& cfg, uint64_t online_users);

}  // namespace oblog::params
