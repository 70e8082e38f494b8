#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oblog/client.hpp"
#include "oblog/cluster.hpp"
#include "oblog/config.hpp"

namespace oblog::harness {

// ------------------------------------------------------------------ traces

struct ClientTrace {
    uint32_t client = 0;
    std::vector<client::TraceRecord> records;
};

// Randomness checks over the opaque regions of captured requests: the
// encrypted item of each write and the sealed query blobs of each read
// (ephemeral key headers excluded). Real and cover traffic alike should
// sail through both.
struct FieldStats {
    uint64_t bytes = 0;
    double monobit_p = 1.0;
    double chi2_byte_p = 1.0;
};

struct TraceMismatch {
    uint32_t client = 0;
    size_t index = 0;
    std::string what;
};

struct Verdict {
    bool shape_equal = false;
    // The two traces schedule interest-window fetches differently; those
    // frames are exempt from the shape judgment and reported here instead.
    bool get_updates_flagged = false;
    std::optional<TraceMismatch> first_mismatch;
    FieldStats stats0, stats1;
};

FieldStats field_stats(const Config& cfg, const std::vector<ClientTrace>& traces);

// Shape equality: per client, the (slot, kind, length) sequences match
// exactly. Payload bytes are never compared across traces.
Verdict compare_traces(const Config& cfg, const std::vector<ClientTrace>& t0,
                       const std::vector<ClientTrace>& t1);
Verdict compare_shape_only(const std::vector<ClientTrace>& t0,
                           const std::vector<ClientTrace>& t1);

std::string traces_to_json(const std::vector<ClientTrace>& traces);
std::vector<ClientTrace> traces_from_json(const std::string& text);
std::string verdict_to_json(const Verdict& v);

// ------------------------------------------------------------------ game

struct GameOp {
    enum class Kind : uint8_t { FakeWrite, FakeRead, RealWrite, RealRead };
    Kind kind = Kind::FakeWrite;
    uint32_t log = 0;  // index into the challenger's handle table
    uint64_t seq = 0;
    std::string msg;  // RealWrite payload
};

struct GameRound {
    enum class Kind : uint8_t { CreateLog, GetUpdates, Extend };
    Kind kind = Kind::Extend;
    uint32_t writer = 0;            // CreateLog
    std::vector<uint32_t> readers;  // CreateLog
    std::vector<uint32_t> clients;  // GetUpdates
    // Extend: exactly one (branch 0, branch 1) pair per spawned client.
    std::vector<std::array<GameOp, 2>> ops;
};

struct GameScript {
    uint32_t m = 0;
    std::vector<GameRound> rounds;
};

std::string script_to_json(const GameScript& s);
GameScript script_from_json(const std::string& text);

// Canned script: branch 0 is a real write/read exchange between two clients,
// branch 1 is nothing but cover traffic.
GameScript make_real_vs_fake_script(uint32_t rounds);

struct GameResult {
    std::vector<ClientTrace> traces;
    uint32_t logs_created = 0;
    uint32_t creates_refused = 0;
};

// Plays the script against an in-process cluster: every round each client
// receives its branch-selected op, then issues one write and one read on the
// shared schedule, with a full drain barrier per round. All client
// randomness derives from the given seed, so runs differ only via `bit`.
GameResult run_game(const GameScript& script, int bit, Config cfg, uint64_t seed);

// ------------------------------------------------------------------ replay

struct ChatMessage {
    int64_t at_ms = 0;  // milliseconds since the unix epoch
    std::string channel;
    std::string sender;
    std::string text;
};

struct ParseError : std::runtime_error {
    size_t line;
    ParseError(size_t line_, const std::string& what_)
        : std::runtime_error("line " + std::to_string(line_) + ": " + what_), line(line_) {}
};

// One message per line: ISO8601 timestamp TAB channel TAB sender TAB text.
std::vector<ChatMessage> parse_chat_log(const std::string& text);
std::string format_chat_log(const std::vector<ChatMessage>& msgs);

struct ChatGenSpec {
    uint32_t users = 8;
    uint32_t channels = 1;
    uint32_t messages = 100;
    uint32_t interval_ms = 200;  // mean gap between consecutive messages
    double zipf_s = 1.2;         // channel popularity skew
    uint64_t seed = 1;
};

std::vector<ChatMessage> generate_chat(const ChatGenSpec& spec);

struct ReplayReport {
    size_t messages = 0;
    size_t chunks = 0;
    size_t expected_deliveries = 0;
    size_t deliveries = 0;
    size_t clients = 0;
    double duration_s = 0;
    double latency_mean_ms = 0;
    double latency_p50_ms = 0;
    double latency_p95_ms = 0;
    double latency_max_ms = 0;
    double bytes_per_client_day_measured = 0;
    double bytes_per_client_day_closed_form = 0;
    double closed_form_gap = 0;  // relative difference of the two rows above
    double server_reads_per_sec = 0;

    bool all_delivered() const { return deliveries == expected_deliveries; }
    std::string to_json() const;
    std::string to_table() const;
};

// Spins a cluster, maps each (channel, sender) to a log, subscribes every
// channel member to the other members' logs, and feeds the messages on their
// recorded timeline through real-time paced clients.
ReplayReport replay_workload(const std::vector<ChatMessage>& msgs, Config cfg,
                             uint64_t seed = 1, int drain_grace_ms = 20000);

// ------------------------------------------------------------------ bench

struct BenchPoint {
    uint64_t n = 0;
    uint32_t buckets = 0;
    uint64_t table_bytes = 0;
    int iters = 0;
    double mean_us = 0;
};

// In-process cost of one server's read path (unseal, scan, mask) against a
// table loaded to n items.
BenchPoint bench_process_read(uint64_t n, uint32_t d, uint32_t z, int iters);

}  // namespace oblog::harness
