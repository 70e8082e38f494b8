#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "oblog/config.hpp"
#include "oblog/logproto.hpp"
#include "oblog/notify.hpp"
#include "oblog/session.hpp"
#include "oblog/wire.hpp"

namespace oblog::client {

// One request as the network saw it: which tick issued it, the frame kind,
// the exact bytes on the wire, and the plaintext body for offline analysis.
struct TraceRecord {
    uint64_t slot = 0;
    uint8_t kind = 0;
    uint32_t length = 0;
    bytes payload;
};

struct Delivery {
    LogId log{};
    uint64_t seq_no = 0;
    bytes payload;
};

struct ClientMetrics {
    uint64_t real_writes = 0;
    uint64_t fake_writes = 0;
    uint64_t real_reads = 0;
    uint64_t fake_reads = 0;
    uint64_t second_reads = 0;
    uint64_t notified_reads = 0;
    uint64_t get_updates = 0;
    uint64_t deliveries = 0;
    uint64_t read_misses = 0;
    uint64_t acked_writes = 0;
    uint64_t rate_limited = 0;
    uint64_t window_verified = 0;
    uint64_t window_rejected = 0;
};

// Client state machine, driven by write_tick/read_tick. Exactly one request
// leaves per tick whether or not the user has traffic, so the request stream
// carries no signal; cover requests come from the deterministic per-client
// rng. Replies are consumed by pump().
class ClientCore {
public:
    ClientCore(const Config& cfg, uint64_t seed);
    ~ClientCore();

    void connect(const std::string& host, uint16_t port);
    void disconnect();
    bool connected() const { return session_ != nullptr; }

    logproto::LogHandle create_log();
    void add_writable(const logproto::LogHandle& h);
    void subscribe(const logproto::LogHandle& h, uint64_t start_seq = 1);
    void unsubscribe(const LogId& id);

    // Chunks msg at the deployment bound and queues one write per chunk.
    // Returns the sequence numbers used.
    std::vector<uint64_t> publish(const logproto::LogHandle& h, byte_view msg);

    // Scripted building blocks.
    void enqueue_real_write(const LogId& id, uint64_t seq, bytes msg);
    void enqueue_fake_write();
    void enqueue_real_read(const LogId& id, uint64_t seq);
    void enqueue_fake_read();

    void write_tick();
    void read_tick();
    // Fires an interest-window fetch outside the read-tick cadence.
    void get_updates_tick() { send_get_updates(); }

    // Handle at most one reply frame; false on timeout.
    bool pump(int timeout_ms);
    size_t outstanding() const { return out_writes_.size() + out_reads_.size() + out_updates_; }
    // Pump until nothing is outstanding or the deadline passes.
    bool drain(int timeout_ms);

    std::vector<Delivery> take_deliveries();
    std::function<void(const Delivery&)> on_delivery;

    const std::vector<TraceRecord>& trace() const { return trace_; }
    void enable_trace(bool on) { trace_on_ = on; }

    const ClientMetrics& metrics() const { return metrics_; }
    uint64_t latest_epoch() const { return latest_epoch_; }
    bool window_synced() const { return synced_; }
    uint64_t window_next_delta() const { return next_delta_; }
    uint64_t write_ticks() const { return write_ticks_; }
    uint64_t read_ticks() const { return read_ticks_; }
    const net::SessionStats* session_stats() const {
        return session_ ? &session_->stats() : nullptr;
    }
    size_t write_queue_depth() const { return writeq_.size(); }

private:
    struct Subscription {
        logproto::LogHandle handle;
        uint64_t next_seq = 1;
        std::optional<uint64_t> pending_second;
    };

    struct WriteOp {
        bool fake = true;
        logproto::LogHandle handle;
        uint64_t seq = 0;
        bytes msg;
    };

    struct ReadOp {
        bool fake = true;
        logproto::LogHandle handle;
        uint64_t seq = 0;
    };

    struct OutRead {
        bool fake = true;
        LogId log{};
        logproto::LogHandle handle;
        uint64_t seq = 0;
        logproto::Attempt attempt = logproto::Attempt::First;
        std::vector<crypto::Seed> seeds;
    };

    Config cfg_;
    DetRng rng_;
    std::unique_ptr<net::Session> session_;

    std::deque<WriteOp> writeq_;
    std::deque<ReadOp> readq_;
    std::map<LogId, Subscription> subs_;
    std::map<LogId, logproto::LogHandle> writable_;
    std::map<LogId, uint64_t> next_write_seq_;

    notify::Window mirror_;
    bool synced_ = false;
    uint64_t next_delta_ = 0;

    uint64_t latest_epoch_ = 1;
    uint64_t write_ticks_ = 0;
    uint64_t read_ticks_ = 0;
    uint64_t poll_rr_ = 0;

    uint32_t next_corr_ = 0;
    std::map<uint32_t, uint64_t> out_writes_;  // corr -> tick
    std::map<uint32_t, OutRead> out_reads_;
    size_t out_updates_ = 0;

    std::vector<Delivery> deliveries_;
    std::vector<TraceRecord> trace_;
    bool trace_on_ = true;
    ClientMetrics metrics_;

    struct PlannedRead {
        bool fake = true;
        logproto::LogHandle handle;
        uint64_t seq = 0;
        logproto::Attempt attempt = logproto::Attempt::First;
    };
    PlannedRead choose_read();
    void send_request(wire::Kind kind, bytes body, uint64_t slot);
    void send_get_updates();
    void handle_write_ack(const wire::WriteAck& a);
    void handle_read_reply(const wire::ReadReply& r);
    void handle_updates_reply(const wire::UpdatesReply& u);
    void deliver(const LogId& id, uint64_t seq, bytes payload);
};

// Real-time driver: paces ticks on the configured intervals (plus jitter)
// from a background thread and pumps replies in between.
class ClientRuntime {
public:
    ClientRuntime(const Config& cfg, uint64_t seed);
    ~ClientRuntime();

    void connect(const std::string& host, uint16_t port);
    void start();
    void stop();

    // Safe from other threads while running.
    template <typename F>
    auto with_core(F&& f) {
        std::lock_guard<std::mutex> lk(mu_);
        return f(core_);
    }

    ClientCore& core_unlocked() { return core_; }

private:
    ClientCore core_;
    uint32_t jitter_ms_;
    uint32_t write_interval_ms_;
    uint32_t read_interval_ms_;
    DetRng jitter_rng_;
    std::mutex mu_;
    std::thread thread_;
    std::atomic<bool> running_{false};

    void loop();
};

}  // namespace oblog::client
