#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "oblog/config.hpp"
#include "oblog/server.hpp"
#include "oblog/session.hpp"

namespace oblog::server {

// One running replica. Index 0 is the frontend: it sequences writes, fans
// them out to the other replicas, aggregates their masked read shares, and
// serves interest-window updates once every replica has countersigned.
// Followers accept exactly one authenticated leader link and no clients.
class ServerNode {
public:
    ServerNode(const Config& cfg, uint32_t index);
    ~ServerNode();
    ServerNode(const ServerNode&) = delete;
    ServerNode& operator=(const ServerNode&) = delete;

    void start();
    // Leader only: dial every follower; call once all followers started.
    void connect_links();
    void stop();

    uint16_t port() const { return listener_.port(); }
    bool is_leader() const { return index_ == 0; }
    // True once a fully countersigned window is available to clients.
    bool updates_ready();
    uint64_t latest_epoch();
    uint64_t writes_applied();
    bytes state_digest();
    const ServerMetrics& metrics() const { return metrics_; }
    const Config& config() const { return cfg_; }

private:
    struct Link {
        uint32_t server_index = 0;
        std::shared_ptr<net::Session> session;
        std::deque<wire::Frame> outbox;
        std::mutex mu;
        std::condition_variable cv;
        std::thread sender;
        std::thread receiver;
        uint32_t next_corr = 0;  // mutated under state_mu_ only
    };

    struct PendingRead {
        std::shared_ptr<net::Session> client;
        uint32_t client_corr = 0;
        uint64_t epoch = 0;
        uint32_t remaining = 0;
        wire::Status status = wire::Status::Ok;
        bytes acc;
    };

    struct TokenBucket {
        double tokens = 2.0;
        std::chrono::steady_clock::time_point last{};
    };

    Config cfg_;
    uint32_t index_;
    ServerCore core_;  // guarded by state_mu_
    std::mutex state_mu_;
    uint64_t next_seq_ = 0;
    uint64_t expected_seq_ = 0;  // follower: next sequenced write we will accept
    uint32_t writes_since_seal_ = 0;
    std::chrono::steady_clock::time_point last_seal_;

    net::Listener listener_;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::thread sealer_thread_;

    std::mutex sessions_mu_;
    std::vector<std::thread> session_threads_;
    std::vector<std::shared_ptr<net::Session>> sessions_;

    std::vector<std::unique_ptr<Link>> links_;

    std::mutex pending_mu_;
    uint64_t next_read_id_ = 0;
    std::map<uint64_t, PendingRead> pending_;
    std::map<std::pair<uint32_t, uint32_t>, uint64_t> link_corr_to_read_;

    std::mutex window_mu_;
    SignedWindow pending_window_;
    std::shared_ptr<const SignedWindow> signed_window_;

    std::mutex rl_mu_;
    std::map<std::array<uint8_t, 16>, TokenBucket> rl_buckets_;

    ServerMetrics metrics_;

    void accept_loop();
    void sealer_loop();
    void run_session(int fd);
    void client_loop(const std::shared_ptr<net::Session>& s);
    void leader_link_loop(const std::shared_ptr<net::Session>& s);

    uint64_t handle_client_write(const logproto::WriteRequest& w);
    void handle_client_read(const std::shared_ptr<net::Session>& s, uint32_t corr,
                            const wire::ReadRequest& r);
    wire::UpdatesReply build_updates_reply(uint32_t corr, uint64_t next);

    void start_freeze_collection(const WindowFreeze& f);
    void add_window_sig(uint32_t server_index, const wire::WindowSig& ws);

    void enqueue_link(Link& link, const wire::Frame& f);
    void contribute(uint64_t read_id, wire::Status status, const bytes& block);
    bool allow_write(const std::array<uint8_t, 16>& fp);

    void link_sender(Link& link);
    void link_receiver(Link& link);
};

}  // namespace oblog::server
