#include "oblog/cluster.hpp"

#include <chrono>
#include <thread>

namespace oblog::harness {

using Clock = std::chrono::steady_clock;

Cluster::Cluster(Config base) : cfg_(std::move(base)) {
    cfg_.validate();
    // Followers first so their ports are known when the leader dials out.
    nodes_.resize(cfg_.servers.size());
    for (uint32_t i = 1; i < cfg_.servers.size(); ++i) {
        nodes_[i] = std::make_unique<server::ServerNode>(cfg_, i);
        nodes_[i]->start();
        cfg_.servers[i].port = nodes_[i]->port();
    }
    nodes_[0] = std::make_unique<server::ServerNode>(cfg_, 0);
    nodes_[0]->start();
    cfg_.servers[0].port = nodes_[0]->port();
    nodes_[0]->connect_links();
}

Cluster::~Cluster() { stop(); }

void Cluster::stop() {
    for (auto& n : nodes_)
        if (n) n->stop();
}

bool Cluster::wait_ready(int timeout_ms) {
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    while (Clock::now() < deadline) {
        if (leader().updates_ready()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return leader().updates_ready();
}

bool Cluster::wait_settled(int timeout_ms) {
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        uint64_t want = leader().writes_applied();
        bool ok = true;
        for (size_t i = 1; i < nodes_.size(); ++i)
            if (nodes_[i]->writes_applied() != want) ok = false;
        if (ok && leader().writes_applied() == want) return true;
        if (Clock::now() >= deadline) return false;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

bool Cluster::replicas_agree() {
    bytes want = leader().state_digest();
    for (size_t i = 1; i < nodes_.size(); ++i)
        if (nodes_[i]->state_digest() != want) return false;
    return true;
}

}  // namespace oblog::harness
