#pragma once

#include <memory>
#include <vector>

#include "oblog/config.hpp"
#include "oblog/node.hpp"

namespace oblog::harness {

// All replicas of one deployment inside this process, listening on ephemeral
// localhost ports. cfg() carries the patched ports clients should dial.
class Cluster {
public:
    explicit Cluster(Config base);
    ~Cluster();
    Cluster(const Cluster&) = delete;
    Cluster& operator=(const Cluster&) = delete;

    void stop();

    const Config& cfg() const { return cfg_; }
    server::ServerNode& node(size_t i) { return *nodes_[i]; }
    server::ServerNode& leader() { return *nodes_[0]; }
    size_t size() const { return nodes_.size(); }

    // Countersigned window available at the leader.
    bool wait_ready(int timeout_ms);
    // Every replica has applied the leader's full write prefix.
    bool wait_settled(int timeout_ms);
    // All replica state digests agree (call when settled).
    bool replicas_agree();

private:
    Config cfg_;
    std::vector<std::unique_ptr<server::ServerNode>> nodes_;
};

}  // namespace oblog::harness
