#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "oblog/config.hpp"
#include "oblog/cuckoo.hpp"
#include "oblog/logproto.hpp"
#include "oblog/notify.hpp"
#include "oblog/pir.hpp"
#include "oblog/wire.hpp"

namespace oblog::server {

// Interest window state captured at a rotation boundary; every replica that
// applied the same write prefix produces byte-identical freezes.
struct WindowFreeze {
    uint64_t base = 0;
    uint64_t newest = 0;
    bytes digest;
    std::vector<bytes> deltas;  // encoded filters, base..newest
};

crypto::Signature sign_freeze(const crypto::SecretKey& sign_seed, const WindowFreeze& f);
bool verify_freeze(const crypto::PublicKey& pk, const WindowFreeze& f,
                   const crypto::Signature& sig);

struct SignedWindow {
    WindowFreeze freeze;
    std::vector<crypto::Signature> sigs;  // indexed by server
    std::vector<bool> have;

    bool complete() const {
        for (bool b : have)
            if (!b) return false;
        return !have.empty();
    }
};

struct ServerMetrics {
    std::atomic<uint64_t> writes_applied{0};
    std::atomic<uint64_t> reads_answered{0};
    std::atomic<uint64_t> updates_served{0};
    std::atomic<uint64_t> rate_limited{0};
    std::atomic<uint64_t> epochs_sealed{0};
    std::atomic<uint64_t> rotations{0};
    std::atomic<uint64_t> decrypt_failures{0};
};

// Single replica's state machine: the cuckoo-addressed store, the rolling
// interest window, and a ring of sealed snapshots. Not thread-safe; callers
// serialize access. Identical inputs produce identical state on every
// replica, which is what state_digest certifies.
class ServerCore {
public:
    ServerCore(const Config& cfg, uint32_t index);

    struct ApplyResult {
        cuckoo::InsertReport insert;
        std::optional<WindowFreeze> freeze;  // present when this write rotated the window
        uint64_t sealed_epoch = 0;           // nonzero when this write sealed
    };
    ApplyResult apply_write(const logproto::WriteRequest& w, bool seal_after);

    uint64_t seal_epoch();

    std::shared_ptr<const pir::Snapshot> snapshot_at(uint64_t epoch) const;
    std::shared_ptr<const pir::Snapshot> latest_snapshot() const;
    uint64_t latest_epoch() const { return latest_epoch_; }
    uint64_t writes_applied() const { return writes_applied_; }

    const WindowFreeze& current_freeze() const { return freeze_; }
    crypto::Signature sign_current_freeze() const;

    const Config& config() const { return cfg_; }
    uint32_t index() const { return index_; }
    const crypto::BoxKeyPair& box_keys() const { return box_keys_; }

    // Digest of everything replicas must agree on.
    bytes state_digest() const;

private:
    Config cfg_;
    uint32_t index_;
    crypto::BoxKeyPair box_keys_;
    crypto::SecretKey sign_seed_;
    cuckoo::Table table_;
    notify::Window window_;
    WindowFreeze freeze_;
    std::map<uint64_t, std::shared_ptr<const pir::Snapshot>> epochs_;
    uint64_t latest_epoch_ = 0;
    uint64_t writes_applied_ = 0;

    WindowFreeze make_freeze() const;
};

struct ShareAnswer {
    wire::Status status = wire::Status::Ok;
    bytes block;
};

// One server's part of a read: unseal the share, select-and-combine over the
// snapshot, apply the client's answer mask. Unsealing or parse failures
// produce a random block instead of an error so tampering earns no oracle.
ShareAnswer answer_share(const pir::Snapshot& snap, const crypto::BoxKeyPair& keys,
                         byte_view blob, uint32_t buckets, Rng& rng,
                         ServerMetrics* metrics = nullptr);

}  // namespace oblog::server
