#include "oblog/server.hpp"

#include <stdexcept>

namespace oblog::server {

namespace {

bytes freeze_sign_message(const WindowFreeze& f) {
    bytes m = to_bytes("window-sig-v1");
    append_u64be(m, f.base);
    append_u64be(m, f.newest);
    append_bytes(m, f.digest);
    return m;
}

}  // namespace

crypto::Signature sign_freeze(const crypto::SecretKey& sign_seed, const WindowFreeze& f) {
    return crypto::sign(sign_seed, freeze_sign_message(f));
}

bool verify_freeze(const crypto::PublicKey& pk, const WindowFreeze& f,
                   const crypto::Signature& sig) {
    return crypto::verify(pk, freeze_sign_message(f), sig);
}

ServerCore::ServerCore(const Config& cfg, uint32_t index)
    : cfg_(cfg),
      index_(index),
      table_(cfg.buckets(), cfg.depth_d, cfg.capacity_n, cfg.item_size(), cfg.s_cuckoo),
      window_(cfg.bloom_params(), cfg.window_deltas) {
    cfg_.validate();
    if (index >= cfg_.servers.size()) throw std::invalid_argument("server index out of range");
    const auto& me = cfg_.servers[index];
    if (!me.box_sk || !me.sign_sk)
        throw std::invalid_argument("server config is missing this server's secret keys");
    box_keys_ = crypto::BoxKeyPair{me.box_pk, *me.box_sk};
    sign_seed_ = *me.sign_sk;
    window_.rotate();
    freeze_ = make_freeze();
    seal_epoch();
}

WindowFreeze ServerCore::make_freeze() const {
    // The last delta is still absorbing writes. Clients mirror served deltas
    // and carry them across updates, so a freeze may only cover deltas that
    // will never change again.
    WindowFreeze f;
    f.base = window_.base();
    f.newest = window_.newest() - 1;
    f.digest = window_.digest(window_.size() - 1);
    for (size_t i = 0; i + 1 < window_.size(); ++i)
        f.deltas.push_back(notify::encode_delta(window_.delta(i)));
    return f;
}

ServerCore::ApplyResult ServerCore::apply_write(const logproto::WriteRequest& w,
                                                bool seal_after) {
    if (w.beta1 >= table_.buckets() || w.beta2 >= table_.buckets())
        throw std::invalid_argument("write targets a bucket outside the table");
    ApplyResult out;
    out.insert = table_.insert(cuckoo::Item{w.beta1, w.beta2, w.data});
    window_.absorb(w.interest);
    ++writes_applied_;
    if (writes_applied_ % cfg_.rotate_writes() == 0) {
        window_.rotate();
        freeze_ = make_freeze();
        out.freeze = freeze_;
    }
    if (seal_after) out.sealed_epoch = seal_epoch();
    return out;
}

uint64_t ServerCore::seal_epoch() {
    auto snap = std::make_shared<pir::Snapshot>(table_.snapshot());
    snap->epoch = ++latest_epoch_;
    epochs_[snap->epoch] = std::move(snap);
    while (epochs_.size() > cfg_.epoch_ring) epochs_.erase(epochs_.begin());
    return latest_epoch_;
}

std::shared_ptr<const pir::Snapshot> ServerCore::snapshot_at(uint64_t epoch) const {
    auto it = epochs_.find(epoch);
    if (it == epochs_.end()) return nullptr;
    return it->second;
}

std::shared_ptr<const pir::Snapshot> ServerCore::latest_snapshot() const {
    return snapshot_at(latest_epoch_);
}

crypto::Signature ServerCore::sign_current_freeze() const {
    return sign_freeze(sign_seed_, freeze_);
}

bytes ServerCore::state_digest() const {
    crypto::Hasher h(32);
    h.update(to_bytes("server-state-v1"));
    h.update_u64(writes_applied_);
    h.update_u64(latest_epoch_);
    h.update(table_.state_digest());
    h.update(window_.digest());
    h.update_u64(freeze_.base);
    h.update_u64(freeze_.newest);
    h.update(freeze_.digest);
    h.update_u64(epochs_.size());
    for (const auto& [num, snap] : epochs_) {
        h.update_u64(num);
        h.update(crypto::digest(snap->data));
    }
    return h.finish();
}

ShareAnswer answer_share(const pir::Snapshot& snap, const crypto::BoxKeyPair& keys,
                         byte_view blob, uint32_t buckets, Rng& rng, ServerMetrics* metrics) {
    ShareAnswer out;
    auto plain = crypto::pk_open(keys, blob);
    if (plain) {
        auto share = wire::decode_read_share(*plain, buckets);
        if (share && share->first.bit_count == snap.bucket_count) {
            bytes ans = pir::answer(snap, share->first);
            out.block = pir::mask_answer(ans, share->second);
            if (metrics) metrics->reads_answered += 1;
            return out;
        }
    }
    if (metrics) {
        metrics->decrypt_failures += 1;
        metrics->reads_answered += 1;
    }
    out.block = rng.gen(snap.bucket_size);
    return out;
}

}  // namespace oblog::server
