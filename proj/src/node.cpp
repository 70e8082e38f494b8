#include "oblog/node.hpp"

namespace oblog::server {

using Clock = std::chrono::steady_clock;

ServerNode::ServerNode(const Config& cfg, uint32_t index)
    : cfg_(cfg), index_(index), core_(cfg, index) {
    last_seal_ = Clock::now();
    pending_window_.freeze = core_.current_freeze();
    pending_window_.sigs.resize(cfg_.server_count());
    pending_window_.have.assign(cfg_.server_count(), false);
    pending_window_.sigs[index_] = core_.sign_current_freeze();
    pending_window_.have[index_] = true;
    if (!is_leader()) {
        // Followers never aggregate; their signature travels to the leader.
        signed_window_ = nullptr;
    }
}

ServerNode::~ServerNode() { stop(); }

void ServerNode::start() {
    listener_ = net::Listener(cfg_.servers[index_].host, cfg_.servers[index_].port);
    accept_thread_ = std::thread([this] { accept_loop(); });
    if (is_leader() && cfg_.epoch_seal_interval_ms > 0)
        sealer_thread_ = std::thread([this] { sealer_loop(); });
}

void ServerNode::connect_links() {
    if (!is_leader()) return;
    OsRng rng;
    for (uint32_t i = 1; i < cfg_.server_count(); ++i) {
        const auto& info = cfg_.servers[i];
        auto cr = net::Session::connect(info.host, info.port, info.box_pk, cfg_.digest(),
                                        wire::Role::Leader, &*cfg_.servers[0].sign_sk, rng,
                                        5000);
        auto link = std::make_unique<Link>();
        link->server_index = i;
        link->session = std::move(cr.session);
        links_.push_back(std::move(link));
    }
    for (auto& link : links_) {
        link->sender = std::thread([this, l = link.get()] { link_sender(*l); });
        link->receiver = std::thread([this, l = link.get()] { link_receiver(*l); });
    }
}

void ServerNode::stop() {
    if (stopping_.exchange(true)) return;
    listener_.close();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (sealer_thread_.joinable()) sealer_thread_.join();
    {
        std::lock_guard<std::mutex> lk(sessions_mu_);
        for (auto& s : sessions_) s->close();
    }
    for (auto& link : links_) {
        {
            std::lock_guard<std::mutex> lk(link->mu);
            link->cv.notify_all();
        }
        if (link->session) link->session->close();
        if (link->sender.joinable()) link->sender.join();
        if (link->receiver.joinable()) link->receiver.join();
    }
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lk(sessions_mu_);
        threads.swap(session_threads_);
    }
    for (auto& t : threads)
        if (t.joinable()) t.join();
}

bool ServerNode::updates_ready() {
    if (!is_leader()) return true;
    std::lock_guard<std::mutex> lk(window_mu_);
    return signed_window_ && signed_window_->complete();
}

uint64_t ServerNode::latest_epoch() {
    std::lock_guard<std::mutex> lk(state_mu_);
    return core_.latest_epoch();
}

uint64_t ServerNode::writes_applied() {
    std::lock_guard<std::mutex> lk(state_mu_);
    return core_.writes_applied();
}

bytes ServerNode::state_digest() {
    std::lock_guard<std::mutex> lk(state_mu_);
    return core_.state_digest();
}

void ServerNode::accept_loop() {
    while (!stopping_) {
        int fd = listener_.accept(100);
        if (fd < 0) continue;
        std::lock_guard<std::mutex> lk(sessions_mu_);
        session_threads_.emplace_back([this, fd] { run_session(fd); });
    }
}

void ServerNode::run_session(int fd) {
    std::shared_ptr<net::Session> session;
    wire::Role role;
    try {
        wire::Hello hello;
        hello.config_digest = cfg_.digest();
        hello.server_index = uint8_t(index_);
        hello.latest_epoch = latest_epoch();
        auto ar = net::Session::accept(fd, core_.box_keys(), hello, cfg_.digest(),
                                       cfg_.servers[0].sign_pk, 5000);
        session = std::move(ar.session);
        role = ar.role;
    } catch (const net::SessionError&) {
        return;
    }
    {
        std::lock_guard<std::mutex> lk(sessions_mu_);
        sessions_.push_back(session);
    }
    try {
        if (role == wire::Role::Leader && !is_leader()) {
            leader_link_loop(session);
        } else if (role == wire::Role::Client && is_leader()) {
            client_loop(session);
        } else {
            wire::ErrorBody e{0, wire::Status::Malformed,
                              is_leader() ? "unexpected leader link" : "clients connect to the frontend"};
            session->send(wire::Frame{wire::Kind::Error, wire::encode_error(e)});
        }
    } catch (const net::SessionError&) {
    }
    session->close();
}

void ServerNode::client_loop(const std::shared_ptr<net::Session>& s) {
    uint32_t corr = 0;
    size_t item_len = cfg_.item_size();
    while (!stopping_) {
        auto f = s->recv(100);
        if (!f) continue;
        switch (f->kind) {
            case wire::Kind::Write: {
                uint32_t c = corr++;
                auto w = wire::decode_write(f->payload, item_len);
                if (!w) {
                    s->send(wire::Frame{wire::Kind::WriteAck,
                                        wire::encode_write_ack({c, wire::Status::Malformed,
                                                                latest_epoch()})});
                    break;
                }
                if (cfg_.rate_limit && !allow_write(s->fingerprint())) {
                    metrics_.rate_limited += 1;
                    s->send(wire::Frame{wire::Kind::WriteAck,
                                        wire::encode_write_ack({c, wire::Status::RateLimited,
                                                                latest_epoch()})});
                    break;
                }
                uint64_t epoch = handle_client_write(*w);
                s->send(wire::Frame{wire::Kind::WriteAck,
                                    wire::encode_write_ack({c, wire::Status::Ok, epoch})});
                break;
            }
            case wire::Kind::Read: {
                uint32_t c = corr++;
                auto r = wire::decode_read(f->payload, cfg_.server_count(), cfg_.buckets());
                if (!r) {
                    wire::ReadReply rr{c, wire::Status::Malformed, 0,
                                       bytes(cfg_.bucket_size(), 0)};
                    s->send(wire::Frame{wire::Kind::ReadReply, wire::encode_read_reply(rr)});
                    break;
                }
                handle_client_read(s, c, *r);
                break;
            }
            case wire::Kind::GetUpdates: {
                uint32_t c = corr++;
                auto next = wire::decode_get_updates(f->payload);
                wire::UpdatesReply u = build_updates_reply(c, next.value_or(0));
                if (!next) u.status = wire::Status::Malformed;
                s->send(wire::Frame{wire::Kind::UpdatesReply, wire::encode_updates_reply(u)});
                break;
            }
            case wire::Kind::Error:
                break;
            default:
                return;  // protocol violation
        }
    }
}

uint64_t ServerNode::handle_client_write(const logproto::WriteRequest& w) {
    std::lock_guard<std::mutex> lk(state_mu_);
    uint64_t seq = next_seq_++;
    ++writes_since_seal_;
    bool seal = cfg_.epoch_seal_writes > 0 && writes_since_seal_ >= cfg_.epoch_seal_writes;
    if (seal) {
        writes_since_seal_ = 0;
        last_seal_ = Clock::now();
    }
    wire::SequencedWrite sw{seq, seal, w};
    wire::Frame frame{wire::Kind::SequencedWrite,
                      wire::encode_sequenced_write(sw, cfg_.item_size())};
    for (auto& link : links_) {
        link->next_corr++;
        enqueue_link(*link, frame);
    }
    auto res = core_.apply_write(w, seal);
    metrics_.writes_applied += 1;
    if (res.insert.gc_evicted || res.insert.dropped) {
        // Expected at capacity; nothing to do, the client rereads or gives up.
    }
    if (res.sealed_epoch) metrics_.epochs_sealed += 1;
    if (res.freeze) {
        metrics_.rotations += 1;
        start_freeze_collection(*res.freeze);
    }
    return core_.latest_epoch();
}

void ServerNode::handle_client_read(const std::shared_ptr<net::Session>& s, uint32_t corr,
                                    const wire::ReadRequest& r) {
    std::shared_ptr<const pir::Snapshot> snap;
    uint64_t epoch = r.epoch;
    uint64_t read_id;
    {
        std::lock_guard<std::mutex> lk(state_mu_);
        snap = core_.snapshot_at(epoch);
        if (!snap) {
            // Pruned or never sealed: every replica answers the current epoch
            // instead, which is consistent because forwards are ordered with
            // the write stream.
            epoch = core_.latest_epoch();
            snap = core_.snapshot_at(epoch);
        }
        read_id = next_read_id_++;
        {
            std::lock_guard<std::mutex> plk(pending_mu_);
            PendingRead p;
            p.client = s;
            p.client_corr = corr;
            p.epoch = epoch;
            p.remaining = cfg_.server_count();
            p.acc.assign(cfg_.bucket_size(), 0);
            pending_[read_id] = std::move(p);
        }
        wire::ReadRequest fwd = r;
        fwd.epoch = epoch;
        wire::Frame frame{wire::Kind::Read, wire::encode_read(fwd)};
        for (auto& link : links_) {
            uint32_t c = link->next_corr++;
            {
                std::lock_guard<std::mutex> plk(pending_mu_);
                link_corr_to_read_[{link->server_index, c}] = read_id;
            }
            enqueue_link(*link, frame);
        }
    }
    OsRng rng;
    auto ans = answer_share(*snap, core_.box_keys(), r.blobs[index_], cfg_.buckets(), rng,
                            &metrics_);
    contribute(read_id, ans.status, ans.block);
}

wire::UpdatesReply ServerNode::build_updates_reply(uint32_t corr, uint64_t next) {
    std::shared_ptr<const SignedWindow> sw;
    {
        std::lock_guard<std::mutex> lk(window_mu_);
        sw = signed_window_;
    }
    wire::UpdatesReply u;
    u.corr = corr;
    if (!sw || !sw->complete()) {
        u.status = wire::Status::Internal;
        return u;
    }
    const auto& f = sw->freeze;
    u.status = wire::Status::Ok;
    u.window_base = f.base;
    uint64_t first = next;
    if (first < f.base || first > f.newest + 1) first = f.base;
    u.first_delta = first;
    for (uint64_t i = first; i <= f.newest; ++i) u.deltas.push_back(f.deltas[i - f.base]);
    u.sigs = sw->sigs;
    metrics_.updates_served += 1;
    return u;
}

static double wdbg_ms() {
    static auto t0 = Clock::now();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}
static bool wdbg() {
    static bool on = std::getenv("OBLOG_WDBG") != nullptr;
    return on;
}

void ServerNode::start_freeze_collection(const WindowFreeze& f) {
    std::lock_guard<std::mutex> lk(window_mu_);
    if (wdbg())
        std::fprintf(stderr, "[wdbg %.1f] rot start base=%llu newest=%llu\n", wdbg_ms(),
                     (unsigned long long)f.base, (unsigned long long)f.newest);
    pending_window_.freeze = f;
    pending_window_.sigs.assign(cfg_.server_count(), crypto::Signature{});
    pending_window_.have.assign(cfg_.server_count(), false);
    pending_window_.sigs[index_] = core_.sign_current_freeze();
    pending_window_.have[index_] = true;
    if (pending_window_.complete())
        signed_window_ = std::make_shared<SignedWindow>(pending_window_);
}

void ServerNode::add_window_sig(uint32_t server_index, const wire::WindowSig& ws) {
    std::lock_guard<std::mutex> lk(window_mu_);
    if (server_index >= cfg_.server_count()) return;
    if (ws.window_base != pending_window_.freeze.base ||
        ws.newest_delta != pending_window_.freeze.newest) {
        if (wdbg())
            std::fprintf(stderr,
                         "[wdbg %.1f] sig drop from=%u got=(%llu,%llu) want=(%llu,%llu)\n",
                         wdbg_ms(), server_index, (unsigned long long)ws.window_base,
                         (unsigned long long)ws.newest_delta,
                         (unsigned long long)pending_window_.freeze.base,
                         (unsigned long long)pending_window_.freeze.newest);
        return;  // lags behind the current rotation; drop
    }
    if (!verify_freeze(cfg_.servers[server_index].sign_pk, pending_window_.freeze, ws.sig))
        return;
    pending_window_.sigs[server_index] = ws.sig;
    pending_window_.have[server_index] = true;
    if (pending_window_.complete()) {
        signed_window_ = std::make_shared<SignedWindow>(pending_window_);
        if (wdbg())
            std::fprintf(stderr, "[wdbg %.1f] window complete newest=%llu\n", wdbg_ms(),
                         (unsigned long long)pending_window_.freeze.newest);
    }
}

void ServerNode::enqueue_link(Link& link, const wire::Frame& f) {
    {
        std::lock_guard<std::mutex> lk(link.mu);
        link.outbox.push_back(f);
    }
    link.cv.notify_one();
}

void ServerNode::contribute(uint64_t read_id, wire::Status status, const bytes& block) {
    PendingRead done;
    {
        std::lock_guard<std::mutex> lk(pending_mu_);
        auto it = pending_.find(read_id);
        if (it == pending_.end()) return;
        PendingRead& p = it->second;
        if (status != wire::Status::Ok) {
            if (p.status == wire::Status::Ok) p.status = status;
        } else if (block.size() == p.acc.size()) {
            xor_into(p.acc.data(), block.data(), block.size());
        } else if (p.status == wire::Status::Ok) {
            p.status = wire::Status::Internal;
        }
        if (--p.remaining > 0) return;
        done = std::move(p);
        pending_.erase(it);
    }
    wire::ReadReply rr;
    rr.corr = done.client_corr;
    rr.status = done.status;
    rr.epoch = latest_epoch();  // freshness hint; the block is from done.epoch
    rr.block = done.status == wire::Status::Ok ? std::move(done.acc)
                                               : bytes(cfg_.bucket_size(), 0);
    try {
        done.client->send(wire::Frame{wire::Kind::ReadReply, wire::encode_read_reply(rr)});
    } catch (const net::SessionError&) {
    }
}

bool ServerNode::allow_write(const std::array<uint8_t, 16>& fp) {
    auto now = Clock::now();
    std::lock_guard<std::mutex> lk(rl_mu_);
    auto& b = rl_buckets_[fp];
    if (b.last.time_since_epoch().count() == 0) {
        b.last = now;
    } else {
        double sec = std::chrono::duration<double>(now - b.last).count();
        b.last = now;
        b.tokens = std::min(2.0, b.tokens + sec * 1000.0 / double(cfg_.write_interval_ms));
    }
    if (b.tokens < 1.0) return false;
    b.tokens -= 1.0;
    return true;
}

void ServerNode::sealer_loop() {
    auto interval = std::chrono::milliseconds(cfg_.epoch_seal_interval_ms);
    while (!stopping_) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        std::lock_guard<std::mutex> lk(state_mu_);
        if (writes_since_seal_ == 0 || Clock::now() - last_seal_ < interval) continue;
        writes_since_seal_ = 0;
        last_seal_ = Clock::now();
        core_.seal_epoch();
        metrics_.epochs_sealed += 1;
        wire::Frame frame{wire::Kind::SealMark, {}};
        for (auto& link : links_) enqueue_link(*link, frame);
    }
}

void ServerNode::link_sender(Link& link) {
    for (;;) {
        wire::Frame f;
        {
            std::unique_lock<std::mutex> lk(link.mu);
            link.cv.wait_for(lk, std::chrono::milliseconds(100),
                             [&] { return stopping_ || !link.outbox.empty(); });
            if (link.outbox.empty()) {
                if (stopping_) return;
                continue;
            }
            f = std::move(link.outbox.front());
            link.outbox.pop_front();
        }
        try {
            link.session->send(f);
        } catch (const net::SessionError&) {
            return;
        }
    }
}

void ServerNode::link_receiver(Link& link) {
    try {
        while (!stopping_) {
            auto f = link.session->recv(100);
            if (!f) continue;
            switch (f->kind) {
                case wire::Kind::MaskedAnswer: {
                    auto m = wire::decode_masked_answer(f->payload, cfg_.bucket_size());
                    if (!m) break;
                    uint64_t read_id;
                    {
                        std::lock_guard<std::mutex> lk(pending_mu_);
                        auto key = std::make_pair(link.server_index, m->corr);
                        auto it = link_corr_to_read_.find(key);
                        if (it == link_corr_to_read_.end()) break;
                        read_id = it->second;
                        link_corr_to_read_.erase(it);
                    }
                    contribute(read_id, m->status, m->block);
                    break;
                }
                case wire::Kind::WriteAck:
                    break;
                case wire::Kind::WindowSig: {
                    auto ws = wire::decode_window_sig(f->payload);
                    if (ws) add_window_sig(link.server_index, *ws);
                    break;
                }
                case wire::Kind::Error:
                    break;
                default:
                    return;
            }
        }
    } catch (const net::SessionError&) {
    }
}

void ServerNode::leader_link_loop(const std::shared_ptr<net::Session>& s) {
    // Fresh leader link: hand over our signature for the current freeze so
    // the leader can complete its aggregate.
    {
        std::lock_guard<std::mutex> lk(state_mu_);
        const auto& f = core_.current_freeze();
        wire::WindowSig ws{f.base, f.newest, core_.sign_current_freeze()};
        s->send(wire::Frame{wire::Kind::WindowSig, wire::encode_window_sig(ws)});
    }
    uint32_t rx_corr = 0;
    while (!stopping_) {
        auto f = s->recv(100);
        if (!f) continue;
        switch (f->kind) {
            case wire::Kind::SequencedWrite: {
                uint32_t c = rx_corr++;
                auto sw = wire::decode_sequenced_write(f->payload, cfg_.item_size());
                if (!sw) return;
                std::optional<WindowFreeze> freeze;
                uint64_t latest;
                {
                    std::lock_guard<std::mutex> lk(state_mu_);
                    if (sw->seq != expected_seq_) return;  // desync, drop the link
                    expected_seq_++;
                    auto res = core_.apply_write(sw->write, sw->seal_after);
                    metrics_.writes_applied += 1;
                    if (res.sealed_epoch) metrics_.epochs_sealed += 1;
                    if (res.freeze) {
                        metrics_.rotations += 1;
                        freeze = res.freeze;
                    }
                    latest = core_.latest_epoch();
                }
                if (freeze) {
                    wire::WindowSig ws{freeze->base, freeze->newest,
                                       sign_freeze(*cfg_.servers[index_].sign_sk, *freeze)};
                    s->send(wire::Frame{wire::Kind::WindowSig, wire::encode_window_sig(ws)});
                }
                s->send(wire::Frame{wire::Kind::WriteAck,
                                    wire::encode_write_ack({c, wire::Status::Ok, latest})});
                break;
            }
            case wire::Kind::Read: {
                uint32_t c = rx_corr++;
                auto r = wire::decode_read(f->payload, cfg_.server_count(), cfg_.buckets());
                if (!r) return;
                std::shared_ptr<const pir::Snapshot> snap;
                {
                    std::lock_guard<std::mutex> lk(state_mu_);
                    snap = core_.snapshot_at(r->epoch);
                }
                wire::MaskedAnswer m;
                m.corr = c;
                if (!snap) {
                    m.status = wire::Status::EpochUnavailable;
                    m.block.assign(cfg_.bucket_size(), 0);
                } else {
                    OsRng rng;
                    auto ans = answer_share(*snap, core_.box_keys(), r->blobs[index_],
                                            cfg_.buckets(), rng, &metrics_);
                    m.status = ans.status;
                    m.block = std::move(ans.block);
                }
                s->send(wire::Frame{wire::Kind::MaskedAnswer, wire::encode_masked_answer(m)});
                break;
            }
            case wire::Kind::SealMark: {
                std::lock_guard<std::mutex> lk(state_mu_);
                core_.seal_epoch();
                metrics_.epochs_sealed += 1;
                break;
            }
            case wire::Kind::Error:
                break;
            default:
                return;
        }
    }
}

}  // namespace oblog::server
