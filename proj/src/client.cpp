#include "oblog/client.hpp"

#include <algorithm>
#include <stdexcept>

#include "oblog/pir.hpp"
#include "oblog/server.hpp"

namespace oblog::client {

ClientCore::ClientCore(const Config& cfg, uint64_t seed)
    : cfg_(cfg), rng_(seed), mirror_(cfg.bloom_params(), cfg.window_deltas) {
    cfg_.validate();
}

ClientCore::~ClientCore() = default;

void ClientCore::connect(const std::string& host, uint16_t port) {
    auto cr = net::Session::connect(host, port, cfg_.servers[0].box_pk, cfg_.digest(),
                                    wire::Role::Client, nullptr, rng_, 5000);
    session_ = std::move(cr.session);
    latest_epoch_ = std::max<uint64_t>(1, cr.hello.latest_epoch);
}

void ClientCore::disconnect() { session_.reset(); }

logproto::LogHandle ClientCore::create_log() {
    auto h = logproto::gen_handle(rng_);
    add_writable(h);
    return h;
}

void ClientCore::add_writable(const logproto::LogHandle& h) {
    writable_[h.id] = h;
    next_write_seq_.emplace(h.id, 1);
}

void ClientCore::subscribe(const logproto::LogHandle& h, uint64_t start_seq) {
    Subscription s;
    s.handle = h;
    s.next_seq = start_seq;
    subs_[h.id] = std::move(s);
}

void ClientCore::unsubscribe(const LogId& id) { subs_.erase(id); }

std::vector<uint64_t> ClientCore::publish(const logproto::LogHandle& h, byte_view msg) {
    auto it = writable_.find(h.id);
    if (it == writable_.end()) throw std::invalid_argument("publish: log is not writable here");
    size_t cap = logproto::max_payload(cfg_.message_z);
    std::vector<uint64_t> seqs;
    size_t off = 0;
    do {
        size_t take = std::min(cap, msg.size() - off);
        uint64_t seq = next_write_seq_[h.id]++;
        enqueue_real_write(h.id, seq, bytes(msg.begin() + ptrdiff_t(off),
                                            msg.begin() + ptrdiff_t(off + take)));
        seqs.push_back(seq);
        off += take;
    } while (off < msg.size());
    return seqs;
}

static double cdbg_ms() {
    static auto t0 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}
static bool cdbg() {
    static bool on = std::getenv("OBLOG_CDBG") != nullptr;
    return on;
}
static void cdbg_log(const char* tag, const void* who, const LogId& id, uint64_t seq) {
    if (!cdbg()) return;
    std::fprintf(stderr, "[cdbg] %s %p %02x%02x %llu %.1f\n", tag, who, id[0], id[1],
                 (unsigned long long)seq, cdbg_ms());
}

void ClientCore::enqueue_real_write(const LogId& id, uint64_t seq, bytes msg) {
    cdbg_log("pub", this, id, seq);
    auto it = writable_.find(id);
    if (it == writable_.end()) throw std::invalid_argument("write: log is not writable here");
    WriteOp op;
    op.fake = false;
    op.handle = it->second;
    op.seq = seq;
    op.msg = std::move(msg);
    writeq_.push_back(std::move(op));
}

void ClientCore::enqueue_fake_write() { writeq_.push_back(WriteOp{}); }

void ClientCore::enqueue_real_read(const LogId& id, uint64_t seq) {
    const logproto::LogHandle* h = nullptr;
    if (auto it = subs_.find(id); it != subs_.end()) h = &it->second.handle;
    else if (auto wt = writable_.find(id); wt != writable_.end()) h = &wt->second;
    if (!h) throw std::invalid_argument("read: no handle for this log");
    ReadOp op;
    op.fake = false;
    op.handle = *h;
    op.seq = seq;
    readq_.push_back(std::move(op));
}

void ClientCore::enqueue_fake_read() { readq_.push_back(ReadOp{}); }

void ClientCore::send_request(wire::Kind kind, bytes body, uint64_t slot) {
    if (!session_) throw std::logic_error("client is not connected");
    size_t wire_len = wire::FRAME_HEADER_LEN + 1 + body.size() + crypto::TAG_LEN;
    if (trace_on_) {
        TraceRecord r;
        r.slot = slot;
        r.kind = uint8_t(kind);
        r.length = uint32_t(wire_len);
        r.payload = body;
        trace_.push_back(std::move(r));
    }
    session_->send(wire::Frame{kind, std::move(body)});
}

void ClientCore::write_tick() {
    ++write_ticks_;
    WriteOp op;
    if (!writeq_.empty()) {
        op = std::move(writeq_.front());
        writeq_.pop_front();
    }
    logproto::WriteRequest w;
    if (op.fake) {
        w = logproto::fake_write(cfg_.buckets(), cfg_.message_z, cfg_.bloom_params(), rng_);
        metrics_.fake_writes += 1;
    } else {
        w = logproto::real_write(op.handle, op.seq, op.msg, cfg_.buckets(), cfg_.message_z,
                                 cfg_.bloom_params());
        metrics_.real_writes += 1;
        cdbg_log("snd", this, op.handle.id, op.seq);
    }
    uint32_t corr = next_corr_++;
    out_writes_[corr] = write_ticks_;
    send_request(wire::Kind::Write, wire::encode_write(w, cfg_.item_size()), write_ticks_);
}

ClientCore::PlannedRead ClientCore::choose_read() {
    if (!readq_.empty()) {
        ReadOp op = std::move(readq_.front());
        readq_.pop_front();
        if (!op.fake) return PlannedRead{false, op.handle, op.seq, logproto::Attempt::First};
        return PlannedRead{};
    }
    for (auto& [id, sub] : subs_) {
        if (sub.pending_second) {
            uint64_t seq = *sub.pending_second;
            sub.pending_second.reset();
            metrics_.second_reads += 1;
            cdbg_log("sec", this, id, seq);
            return PlannedRead{false, sub.handle, seq, logproto::Attempt::Second};
        }
    }
    if (synced_) {
        auto bp = cfg_.bloom_params();
        for (auto& [id, sub] : subs_) {
            for (uint32_t j = 0; j < cfg_.notify_scan_ahead; ++j) {
                auto pos = notify::make_interest(bp, id, sub.next_seq + j);
                if (mirror_.check(pos)) {
                    metrics_.notified_reads += 1;
                    cdbg_log("ntf", this, id, sub.next_seq + j);
                    return PlannedRead{false, sub.handle, sub.next_seq + j,
                                       logproto::Attempt::First};
                }
            }
        }
    }
    if (!subs_.empty()) {
        size_t idx = size_t(poll_rr_++ % subs_.size());
        auto it = subs_.begin();
        std::advance(it, ptrdiff_t(idx));
        cdbg_log("pol", this, it->first, it->second.next_seq);
        return PlannedRead{false, it->second.handle, it->second.next_seq,
                           logproto::Attempt::First};
    }
    return PlannedRead{};
}

void ClientCore::read_tick() {
    ++read_ticks_;
    PlannedRead plan = choose_read();
    uint32_t target;
    if (plan.fake) {
        target = logproto::fake_read_plan(cfg_.buckets(), rng_).target;
        metrics_.fake_reads += 1;
    } else {
        target = logproto::read_plan(plan.handle, plan.seq, plan.attempt, cfg_.buckets()).target;
        metrics_.real_reads += 1;
    }
    uint32_t l = cfg_.server_count();
    auto queries = pir::gen_queries(target, cfg_.buckets(), l, rng_);
    OutRead ctx;
    ctx.fake = plan.fake;
    ctx.log = plan.handle.id;
    ctx.seq = plan.seq;
    ctx.attempt = plan.attempt;
    ctx.handle = plan.handle;
    wire::ReadRequest req;
    req.epoch = latest_epoch_;
    for (uint32_t i = 0; i < l; ++i) {
        crypto::Seed seed;
        rng_.fill(seed.data(), seed.size());
        ctx.seeds.push_back(seed);
        req.blobs.push_back(crypto::pk_seal(cfg_.servers[i].box_pk,
                                            wire::encode_read_share(queries[i], seed), rng_));
    }
    uint32_t corr = next_corr_++;
    out_reads_[corr] = std::move(ctx);
    send_request(wire::Kind::Read, wire::encode_read(req), read_ticks_);

    if (cfg_.get_updates_every > 0 && (read_ticks_ - 1) % cfg_.get_updates_every == 0)
        send_get_updates();
}

void ClientCore::send_get_updates() {
    uint32_t corr = next_corr_++;
    (void)corr;
    out_updates_ += 1;
    metrics_.get_updates += 1;
    send_request(wire::Kind::GetUpdates, wire::encode_get_updates(next_delta_), read_ticks_);
}

bool ClientCore::pump(int timeout_ms) {
    if (!session_) return false;
    auto f = session_->recv(timeout_ms);
    if (!f) return false;
    switch (f->kind) {
        case wire::Kind::WriteAck: {
            auto a = wire::decode_write_ack(f->payload);
            if (a) handle_write_ack(*a);
            break;
        }
        case wire::Kind::ReadReply: {
            auto r = wire::decode_read_reply(f->payload, cfg_.bucket_size());
            if (r) handle_read_reply(*r);
            break;
        }
        case wire::Kind::UpdatesReply: {
            auto u = wire::decode_updates_reply(f->payload);
            if (u) handle_updates_reply(*u);
            break;
        }
        case wire::Kind::Error:
            break;
        default:
            break;
    }
    return true;
}

bool ClientCore::drain(int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (outstanding() > 0) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0) return false;
        pump(int(std::min<long long>(left, 20)));
    }
    return true;
}

void ClientCore::handle_write_ack(const wire::WriteAck& a) {
    auto it = out_writes_.find(a.corr);
    if (it == out_writes_.end()) return;
    out_writes_.erase(it);
    latest_epoch_ = std::max(latest_epoch_, a.epoch);
    if (a.status == wire::Status::Ok) metrics_.acked_writes += 1;
    else if (a.status == wire::Status::RateLimited) metrics_.rate_limited += 1;
}

void ClientCore::handle_read_reply(const wire::ReadReply& r) {
    auto it = out_reads_.find(r.corr);
    if (it == out_reads_.end()) return;
    OutRead ctx = std::move(it->second);
    out_reads_.erase(it);
    latest_epoch_ = std::max(latest_epoch_, r.epoch);
    if (r.status != wire::Status::Ok || ctx.fake) return;

    bytes bucket = pir::unmask(r.block, ctx.seeds);
    auto hit = logproto::try_decrypt_bucket(ctx.handle, ctx.seq, bucket, cfg_.message_z);
    auto sub = subs_.find(ctx.log);
    if (hit) {
        if (sub == subs_.end()) {
            deliver(ctx.log, ctx.seq, std::move(*hit));
        } else if (ctx.seq >= sub->second.next_seq) {
            sub->second.next_seq = ctx.seq + 1;
            sub->second.pending_second.reset();
            deliver(ctx.log, ctx.seq, std::move(*hit));
        }
        return;
    }
    if (ctx.attempt == logproto::Attempt::First && sub != subs_.end() &&
        !sub->second.pending_second && ctx.seq >= sub->second.next_seq) {
        sub->second.pending_second = ctx.seq;
    } else {
        metrics_.read_misses += 1;
    }
}

void ClientCore::handle_updates_reply(const wire::UpdatesReply& u) {
    if (out_updates_ > 0) out_updates_ -= 1;
    if (u.status != wire::Status::Ok) {
        // Internal means the aggregate is not ready yet; anything else is a
        // served-but-unusable reply.
        if (u.status != wire::Status::Internal) metrics_.window_rejected += 1;
        return;
    }
    auto bp = cfg_.bloom_params();
    uint32_t l = cfg_.server_count();
    auto reject = [&](const char* why) {
        cdbg_log(why, this, LogId{}, u.first_delta);
        metrics_.window_rejected += 1;
    };
    if (u.sigs.size() != l) return reject("rej-sigs");
    if (u.deltas.empty() && u.first_delta == 0) return reject("rej-empty");
    uint64_t base = u.window_base;
    if (u.first_delta < base) return reject("rej-first");

    std::deque<notify::DeltaFilter> cand;
    if (u.first_delta > base) {
        if (!synced_ || mirror_.base() > base || mirror_.newest() + 1 < u.first_delta) {
            // The server assumed continuity we do not have; resync from zero.
            next_delta_ = 0;
            return reject("rej-resync");
        }
        for (uint64_t i = base; i < u.first_delta; ++i)
            cand.push_back(mirror_.delta(size_t(i - mirror_.base())));
    }
    for (const auto& enc : u.deltas) {
        auto d = notify::decode_delta(enc);
        if (!d || d->m_bits != bp.m_bits) return reject("rej-decode");
        cand.push_back(std::move(*d));
    }
    if (cand.empty() || cand.size() > cfg_.window_deltas) return reject("rej-count");
    uint64_t newest = base + cand.size() - 1;

    notify::Window candidate(bp, cfg_.window_deltas);
    candidate.reset(base, std::move(cand));
    server::WindowFreeze f;
    f.base = base;
    f.newest = newest;
    f.digest = candidate.digest();
    for (uint32_t i = 0; i < l; ++i)
        if (!server::verify_freeze(cfg_.servers[i].sign_pk, f, u.sigs[i]))
            return reject("rej-sig");

    mirror_ = std::move(candidate);
    synced_ = true;
    next_delta_ = newest + 1;
    metrics_.window_verified += 1;
    if (cdbg())
        for (auto& [id, sub] : subs_)
            if (mirror_.check(notify::make_interest(bp, id, sub.next_seq)))
                cdbg_log("vis", this, id, sub.next_seq);
}

void ClientCore::deliver(const LogId& id, uint64_t seq, bytes payload) {
    cdbg_log("del", this, id, seq);
    metrics_.deliveries += 1;
    Delivery d{id, seq, std::move(payload)};
    if (on_delivery) on_delivery(d);
    deliveries_.push_back(std::move(d));
}

std::vector<Delivery> ClientCore::take_deliveries() {
    std::vector<Delivery> out;
    out.swap(deliveries_);
    return out;
}

ClientRuntime::ClientRuntime(const Config& cfg, uint64_t seed)
    : core_(cfg, seed),
      jitter_ms_(cfg.jitter_ms),
      write_interval_ms_(cfg.write_interval_ms),
      read_interval_ms_(cfg.read_interval_ms),
      jitter_rng_(seed ^ 0x6a09e667f3bcc908ULL) {}

ClientRuntime::~ClientRuntime() { stop(); }

void ClientRuntime::connect(const std::string& host, uint16_t port) {
    core_.connect(host, port);
}

void ClientRuntime::start() {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] { loop(); });
}

void ClientRuntime::stop() {
    if (!running_.exchange(false)) return;
    if (thread_.joinable()) thread_.join();
}

void ClientRuntime::loop() {
    using namespace std::chrono;
    auto jit = [&] {
        return milliseconds(jitter_ms_ ? jitter_rng_.uniform(jitter_ms_ + 1) : 0);
    };
    auto now = steady_clock::now();
    auto next_write = now + milliseconds(write_interval_ms_) + jit();
    auto next_read = now + milliseconds(read_interval_ms_) + jit();
    try {
        while (running_) {
            now = steady_clock::now();
            if (now >= next_write) {
                std::lock_guard<std::mutex> lk(mu_);
                core_.write_tick();
                next_write += milliseconds(write_interval_ms_) + jit();
            }
            if (now >= next_read) {
                std::lock_guard<std::mutex> lk(mu_);
                core_.read_tick();
                next_read += milliseconds(read_interval_ms_) + jit();
            }
            auto next_evt = std::min(next_write, next_read);
            auto wait = duration_cast<milliseconds>(next_evt - steady_clock::now()).count();
            int timeout = int(std::clamp<long long>(wait, 0, 20));
            std::lock_guard<std::mutex> lk(mu_);
            core_.pump(timeout);
        }
    } catch (const net::SessionError&) {
        running_ = false;
    }
}

}  // namespace oblog::client
