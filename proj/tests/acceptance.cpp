#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "oblog/crypto.hpp"
#include "oblog/cuckoo.hpp"
#include "oblog/harness.hpp"
#include "oblog/logproto.hpp"
#include "oblog/notify.hpp"
#include "oblog/params.hpp"
#include "oblog/pir.hpp"
#include "oblog/rng.hpp"
#include "oblog/server.hpp"
#include "oblog/stats.hpp"
#include "oblog/wire.hpp"

using namespace oblog;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// 1. Every bucket of every tested geometry reconstructs exactly through the
//    direct pipeline and the leader-routed masked pipeline, bit for bit.
Outcome criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    DetRng rng(101);
    OsRng os;
    const uint32_t l = 3;
    const size_t item = logproto::item_data_len(48);
    std::vector<crypto::BoxKeyPair> keys;
    for (uint32_t i = 0; i < l; ++i) keys.push_back(crypto::box_keygen(os));

    uint64_t checked = 0;
    for (uint32_t b : {8u, 64u, 256u}) {
        for (uint32_t d : {1u, 4u}) {
            pir::Snapshot snap;
            snap.epoch = 1;
            snap.bucket_count = b;
            snap.bucket_size = uint32_t(d * item);
            snap.data.resize(size_t(b) * snap.bucket_size);
            rng.fill(snap.data.data(), snap.data.size());

            for (uint32_t beta = 0; beta < b; ++beta) {
                auto qs = pir::gen_queries(beta, b, l, rng);
                std::vector<bytes> plain;
                for (auto& q : qs) plain.push_back(pir::answer(snap, q));
                bytes direct = pir::reconstruct(plain);
                bytes want(snap.bucket(beta).begin(), snap.bucket(beta).end());
                if (direct != want)
                    return {false, fmt("direct pipeline wrong at b=%u d=%u beta=%u", b, d, beta)};

                std::vector<crypto::Seed> seeds(l);
                std::vector<bytes> masked;
                for (uint32_t i = 0; i < l; ++i) {
                    rng.fill(seeds[i].data(), seeds[i].size());
                    bytes blob = crypto::pk_seal(
                        keys[i].pk, wire::encode_read_share(qs[i], seeds[i]), os);
                    auto ans = server::answer_share(snap, keys[i], blob, b, os);
                    if (ans.status != wire::Status::Ok)
                        return {false, fmt("share refused at b=%u d=%u beta=%u", b, d, beta)};
                    masked.push_back(std::move(ans.block));
                }
                bytes routed = pir::unmask(pir::combine_masked(masked), seeds);
                if (routed != direct)
                    return {false, fmt("masked pipeline differs at b=%u d=%u beta=%u", b, d, beta)};
                ++checked;
            }
        }
    }
    double el = secs_since(t0);
    if (el >= 10.0) return {false, fmt("took %.1fs, bound 10s", el)};
    return {true, fmt("%llu bucket reconstructions bit-exact in %.1fs",
                      (unsigned long long)checked, el)};
}

// 2. Any l-1 of the l query shares look jointly uniform: per-bit frequency
//    within 4 sigma and the summed pairwise-association chi-square above the
//    0.01 threshold, for every proper subset.
Outcome criterion2() {
    const uint32_t b = 64, l = 3, beta = 17;
    const uint64_t N = 10000;
    const size_t cols = size_t(l) * b;
    const size_t words = (N + 63) / 64;
    std::vector<std::vector<uint64_t>> col(cols, std::vector<uint64_t>(words, 0));

    DetRng rng(20240817);
    for (uint64_t t = 0; t < N; ++t) {
        auto qs = pir::gen_queries(beta, b, l, rng);
        for (uint32_t v = 0; v < l; ++v)
            for (uint32_t j = 0; j < b; ++j)
                if (qs[v].get(j)) col[size_t(v) * b + j][t / 64] |= uint64_t(1) << (t % 64);
    }

    std::vector<uint64_t> ones(cols, 0);
    double worst_dev = 0;
    const double band = 4.0 * 0.5 / std::sqrt(double(N));
    for (size_t c = 0; c < cols; ++c) {
        for (uint64_t w : col[c]) ones[c] += uint64_t(std::popcount(w));
        double dev = std::fabs(double(ones[c]) / double(N) - 0.5);
        worst_dev = std::max(worst_dev, dev);
        if (dev > band)
            return {false, fmt("bit %zu frequency off by %.4f, band %.4f", c, dev, band)};
    }

    const std::vector<std::vector<uint32_t>> subsets = {{0, 1}, {0, 2}, {1, 2}};
    double min_p = 1.0;
    for (auto& sub : subsets) {
        std::vector<size_t> idx;
        for (uint32_t v : sub)
            for (uint32_t j = 0; j < b; ++j) idx.push_back(size_t(v) * b + j);
        double stat = 0;
        uint64_t pairs = 0;
        for (size_t a = 0; a < idx.size(); ++a) {
            for (size_t c = a + 1; c < idx.size(); ++c) {
                uint64_t n11 = 0;
                for (size_t w = 0; w < words; ++w)
                    n11 += uint64_t(std::popcount(col[idx[a]][w] & col[idx[c]][w]));
                uint64_t n10 = ones[idx[a]] - n11;
                uint64_t n01 = ones[idx[c]] - n11;
                uint64_t n00 = N - ones[idx[a]] - ones[idx[c]] + n11;
                stat += stats::chi2_2x2(n00, n01, n10, n11);
                ++pairs;
            }
        }
        double p = stats::chi2_sf(stat, double(pairs));
        min_p = std::min(min_p, p);
        if (p <= 0.01)
            return {false, fmt("subset {%u,%u} association p=%.4f", sub[0], sub[1], p)};
    }
    return {true, fmt("10^4 generations, max bit deviation %.4f (band %.4f), "
                      "min subset association p=%.3f",
                      worst_dev, band, min_p)};
}

// 3. Replicas fed the same sequenced write stream hold byte-identical tables
//    and interest windows at every sealed epoch.
Outcome criterion3() {
    auto t0 = std::chrono::steady_clock::now();
    DetRng rng(303);
    Config cfg = make_local_config(3, rng);
    cfg.capacity_n = 8192;
    cfg.depth_d = 4;
    cfg.message_z = 64;
    cfg.window_deltas = 64;
    cfg.giv_rotate_writes = 128;
    cfg.epoch_ring = 8;

    std::vector<server::ServerCore> cores;
    for (uint32_t i = 0; i < 3; ++i) cores.emplace_back(cfg, i);

    std::vector<logproto::LogHandle> handles;
    for (int i = 0; i < 4; ++i) handles.push_back(logproto::gen_handle(rng));
    std::vector<uint64_t> seqs(handles.size(), 1);
    auto bp = cfg.bloom_params();
    uint32_t buckets = cfg.buckets();

    const uint64_t total = 50000;
    uint64_t sealed = 0;
    for (uint64_t i = 0; i < total; ++i) {
        logproto::WriteRequest w;
        if (i % 3 == 0) {
            size_t h = size_t(i / 3) % handles.size();
            std::string msg = "entry " + std::to_string(seqs[h]);
            w = logproto::real_write(handles[h], seqs[h]++, to_bytes(msg), buckets,
                                     cfg.message_z, bp);
        } else {
            w = logproto::fake_write(buckets, cfg.message_z, bp, rng);
        }
        bool seal = (i % 500) == 499;
        server::ServerCore::ApplyResult first{};
        for (size_t k = 0; k < cores.size(); ++k) {
            auto r = cores[k].apply_write(w, seal);
            if (k == 0) first = r;
        }
        if (!seal) continue;
        ++sealed;
        auto d0 = cores[0].state_digest();
        auto s0 = cores[0].snapshot_at(first.sealed_epoch);
        auto f0 = cores[0].current_freeze().digest;
        for (size_t k = 1; k < cores.size(); ++k) {
            if (cores[k].state_digest() != d0)
                return {false, fmt("state digest split at epoch %llu replica %zu",
                                   (unsigned long long)first.sealed_epoch, k)};
            auto sk = cores[k].snapshot_at(first.sealed_epoch);
            if (!s0 || !sk || sk->data != s0->data)
                return {false, fmt("snapshot bytes split at epoch %llu replica %zu",
                                   (unsigned long long)first.sealed_epoch, k)};
            if (cores[k].current_freeze().digest != f0)
                return {false, fmt("interest window split at epoch %llu replica %zu",
                                   (unsigned long long)first.sealed_epoch, k)};
        }
    }
    double el = secs_since(t0);
    if (el >= 60.0) return {false, fmt("took %.1fs, bound 60s", el)};
    return {true, fmt("3 replicas agree at all %llu sealed epochs over %llu writes in %.1fs",
                      (unsigned long long)sealed, (unsigned long long)total, el)};
}

// 4. The table geometry the deployment leans on: 9,500 items into 2,500x4
//    slots (0.95 load) almost always settles without dropping anything.
Outcome criterion4() {
    const uint32_t b = 2500, d = 4;
    const uint64_t n = 9500;
    int clean = 0;
    for (int trial = 0; trial < 100; ++trial) {
        DetRng rng(uint64_t(trial) * 7919 + 1);
        crypto::Seed seed{};
        rng.fill(seed.data(), seed.size());
        cuckoo::Table t(b, d, n, 16, seed);
        bool overflow = false;
        for (uint64_t i = 0; i < n && !overflow; ++i) {
            cuckoo::Item it;
            it.beta1 = uint32_t(rng.uniform(b));
            it.beta2 = uint32_t(rng.uniform(b));
            it.data.resize(16);
            rng.fill(it.data.data(), it.data.size());
            auto r = t.insert(it);
            overflow = r.dropped || r.gc_evicted;
        }
        if (!overflow && t.live_count() == n) ++clean;
    }
    if (clean < 99) return {false, fmt("%d/100 trials clean, need 99", clean)};
    return {true, fmt("%d/100 trials placed all 9500 items at 0.95 load", clean)};
}

Config delivery_config() {
    DetRng rng(555);
    Config cfg = make_local_config(3, rng);
    cfg.capacity_n = 4096;
    cfg.depth_d = 4;
    cfg.message_z = 256;
    cfg.write_interval_ms = 200;
    cfg.read_interval_ms = 100;
    cfg.jitter_ms = 0;
    cfg.get_updates_every = 2;
    cfg.giv_rotate_writes = 16;
    cfg.window_deltas = 100;
    cfg.epoch_seal_writes = 64;
    cfg.epoch_seal_interval_ms = 50;
    cfg.rate_limit = false;
    return cfg;
}

// Full period of every stage between queueing a message and it becoming
// visible to readers: the writer's next slot, the snapshot seal, and one
// interest-window rotation at the aggregate write rate.
double epoch_cadence_ms(const Config& cfg, uint32_t clients) {
    return double(cfg.write_interval_ms) + double(cfg.epoch_seal_interval_ms) +
           double(cfg.rotate_writes()) * double(cfg.write_interval_ms) / double(clients);
}

// 5. A real chat feed is fully delivered, mean latency sits under the
//    schedule-derived bound, the measured daily byte rate matches the closed
//    form within 1%, and slowing the read schedule slows delivery.
Outcome criterion5() {
    Config cfg = delivery_config();
    harness::ChatGenSpec spec;
    spec.users = 8;
    spec.channels = 1;
    spec.messages = 500;
    spec.interval_ms = 300;
    spec.seed = 11;
    auto msgs = harness::generate_chat(spec);

    auto rep = harness::replay_workload(msgs, cfg, 7, 30000);
    if (!rep.all_delivered())
        return {false, fmt("delivered %zu of %zu", rep.deliveries, rep.expected_deliveries)};
    double bound = 2.0 * cfg.read_interval_ms + epoch_cadence_ms(cfg, spec.users);
    if (rep.latency_mean_ms > bound)
        return {false, fmt("mean latency %.0fms over bound %.0fms", rep.latency_mean_ms, bound)};
    if (rep.closed_form_gap >= 0.01)
        return {false, fmt("daily bytes gap %.2f%% vs closed form, bound 1%%",
                           rep.closed_form_gap * 100)};

    harness::ChatGenSpec small = spec;
    small.users = 4;
    small.messages = 32;
    small.interval_ms = 500;
    small.seed = 13;
    auto small_msgs = harness::generate_chat(small);
    double means[3];
    uint32_t intervals[3] = {100, 500, 1000};
    for (int i = 0; i < 3; ++i) {
        Config c2 = delivery_config();
        c2.read_interval_ms = intervals[i];
        auto r2 = harness::replay_workload(small_msgs, c2, 7, 90000);
        if (!r2.all_delivered())
            return {false, fmt("interval %ums run delivered %zu of %zu", intervals[i],
                               r2.deliveries, r2.expected_deliveries)};
        means[i] = r2.latency_mean_ms;
    }
    if (!(means[0] < means[1] && means[1] < means[2]))
        return {false, fmt("latency not increasing: %.0f / %.0f / %.0f ms", means[0],
                           means[1], means[2])};
    return {true, fmt("3500/3500 delivered, mean %.0fms <= %.0fms, byte gap %.2f%%, "
                      "latency %.0f < %.0f < %.0f ms as reads slow",
                      rep.latency_mean_ms, bound, rep.closed_form_gap * 100, means[0],
                      means[1], means[2])};
}

// 6. Real activity and pure cover traffic are indistinguishable at the
//    network shape level across 20 seeded game runs, and payload bytes pass
//    the frequency test on both branches.
Outcome criterion6() {
    DetRng rng(606);
    Config cfg = make_local_config(3, rng);
    cfg.capacity_n = 256;
    cfg.depth_d = 4;
    cfg.message_z = 32;
    cfg.bloom_n_window = 512;
    cfg.window_deltas = 8;
    cfg.giv_rotate_writes = 8;
    cfg.epoch_seal_writes = 16;
    cfg.epoch_seal_interval_ms = 0;
    cfg.epoch_ring = 16;
    cfg.rate_limit = false;

    harness::GameScript script = harness::make_real_vs_fake_script(200);
    std::vector<harness::ClientTrace> all0, all1;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        auto r0 = harness::run_game(script, 0, cfg, 1000 + seed);
        auto r1 = harness::run_game(script, 1, cfg, 1000 + seed);
        auto v = harness::compare_shape_only(r0.traces, r1.traces);
        if (!v.shape_equal) {
            auto& m = *v.first_mismatch;
            return {false, fmt("seed %llu diverges at client %u record %zu: %s",
                               (unsigned long long)seed, m.client, m.index, m.what.c_str())};
        }
        if (v.get_updates_flagged)
            return {false, fmt("seed %llu update-fetch schedules differ",
                               (unsigned long long)seed)};
        for (auto& t : r0.traces) all0.push_back(std::move(t));
        for (auto& t : r1.traces) all1.push_back(std::move(t));
    }
    auto fs0 = harness::field_stats(cfg, all0);
    auto fs1 = harness::field_stats(cfg, all1);
    if (fs0.monobit_p <= 0.01 || fs1.monobit_p <= 0.01)
        return {false, fmt("frequency test p=%.4f / p=%.4f", fs0.monobit_p, fs1.monobit_p)};
    return {true, fmt("20 seeds x 200 rounds shape-identical; payload frequency "
                      "p=%.3f (real) / p=%.3f (cover) over %llu bytes each",
                      fs0.monobit_p, fs1.monobit_p, (unsigned long long)fs0.bytes)};
}

// 7. Notifications: nothing in the window is ever missed, the false-positive
//    rate lands near its 2% design point, and a full rotation's announcement
//    delta at million-message scale stays under 10k bytes.
Outcome criterion7() {
    DetRng rng(707);
    auto bp = notify::derive_params(2000, 0.02);

    notify::Window win(bp, 100);
    struct Entry {
        LogId id;
        uint64_t seq;
        uint64_t delta;
    };
    std::vector<Entry> live;
    uint64_t misses = 0, inserted = 0;
    for (uint64_t rot = 0; rot < 200; ++rot) {
        for (int k = 0; k < 20; ++k) {
            Entry e;
            rng.fill(e.id.data(), e.id.size());
            e.seq = rng.next_u64();
            e.delta = win.newest();
            win.absorb(notify::make_interest(bp, e.id, e.seq));
            live.push_back(e);
            ++inserted;
        }
        for (auto& e : live)
            if (e.delta >= win.base() && !win.check(notify::make_interest(bp, e.id, e.seq)))
                ++misses;
        win.rotate();
        std::erase_if(live, [&](const Entry& e) { return e.delta < win.base(); });
    }
    if (misses) return {false, fmt("%llu in-window misses", (unsigned long long)misses)};

    notify::Window full(bp, 100);
    for (int i = 0; i < 2000; ++i) {
        LogId id;
        rng.fill(id.data(), id.size());
        full.absorb(notify::make_interest(bp, id, rng.next_u64()));
        if (i % 20 == 19) full.rotate();
    }
    uint64_t fp = 0;
    const uint64_t probes = 10000;
    for (uint64_t i = 0; i < probes; ++i) {
        LogId id;
        rng.fill(id.data(), id.size());
        if (full.check(notify::make_interest(bp, id, rng.next_u64()))) ++fp;
    }
    double fpr = double(fp) / double(probes);
    if (fpr < 0.01 || fpr > 0.04)
        return {false, fmt("false positive rate %.4f outside [0.01, 0.04]", fpr)};

    auto bp6 = notify::derive_params(1000000, 0.02);
    auto delta = notify::DeltaFilter::empty(bp6.m_bits);
    for (int i = 0; i < 500; ++i) {
        LogId id;
        rng.fill(id.data(), id.size());
        for (uint32_t pos : notify::make_interest(bp6, id, rng.next_u64())) delta.set(pos);
    }
    size_t encoded = notify::encode_delta(delta).size();
    if (encoded >= 10000)
        return {false, fmt("million-scale delta encodes to %zu bytes", encoded)};
    return {true, fmt("0 misses over %llu in-window checks, fpr %.3f, "
                      "million-scale delta %zu bytes",
                      (unsigned long long)inserted, fpr, encoded)};
}

// 8. The read path costs what a linear scan should: 10x the table, roughly
//    10x the time.
Outcome criterion8() {
    auto small = harness::bench_process_read(10000, 4, 1024, 20);
    auto big = harness::bench_process_read(100000, 4, 1024, 12);
    double ratio = big.mean_us / small.mean_us;
    if (ratio < 5.0 || ratio > 20.0)
        return {false, fmt("scaling ratio %.1f outside [5, 20] (%.0fus -> %.0fus)", ratio,
                           small.mean_us, big.mean_us)};
    return {true, fmt("read cost %.0fus at 10^4 -> %.0fus at 10^5, ratio %.1f", small.mean_us,
                      big.mean_us, ratio)};
}

// 9. The planning calculator reproduces the published request-size rows
//    within the 25% framing band and the one-day retention point.
Outcome criterion9() {
    auto row = [](uint64_t n) {
        params::DeploymentParams p;
        p.l = 3;
        p.n = n;
        p.b = uint64_t(std::ceil(double(n) / (0.95 * 4)));
        p.d = 4;
        p.z = 1024;
        p.w = p.r = 1.0;
        p.m = 1000;
        return p;
    };
    const double kib = 1024.0;
    struct Row {
        uint64_t n;
        double want_kb;
    };
    double worst = 0;
    for (Row r : {Row{10000, 0.96}, Row{100000, 9.39}, Row{1000000, 93.72}}) {
        double got = double(params::read_request_bytes(row(r.n)));
        double err = std::fabs(got - r.want_kb * kib) / (r.want_kb * kib);
        worst = std::max(worst, err);
        if (err > 0.25)
            return {false, fmt("read request at n=%llu off by %.1f%%",
                               (unsigned long long)r.n, err * 100)};
    }
    double wgot = double(params::write_request_bytes(row(10000)));
    double werr = std::fabs(wgot - 1.08 * kib) / (1.08 * kib);
    worst = std::max(worst, werr);
    if (werr > 0.25) return {false, fmt("write request off by %.1f%%", werr * 100)};

    auto day = row(524000);
    day.m = 32000;
    day.w = double(day.n) / (86400.0 * double(day.m));
    double ttl = params::ttl_seconds(day);
    if (std::fabs(ttl - 86400.0) > 1e-6)
        return {false, fmt("one-day point computes ttl %.3fs", ttl)};
    auto dbl = day;
    dbl.n *= 2;
    if (std::fabs(params::ttl_seconds(dbl) - 2 * ttl) > 1e-6)
        return {false, "ttl not linear in capacity"};
    return {true, fmt("request rows within %.1f%% of published sizes; "
                      "524000-message store retains for 86400s",
                      worst * 100)};
}

}  // namespace

int main() {
    struct Criterion {
        int num;
        const char* name;
        Outcome (*run)();
    };
    const Criterion list[] = {
        {1, "retrieval correctness", criterion1},
        {2, "query share uniformity", criterion2},
        {3, "replica determinism", criterion3},
        {4, "table capacity", criterion4},
        {5, "end-to-end delivery", criterion5},
        {6, "trace-shape indistinguishability", criterion6},
        {7, "notification fidelity", criterion7},
        {8, "read-cost scaling", criterion8},
        {9, "parameter table", criterion9},
    };
    int failures = 0;
    for (const auto& c : list) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("CRITERION %d (%s): %s - %s\n", c.num, c.name,
                    o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures ? 1 : 0;
}
