#include "oblog/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "oblog/cuckoo.hpp"
#include "oblog/logproto.hpp"
#include "oblog/server.hpp"
#include "oblog/stats.hpp"
#include "oblog/wire.hpp"

namespace oblog::harness {

using nlohmann::json;

namespace {

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Pulls the request segments that are supposed to be indistinguishable from
// random: a write's encrypted item, a read's sealed blobs minus the 32-byte
// ephemeral key header each carries.
void collect_opaque(const Config& cfg, const client::TraceRecord& r, bytes& out) {
    size_t item = cfg.item_size();
    size_t qlen = (cfg.buckets() + 7) / 8;
    size_t blob = qlen + crypto::SEED_LEN + crypto::PK_SEAL_OVERHEAD;
    uint32_t l = cfg.server_count();
    if (r.kind == uint8_t(wire::Kind::Write)) {
        if (r.payload.size() != 8 + item + wire::INTEREST_FIELD_LEN) return;
        out.insert(out.end(), r.payload.begin() + 8, r.payload.begin() + ptrdiff_t(8 + item));
    } else if (r.kind == uint8_t(wire::Kind::Read)) {
        if (r.payload.size() != 8 + size_t(l) * blob) return;
        for (uint32_t i = 0; i < l; ++i) {
            size_t at = 8 + size_t(i) * blob + crypto::BOX_KEY_LEN;
            out.insert(out.end(), r.payload.begin() + ptrdiff_t(at),
                       r.payload.begin() + ptrdiff_t(at + blob - crypto::BOX_KEY_LEN));
        }
    }
}

}  // namespace

FieldStats field_stats(const Config& cfg, const std::vector<ClientTrace>& traces) {
    bytes opaque;
    for (const auto& t : traces)
        for (const auto& r : t.records) collect_opaque(cfg, r, opaque);
    FieldStats fs;
    fs.bytes = opaque.size();
    if (opaque.empty()) return fs;
    fs.monobit_p = stats::monobit_p(stats::count_ones(opaque), opaque.size() * 8);
    std::array<uint64_t, 256> hist{};
    for (uint8_t v : opaque) hist[v] += 1;
    fs.chi2_byte_p = stats::chi2_uniform_p(hist);
    return fs;
}

namespace {

Verdict compare_impl(const std::vector<ClientTrace>& t0, const std::vector<ClientTrace>& t1) {
    Verdict v;
    v.shape_equal = true;
    auto fail = [&](uint32_t client, size_t index, std::string what) {
        if (v.shape_equal) v.first_mismatch = TraceMismatch{client, index, std::move(what)};
        v.shape_equal = false;
    };

    std::map<uint32_t, const std::vector<client::TraceRecord>*> a, b;
    for (const auto& t : t0) a[t.client] = &t.records;
    for (const auto& t : t1) b[t.client] = &t.records;
    if (a.size() != b.size()) {
        fail(0, 0, "client sets differ");
        return v;
    }
    for (const auto& [cid, ra] : a) {
        auto it = b.find(cid);
        if (it == b.end()) {
            fail(cid, 0, "client missing from second trace");
            return v;
        }
        const auto& rb = *it->second;

        auto is_gu = [](const client::TraceRecord& r) {
            return r.kind == uint8_t(wire::Kind::GetUpdates);
        };
        std::vector<const client::TraceRecord*> sa, sb, ga, gb;
        for (const auto& r : *ra) (is_gu(r) ? ga : sa).push_back(&r);
        for (const auto& r : rb) (is_gu(r) ? gb : sb).push_back(&r);

        if (ga.size() != gb.size())
            v.get_updates_flagged = true;
        else
            for (size_t i = 0; i < ga.size(); ++i)
                if (ga[i]->slot != gb[i]->slot) v.get_updates_flagged = true;

        size_t n = std::min(sa.size(), sb.size());
        for (size_t i = 0; i < n; ++i) {
            const auto& x = *sa[i];
            const auto& y = *sb[i];
            if (x.slot != y.slot || x.kind != y.kind || x.length != y.length) {
                std::ostringstream os;
                os << "record " << i << ": slot " << x.slot << "/" << y.slot << " kind "
                   << int(x.kind) << "/" << int(y.kind) << " length " << x.length << "/"
                   << y.length;
                fail(cid, i, os.str());
                break;
            }
        }
        if (sa.size() != sb.size())
            fail(cid, n,
                 "record counts differ (" + std::to_string(sa.size()) + " vs " +
                     std::to_string(sb.size()) + ")");
    }
    return v;
}

}  // namespace

Verdict compare_traces(const Config& cfg, const std::vector<ClientTrace>& t0,
                       const std::vector<ClientTrace>& t1) {
    Verdict v = compare_impl(t0, t1);
    v.stats0 = field_stats(cfg, t0);
    v.stats1 = field_stats(cfg, t1);
    return v;
}

Verdict compare_shape_only(const std::vector<ClientTrace>& t0,
                           const std::vector<ClientTrace>& t1) {
    return compare_impl(t0, t1);
}

std::string traces_to_json(const std::vector<ClientTrace>& traces) {
    json root;
    root["clients"] = json::array();
    for (const auto& t : traces) {
        json jc;
        jc["client"] = t.client;
        jc["records"] = json::array();
        for (const auto& r : t.records) {
            json jr;
            jr["slot"] = r.slot;
            jr["kind"] = r.kind;
            jr["length"] = r.length;
            jr["digest"] = to_hex(crypto::digest(r.payload, 16));
            jr["body"] = to_hex(r.payload);
            jc["records"].push_back(std::move(jr));
        }
        root["clients"].push_back(std::move(jc));
    }
    return root.dump();
}

std::vector<ClientTrace> traces_from_json(const std::string& text) {
    json root = json::parse(text);
    std::vector<ClientTrace> out;
    for (const auto& jc : root.at("clients")) {
        ClientTrace t;
        t.client = jc.at("client").get<uint32_t>();
        for (const auto& jr : jc.at("records")) {
            client::TraceRecord r;
            r.slot = jr.at("slot").get<uint64_t>();
            r.kind = jr.at("kind").get<uint8_t>();
            r.length = jr.at("length").get<uint32_t>();
            r.payload = from_hex(jr.at("body").get<std::string>());
            t.records.push_back(std::move(r));
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::string verdict_to_json(const Verdict& v) {
    json j;
    j["shape_equal"] = v.shape_equal;
    j["get_updates_flagged"] = v.get_updates_flagged;
    if (v.first_mismatch) {
        j["first_mismatch"] = {{"client", v.first_mismatch->client},
                               {"index", v.first_mismatch->index},
                               {"what", v.first_mismatch->what}};
    } else {
        j["first_mismatch"] = nullptr;
    }
    auto stats_json = [](const FieldStats& fs) {
        return json{{"bytes", fs.bytes},
                    {"monobit_p", fs.monobit_p},
                    {"chi2_byte_p", fs.chi2_byte_p}};
    };
    j["field_stats"] = {stats_json(v.stats0), stats_json(v.stats1)};
    return j.dump(2);
}

// ------------------------------------------------------------------ game

namespace {

json op_to_json(const GameOp& op) {
    switch (op.kind) {
        case GameOp::Kind::FakeWrite:
            return json{{"op", "fake_write"}};
        case GameOp::Kind::FakeRead:
            return json{{"op", "fake_read"}};
        case GameOp::Kind::RealWrite:
            return json{{"op", "real_write"}, {"log", op.log}, {"seq", op.seq}, {"msg", op.msg}};
        case GameOp::Kind::RealRead:
            return json{{"op", "real_read"}, {"log", op.log}, {"seq", op.seq}};
    }
    return json{};
}

GameOp op_from_json(const json& j) {
    GameOp op;
    std::string k = j.at("op").get<std::string>();
    if (k == "fake_write") {
        op.kind = GameOp::Kind::FakeWrite;
    } else if (k == "fake_read") {
        op.kind = GameOp::Kind::FakeRead;
    } else if (k == "real_write") {
        op.kind = GameOp::Kind::RealWrite;
        op.log = j.at("log").get<uint32_t>();
        op.seq = j.at("seq").get<uint64_t>();
        op.msg = j.at("msg").get<std::string>();
    } else if (k == "real_read") {
        op.kind = GameOp::Kind::RealRead;
        op.log = j.at("log").get<uint32_t>();
        op.seq = j.at("seq").get<uint64_t>();
    } else {
        throw std::invalid_argument("unknown op kind: " + k);
    }
    return op;
}

}  // namespace

std::string script_to_json(const GameScript& s) {
    json root;
    root["m"] = s.m;
    root["rounds"] = json::array();
    for (const auto& r : s.rounds) {
        json jr;
        switch (r.kind) {
            case GameRound::Kind::CreateLog:
                jr["create_log"] = {{"writer", r.writer}, {"readers", r.readers}};
                break;
            case GameRound::Kind::GetUpdates:
                jr["get_updates"] = {{"clients", r.clients}};
                break;
            case GameRound::Kind::Extend: {
                json ops = json::array();
                for (const auto& pair : r.ops)
                    ops.push_back(json::array({op_to_json(pair[0]), op_to_json(pair[1])}));
                jr["extend"] = {{"ops", std::move(ops)}};
                break;
            }
        }
        root["rounds"].push_back(std::move(jr));
    }
    return root.dump(2);
}

GameScript script_from_json(const std::string& text) {
    json root = json::parse(text);
    GameScript s;
    s.m = root.at("m").get<uint32_t>();
    for (const auto& jr : root.at("rounds")) {
        GameRound r;
        if (jr.contains("create_log")) {
            r.kind = GameRound::Kind::CreateLog;
            r.writer = jr["create_log"].at("writer").get<uint32_t>();
            r.readers = jr["create_log"].at("readers").get<std::vector<uint32_t>>();
        } else if (jr.contains("get_updates")) {
            r.kind = GameRound::Kind::GetUpdates;
            r.clients = jr["get_updates"].at("clients").get<std::vector<uint32_t>>();
        } else if (jr.contains("extend")) {
            r.kind = GameRound::Kind::Extend;
            for (const auto& jp : jr["extend"].at("ops")) {
                if (jp.size() != 2)
                    throw std::invalid_argument("extend op entry must be a pair");
                r.ops.push_back({op_from_json(jp[0]), op_from_json(jp[1])});
            }
        } else {
            throw std::invalid_argument("unknown round type");
        }
        s.rounds.push_back(std::move(r));
    }
    return s;
}

GameScript make_real_vs_fake_script(uint32_t rounds) {
    GameScript s;
    s.m = 2;
    GameRound create;
    create.kind = GameRound::Kind::CreateLog;
    create.writer = 0;
    create.readers = {1};
    s.rounds.push_back(create);
    GameRound gu;
    gu.kind = GameRound::Kind::GetUpdates;
    gu.clients = {0, 1};
    s.rounds.push_back(gu);
    for (uint32_t i = 0; i < rounds; ++i) {
        if (i && i % 25 == 0) s.rounds.push_back(gu);
        GameRound r;
        r.kind = GameRound::Kind::Extend;
        GameOp w0;
        w0.kind = GameOp::Kind::RealWrite;
        w0.log = 0;
        w0.seq = i + 1;
        w0.msg = "note " + std::to_string(i + 1);
        GameOp w1;
        w1.kind = GameOp::Kind::FakeWrite;
        GameOp r0;
        r0.kind = GameOp::Kind::RealRead;
        r0.log = 0;
        r0.seq = i + 1;
        GameOp r1;
        r1.kind = GameOp::Kind::FakeRead;
        r.ops.push_back({w0, w1});
        r.ops.push_back({r0, r1});
        s.rounds.push_back(r);
    }
    return s;
}

GameResult run_game(const GameScript& script, int bit, Config cfg, uint64_t seed) {
    if (bit != 0 && bit != 1) throw std::invalid_argument("bit must be 0 or 1");
    // The script owns the update-fetch schedule, and state must be a pure
    // function of the write stream so branch runs stay comparable.
    cfg.get_updates_every = 0;
    cfg.epoch_seal_interval_ms = 0;
    cfg.rate_limit = false;

    Cluster cluster(cfg);
    const Config& live = cluster.cfg();
    if (!cluster.wait_ready(10000)) throw std::runtime_error("game: cluster not ready");

    std::vector<std::unique_ptr<client::ClientCore>> cs;
    for (uint32_t j = 0; j < script.m; ++j) {
        cs.push_back(std::make_unique<client::ClientCore>(live, mix64(seed, j)));
        cs.back()->connect(live.servers[0].host, live.servers[0].port);
    }
    DetRng challenger(mix64(seed, 0xC0A1E5));

    GameResult res;
    std::vector<logproto::LogHandle> table;

    auto barrier = [&] {
        for (auto& c : cs)
            if (!c->drain(15000)) throw std::runtime_error("game: drain timed out");
    };

    for (const auto& round : script.rounds) {
        switch (round.kind) {
            case GameRound::Kind::CreateLog: {
                bool ok = round.writer < script.m;
                for (uint32_t r : round.readers) ok = ok && r < script.m;
                if (!ok) {
                    res.creates_refused += 1;
                    break;
                }
                auto h = logproto::gen_handle(challenger);
                table.push_back(h);
                cs[round.writer]->add_writable(h);
                for (uint32_t r : round.readers)
                    if (r != round.writer) cs[r]->subscribe(h);
                break;
            }
            case GameRound::Kind::GetUpdates: {
                for (uint32_t j : round.clients)
                    if (j < script.m) cs[j]->get_updates_tick();
                barrier();
                break;
            }
            case GameRound::Kind::Extend: {
                if (round.ops.size() != script.m)
                    throw std::invalid_argument("extend round must give every client an op pair");
                for (uint32_t j = 0; j < script.m; ++j) {
                    const GameOp& op = round.ops[j][size_t(bit)];
                    switch (op.kind) {
                        case GameOp::Kind::FakeWrite:
                            cs[j]->enqueue_fake_write();
                            break;
                        case GameOp::Kind::FakeRead:
                            cs[j]->enqueue_fake_read();
                            break;
                        case GameOp::Kind::RealWrite:
                            if (op.log < table.size()) {
                                cs[j]->add_writable(table[op.log]);
                                cs[j]->enqueue_real_write(table[op.log].id, op.seq,
                                                          to_bytes(op.msg));
                            }
                            break;
                        case GameOp::Kind::RealRead:
                            if (op.log < table.size()) {
                                cs[j]->add_writable(table[op.log]);
                                cs[j]->enqueue_real_read(table[op.log].id, op.seq);
                            }
                            break;
                    }
                }
                for (auto& c : cs) c->write_tick();
                for (auto& c : cs) c->read_tick();
                barrier();
                break;
            }
        }
    }
    barrier();

    res.logs_created = uint32_t(table.size());
    for (uint32_t j = 0; j < script.m; ++j)
        res.traces.push_back(ClientTrace{j, cs[j]->trace()});
    return res;
}

// ------------------------------------------------------------------ bench

BenchPoint bench_process_read(uint64_t n, uint32_t d, uint32_t z, int iters) {
    using clock = std::chrono::steady_clock;
    uint32_t b = uint32_t(std::ceil(double(n) / (Config::kDesignLoad * double(d))));
    size_t item = logproto::item_data_len(z);
    DetRng rng(mix64(n, 0xBE7C));
    crypto::Seed tseed;
    rng.fill(tseed.data(), tseed.size());
    cuckoo::Table table(b, d, n, item, tseed);
    for (uint64_t i = 0; i < n; ++i) {
        cuckoo::Item it;
        it.beta1 = uint32_t(rng.uniform(b));
        it.beta2 = uint32_t(rng.uniform(b));
        it.data = rng.gen(item);
        table.insert(it);
    }
    auto snap = std::make_shared<pir::Snapshot>(table.snapshot());
    auto keys = crypto::box_keygen(rng);

    auto one_blob = [&] {
        auto q = pir::QueryVector::zero(b);
        rng.fill(q.data.data(), q.data.size());
        if (b % 8) q.data.back() &= uint8_t((1u << (b % 8)) - 1);
        crypto::Seed mask;
        rng.fill(mask.data(), mask.size());
        return crypto::pk_seal(keys.pk, wire::encode_read_share(q, mask), rng);
    };

    for (int i = 0; i < 2; ++i) {
        auto blob = one_blob();
        server::answer_share(*snap, keys, blob, b, rng);
    }
    BenchPoint pt;
    pt.n = n;
    pt.buckets = b;
    pt.table_bytes = snap->data.size();
    pt.iters = iters;
    double total_us = 0;
    for (int i = 0; i < iters; ++i) {
        auto blob = one_blob();
        auto t0 = clock::now();
        auto ans = server::answer_share(*snap, keys, blob, b, rng);
        auto t1 = clock::now();
        if (ans.block.empty()) throw std::runtime_error("bench: empty answer");
        total_us += std::chrono::duration<double, std::micro>(t1 - t0).count();
    }
    pt.mean_us = total_us / iters;
    return pt;
}

}  // namespace oblog::harness
