#include <doctest.h>

#include "oblog/harness.hpp"
#include "oblog/wire.hpp"

using namespace oblog;
using namespace oblog::harness;

namespace {

Config game_config() {
    DetRng rng(4242);
    Config cfg = make_local_config(3, rng);
    cfg.capacity_n = 96;
    cfg.depth_d = 4;
    cfg.message_z = 32;
    cfg.bloom_n_window = 256;
    cfg.window_deltas = 6;
    cfg.giv_rotate_writes = 4;
    cfg.epoch_seal_writes = 8;
    cfg.epoch_seal_interval_ms = 0;
    cfg.epoch_ring = 16;
    cfg.rate_limit = false;
    cfg.get_updates_every = 0;
    return cfg;
}

client::TraceRecord rec(uint64_t slot, wire::Kind kind, uint32_t len, bytes body = {}) {
    client::TraceRecord r;
    r.slot = slot;
    r.kind = uint8_t(kind);
    r.length = len;
    r.payload = std::move(body);
    return r;
}

}  // namespace

TEST_CASE("chat log lines round-trip through the parser") {
    std::string text =
        "2016-03-01T00:00:00.000Z\t#room\talice\thello there\n"
        "2016-03-01T00:00:01.250Z\t#room\tbob\ttabs\tin text stay\n";
    auto msgs = parse_chat_log(text);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].sender == "alice");
    CHECK(msgs[1].text == "tabs\tin text stay");
    CHECK(msgs[1].at_ms - msgs[0].at_ms == 1250);
    CHECK(format_chat_log(msgs) == text);

    auto no_ms = parse_chat_log("2016-03-01T06:30:15Z\t#a\tu\tx\n");
    CHECK(no_ms[0].at_ms % 1000 == 0);
    CHECK(no_ms[0].at_ms - msgs[0].at_ms == (6 * 3600 + 30 * 60 + 15) * 1000);
}

TEST_CASE("parse errors carry line numbers") {
    try {
        parse_chat_log("2016-03-01T00:00:00Z\t#a\tu\tok\nbad line without tabs\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
    try {
        parse_chat_log("not-a-time\t#a\tu\tok\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 1);
    }
}

TEST_CASE("empty input replays to an empty report") {
    auto rep = replay_workload({}, game_config());
    CHECK(rep.messages == 0);
    CHECK(rep.deliveries == 0);
    CHECK(rep.expected_deliveries == 0);
    CHECK(rep.duration_s == 0);
}

TEST_CASE("the synthetic chat generator is deterministic and well formed") {
    ChatGenSpec spec;
    spec.users = 6;
    spec.channels = 2;
    spec.messages = 40;
    spec.interval_ms = 50;
    spec.seed = 9;
    auto a = generate_chat(spec);
    auto b = generate_chat(spec);
    REQUIRE(a.size() == 40);
    CHECK(format_chat_log(a) == format_chat_log(b));
    CHECK(parse_chat_log(format_chat_log(a)).size() == 40);
    for (size_t i = 1; i < a.size(); ++i) CHECK(a[i].at_ms >= a[i - 1].at_ms);

    spec.seed = 10;
    CHECK(format_chat_log(generate_chat(spec)) != format_chat_log(a));
}

TEST_CASE("trace comparison finds the first divergence") {
    std::vector<ClientTrace> t0(1), t1(1);
    t0[0].client = t1[0].client = 0;
    for (uint64_t i = 1; i <= 4; ++i) {
        t0[0].records.push_back(rec(i, wire::Kind::Write, 120));
        t1[0].records.push_back(rec(i, wire::Kind::Write, 120));
    }
    auto same = compare_shape_only(t0, t1);
    CHECK(same.shape_equal);
    CHECK_FALSE(same.get_updates_flagged);
    CHECK_FALSE(same.first_mismatch.has_value());

    t1[0].records.push_back(rec(5, wire::Kind::Write, 120));
    auto extra = compare_shape_only(t0, t1);
    CHECK_FALSE(extra.shape_equal);
    REQUIRE(extra.first_mismatch.has_value());
    CHECK(extra.first_mismatch->client == 0);
    CHECK(extra.first_mismatch->index == 4);

    t1[0].records.pop_back();
    t1[0].records[2].length = 121;
    auto diff = compare_shape_only(t0, t1);
    CHECK_FALSE(diff.shape_equal);
    REQUIRE(diff.first_mismatch.has_value());
    CHECK(diff.first_mismatch->index == 2);
}

TEST_CASE("update fetches are flagged separately, not judged") {
    std::vector<ClientTrace> t0(1), t1(1);
    for (uint64_t i = 1; i <= 3; ++i) {
        t0[0].records.push_back(rec(i, wire::Kind::Read, 300));
        t1[0].records.push_back(rec(i, wire::Kind::Read, 300));
    }
    t0[0].records.push_back(rec(2, wire::Kind::GetUpdates, 30));
    auto v = compare_shape_only(t0, t1);
    CHECK(v.shape_equal);
    CHECK(v.get_updates_flagged);
}

TEST_CASE("field statistics pass random payloads and reject structured ones") {
    Config cfg = game_config();
    DetRng rng(5);
    size_t item = cfg.item_size();

    auto mk = [&](bool random) {
        std::vector<ClientTrace> ts(1);
        for (uint64_t i = 1; i <= 40; ++i) {
            bytes body(8 + item + wire::INTEREST_FIELD_LEN, 0);
            if (random) rng.fill(body.data() + 8, item);
            ts[0].records.push_back(
                rec(i, wire::Kind::Write, uint32_t(22 + body.size()), body));
        }
        return ts;
    };
    auto good = field_stats(cfg, mk(true));
    CHECK(good.bytes == 40 * item);
    CHECK(good.monobit_p > 0.01);
    CHECK(good.chi2_byte_p > 0.01);

    auto bad = field_stats(cfg, mk(false));
    CHECK(bad.monobit_p < 1e-9);
    CHECK(bad.chi2_byte_p < 1e-9);
}

TEST_CASE("game scripts survive the json codec") {
    GameScript s = make_real_vs_fake_script(3);
    auto text = script_to_json(s);
    GameScript back = script_from_json(text);
    CHECK(back.m == s.m);
    REQUIRE(back.rounds.size() == s.rounds.size());
    CHECK(script_to_json(back) == text);
    CHECK_THROWS(script_from_json("{\"m\":1,\"rounds\":[{\"bogus\":{}}]}"));
}

TEST_CASE("branch runs of a real-vs-fake script stay shape-identical") {
    Config cfg = game_config();
    GameScript script = make_real_vs_fake_script(12);
    auto r0 = run_game(script, 0, cfg, 77);
    auto r1 = run_game(script, 1, cfg, 77);
    REQUIRE(r0.traces.size() == 2);
    CHECK(r0.logs_created == 1);

    auto v = compare_traces(cfg, r0.traces, r1.traces);
    CHECK(v.shape_equal);
    CHECK_FALSE(v.get_updates_flagged);
    CHECK(v.stats0.monobit_p > 0.01);
    CHECK(v.stats1.monobit_p > 0.01);
    CHECK(v.stats0.chi2_byte_p > 0.01);
    CHECK(v.stats1.chi2_byte_p > 0.01);
}

TEST_CASE("identical branches replay to identical bytes") {
    Config cfg = game_config();
    GameScript script = make_real_vs_fake_script(8);
    for (auto& r : script.rounds)
        for (auto& pair : r.ops) pair[1] = pair[0];

    auto r0 = run_game(script, 0, cfg, 31);
    auto r1 = run_game(script, 1, cfg, 31);
    CHECK(traces_to_json(r0.traces) == traces_to_json(r1.traces));

    auto again = run_game(script, 0, cfg, 31);
    CHECK(traces_to_json(again.traces) == traces_to_json(r0.traces));
}

TEST_CASE("log creation naming unknown clients is refused") {
    Config cfg = game_config();
    GameScript s;
    s.m = 2;
    GameRound create;
    create.kind = GameRound::Kind::CreateLog;
    create.writer = 5;
    create.readers = {1};
    s.rounds.push_back(create);
    auto res = run_game(s, 0, cfg, 3);
    CHECK(res.creates_refused == 1);
    CHECK(res.logs_created == 0);
}

TEST_CASE("traces round-trip through json") {
    Config cfg = game_config();
    GameScript script = make_real_vs_fake_script(2);
    auto r0 = run_game(script, 0, cfg, 12);
    auto text = traces_to_json(r0.traces);
    auto back = traces_from_json(text);
    CHECK(traces_to_json(back) == text);
    auto v = compare_traces(cfg, r0.traces, back);
    CHECK(v.shape_equal);
}

TEST_CASE("a small chat replay delivers everything with sane accounting") {
    Config cfg = game_config();
    cfg.write_interval_ms = 60;
    cfg.read_interval_ms = 60;
    cfg.get_updates_every = 2;
    cfg.epoch_seal_interval_ms = 20;
    cfg.epoch_seal_writes = 8;

    ChatGenSpec spec;
    spec.users = 3;
    spec.channels = 1;
    spec.messages = 18;
    spec.interval_ms = 120;
    spec.seed = 21;
    auto msgs = generate_chat(spec);

    auto rep = replay_workload(msgs, cfg, 5, 10000);
    CHECK(rep.messages == 18);
    CHECK(rep.chunks >= 18);
    CHECK(rep.expected_deliveries == rep.chunks * 2);
    CHECK(rep.all_delivered());
    CHECK(rep.latency_mean_ms > 0);
    CHECK(rep.latency_p95_ms >= rep.latency_p50_ms);
    CHECK(rep.server_reads_per_sec > 0);
    CHECK(rep.bytes_per_client_day_measured > 0);
    CHECK(rep.closed_form_gap < 0.10);

    auto js = rep.to_json();
    CHECK(js.find("\"deliveries\"") != std::string::npos);
    CHECK(rep.to_table().find("latency") != std::string::npos);
}

TEST_CASE("read cost scales with the table") {
    auto small = bench_process_read(400, 4, 32, 3);
    CHECK(small.n == 400);
    CHECK(small.buckets == 106);
    CHECK(small.mean_us > 0);
    CHECK(small.table_bytes == uint64_t(small.buckets) * 4 * (32 + 48));
}
