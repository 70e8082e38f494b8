#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "oblog/config.hpp"
#include "oblog/harness.hpp"
#include "oblog/node.hpp"
#include "oblog/rng.hpp"

using namespace oblog;

namespace {

std::string slurp(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text;
}

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

bool tcp_probe(const std::string& host, uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
        return false;
    bool ok = false;
    for (auto* p = res; p && !ok; p = p->ai_next) {
        int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) continue;
        ok = ::connect(fd, p->ai_addr, socklen_t(p->ai_addrlen)) == 0;
        ::close(fd);
    }
    freeaddrinfo(res);
    return ok;
}

int cmd_server(const std::string& config_path, const std::string& role, uint32_t index) {
    Config cfg = load_config(config_path);
    if (index >= cfg.server_count())
        throw std::runtime_error("index " + std::to_string(index) + " out of range for " +
                                 std::to_string(cfg.server_count()) + " servers");
    bool leader = role == "leader";
    if (leader != (index == 0))
        throw std::runtime_error("the leader is index 0, followers are 1..l-1");

    server::ServerNode node(cfg, index);
    node.start();
    std::cerr << "server " << index << " (" << role << ") listening on "
              << cfg.servers[index].host << ":" << node.port() << "\n";

    if (leader) {
        for (uint32_t i = 1; i < cfg.server_count() && !g_stop.load(); ++i) {
            while (!g_stop.load() && !tcp_probe(cfg.servers[i].host, cfg.servers[i].port))
                std::this_thread::sleep_for(std::chrono::milliseconds(200));
        }
        if (!g_stop.load()) {
            node.connect_links();
            while (!g_stop.load() && !node.updates_ready())
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            std::cerr << "cluster ready\n";
        }
    }
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    node.stop();
    return 0;
}

int cmd_replay(const std::string& config_path, const std::string& log_path,
               int64_t read_interval_ms, uint64_t seed, int grace_ms,
               const std::string& out) {
    Config cfg = load_config(config_path);
    if (read_interval_ms > 0) cfg.read_interval_ms = uint32_t(read_interval_ms);
    auto msgs = harness::parse_chat_log(slurp(log_path));
    auto rep = harness::replay_workload(msgs, cfg, seed, grace_ms);
    std::cout << rep.to_table();
    spit(out.empty() ? "-" : out, rep.to_json() + "\n");
    return rep.all_delivered() ? 0 : 1;
}

int cmd_game(const std::string& config_path, const std::string& script_path, int bit,
             uint64_t seed, const std::string& out) {
    Config cfg = load_config(config_path);
    auto script = harness::script_from_json(slurp(script_path));
    auto res = harness::run_game(script, bit, cfg, seed);
    std::cerr << "clients " << res.traces.size() << ", logs created " << res.logs_created
              << ", creates refused " << res.creates_refused << "\n";
    spit(out, harness::traces_to_json(res.traces));
    return 0;
}

int cmd_compare(const std::string& t0_path, const std::string& t1_path,
                const std::string& config_path) {
    auto t0 = harness::traces_from_json(slurp(t0_path));
    auto t1 = harness::traces_from_json(slurp(t1_path));
    harness::Verdict v;
    if (config_path.empty()) {
        v = harness::compare_shape_only(t0, t1);
    } else {
        v = harness::compare_traces(load_config(config_path), t0, t1);
    }
    std::cout << harness::verdict_to_json(v) << "\n";
    if (v.shape_equal) {
        std::cerr << "shape equal"
                  << (v.get_updates_flagged ? " (update fetch schedules differ)" : "")
                  << "\n";
        return 0;
    }
    if (v.first_mismatch) {
        std::cerr << "mismatch at client " << v.first_mismatch->client << " record "
                  << v.first_mismatch->index << ": " << v.first_mismatch->what << "\n";
    }
    return 1;
}

int cmd_bench(const std::vector<uint64_t>& ns, uint32_t d, uint32_t z, int iters) {
    std::printf("%12s %10s %14s %8s %12s\n", "n", "buckets", "table bytes", "iters",
                "mean us");
    std::string js = "[";
    for (size_t i = 0; i < ns.size(); ++i) {
        auto pt = harness::bench_process_read(ns[i], d, z, iters);
        std::printf("%12llu %10u %14llu %8d %12.1f\n", (unsigned long long)pt.n,
                    pt.buckets, (unsigned long long)pt.table_bytes, pt.iters, pt.mean_us);
        js += (i ? "," : "");
        js += "{\"n\":" + std::to_string(pt.n) + ",\"buckets\":" + std::to_string(pt.buckets) +
              ",\"table_bytes\":" + std::to_string(pt.table_bytes) +
              ",\"mean_us\":" + std::to_string(pt.mean_us) + "}";
    }
    js += "]";
    std::cout << js << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    struct sigaction sa {};
    sa.sa_handler = on_signal;
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);

    CLI::App app{"private group messaging cluster tools"};
    app.require_subcommand(1);

    auto* sv = app.add_subcommand("server", "run one replica");
    std::string sv_config, sv_role = "leader";
    uint32_t sv_index = 0;
    sv->add_option("--config", sv_config, "deployment config file")->required();
    sv->add_option("--role", sv_role, "leader or follower")
        ->check(CLI::IsMember({"leader", "follower"}));
    sv->add_option("--index", sv_index, "replica index (leader is 0)");

    auto* rp = app.add_subcommand("replay", "replay a chat log through a fresh cluster");
    std::string rp_config, rp_log, rp_out;
    int64_t rp_interval = 0;
    uint64_t rp_seed = 1;
    int rp_grace = 20000;
    rp->add_option("--config", rp_config, "deployment config file")->required();
    rp->add_option("--log", rp_log, "chat log file (timestamp TAB channel TAB sender TAB text)")
        ->required();
    rp->add_option("--read-interval", rp_interval, "override read interval (ms)");
    rp->add_option("--seed", rp_seed, "client randomness seed");
    rp->add_option("--grace", rp_grace, "delivery drain grace after the last message (ms)");
    rp->add_option("--out", rp_out, "write the json report here instead of stdout");

    auto* gm = app.add_subcommand("game", "run one branch of a scripted indistinguishability game");
    std::string gm_config, gm_script, gm_out = "-";
    int gm_bit = 0;
    uint64_t gm_seed = 1;
    gm->add_option("--config", gm_config, "deployment config file")->required();
    gm->add_option("--script", gm_script, "game script json")->required();
    gm->add_option("--bit", gm_bit, "challenge bit")->check(CLI::Range(0, 1))->required();
    gm->add_option("--seed", gm_seed, "client randomness seed");
    gm->add_option("--out", gm_out, "traces json destination");

    auto* cp = app.add_subcommand("compare", "compare two captured trace sets");
    std::string cp_t0, cp_t1, cp_config;
    cp->add_option("t0", cp_t0, "traces json for branch 0")->required();
    cp->add_option("t1", cp_t1, "traces json for branch 1")->required();
    cp->add_option("--config", cp_config, "config for payload statistics");

    auto* bp = app.add_subcommand("bench-pir", "time the server read path");
    std::vector<uint64_t> bp_n{10000, 100000};
    uint32_t bp_d = 4, bp_z = 1024;
    int bp_iters = 20;
    bp->add_option("--n", bp_n, "table sizes to fill");
    bp->add_option("--d", bp_d, "bucket depth");
    bp->add_option("--z", bp_z, "message size");
    bp->add_option("--iters", bp_iters, "timed reads per size");

    auto* gc = app.add_subcommand("gen-chat", "emit a synthetic chat log");
    harness::ChatGenSpec gc_spec;
    std::string gc_out = "-";
    gc->add_option("--users", gc_spec.users);
    gc->add_option("--channels", gc_spec.channels);
    gc->add_option("--messages", gc_spec.messages);
    gc->add_option("--interval", gc_spec.interval_ms, "mean gap between messages (ms)");
    gc->add_option("--zipf", gc_spec.zipf_s, "channel popularity skew");
    gc->add_option("--seed", gc_spec.seed);
    gc->add_option("--out", gc_out);

    auto* gs = app.add_subcommand("gen-script", "emit the canned real-vs-cover game script");
    uint32_t gs_rounds = 200;
    std::string gs_out = "-";
    gs->add_option("--rounds", gs_rounds);
    gs->add_option("--out", gs_out);

    auto* gf = app.add_subcommand("gen-config", "emit a localhost deployment config with fresh keys");
    uint32_t gf_servers = 3;
    uint64_t gf_n = 4096;
    uint32_t gf_z = 1024, gf_port = 0;
    std::string gf_out = "-";
    gf->add_option("--servers", gf_servers);
    gf->add_option("--n", gf_n, "messages retained");
    gf->add_option("--z", gf_z, "message size");
    gf->add_option("--base-port", gf_port, "first listener port (0 keeps ephemeral)");
    gf->add_option("--out", gf_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sv->parsed()) return cmd_server(sv_config, sv_role, sv_index);
        if (rp->parsed())
            return cmd_replay(rp_config, rp_log, rp_interval, rp_seed, rp_grace, rp_out);
        if (gm->parsed()) return cmd_game(gm_config, gm_script, gm_bit, gm_seed, gm_out);
        if (cp->parsed()) return cmd_compare(cp_t0, cp_t1, cp_config);
        if (bp->parsed()) return cmd_bench(bp_n, bp_d, bp_z, bp_iters);
        if (gc->parsed()) {
            spit(gc_out, harness::format_chat_log(harness::generate_chat(gc_spec)));
            return 0;
        }
        if (gs->parsed()) {
            spit(gs_out, harness::script_to_json(harness::make_real_vs_fake_script(gs_rounds)));
            return 0;
        }
        if (gf->parsed()) {
            OsRng rng;
            Config cfg = make_local_config(gf_servers, rng);
            cfg.capacity_n = gf_n;
            cfg.message_z = gf_z;
            for (uint32_t i = 0; i < gf_servers; ++i)
                cfg.servers[i].port = gf_port ? uint16_t(gf_port + i) : 0;
            cfg.validate();
            spit(gf_out, config_to_json(cfg) + "\n");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
