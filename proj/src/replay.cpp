#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "oblog/harness.hpp"
#include "oblog/logproto.hpp"
#include "oblog/params.hpp"

namespace oblog::harness {

using nlohmann::json;
using steady = std::chrono::steady_clock;

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

int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    int era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = unsigned(y - era * 400);
    unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return int64_t(era) * 146097 + int64_t(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = unsigned(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    int64_t yy = int64_t(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = int(yy + (m <= 2));
}

std::optional<int64_t> parse_iso8601_ms(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, ms = 0;
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec,
                    &consumed) != 6)
        return std::nullopt;
    size_t at = size_t(consumed);
    if (at < s.size() && s[at] == '.') {
        size_t digits = 0;
        int frac = 0;
        ++at;
        while (at < s.size() && s[at] >= '0' && s[at] <= '9' && digits < 3) {
            frac = frac * 10 + (s[at] - '0');
            ++at;
            ++digits;
        }
        if (digits == 0) return std::nullopt;
        while (digits++ < 3) frac *= 10;
        while (at < s.size() && s[at] >= '0' && s[at] <= '9') ++at;
        ms = frac;
    }
    if (at < s.size() && s[at] == 'Z') ++at;
    if (at != s.size()) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60)
        return std::nullopt;
    int64_t days = days_from_civil(y, unsigned(mo), unsigned(d));
    return ((days * 24 + h) * 60 + mi) * 60000 + int64_t(sec) * 1000 + ms;
}

std::string format_iso8601_ms(int64_t at_ms) {
    int64_t days = at_ms / 86400000;
    int64_t rem = at_ms % 86400000;
    if (rem < 0) {
        rem += 86400000;
        days -= 1;
    }
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    int h = int(rem / 3600000);
    int mi = int(rem / 60000 % 60);
    int sec = int(rem / 1000 % 60);
    int ms = int(rem % 1000);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", y, mo, d, h, mi, sec,
                  ms);
    return buf;
}

}  // namespace

std::vector<ChatMessage> parse_chat_log(const std::string& text) {
    std::vector<ChatMessage> out;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line =
            text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::array<size_t, 3> tabs{};
        size_t found = 0, from = 0;
        for (; found < 3; ++found) {
            size_t t = line.find('\t', from);
            if (t == std::string::npos) break;
            tabs[found] = t;
            from = t + 1;
        }
        if (found != 3) throw ParseError(line_no, "expected 4 tab-separated fields");
        ChatMessage m;
        std::string ts = line.substr(0, tabs[0]);
        m.channel = line.substr(tabs[0] + 1, tabs[1] - tabs[0] - 1);
        m.sender = line.substr(tabs[1] + 1, tabs[2] - tabs[1] - 1);
        m.text = line.substr(tabs[2] + 1);
        auto at = parse_iso8601_ms(ts);
        if (!at) throw ParseError(line_no, "bad timestamp: " + ts);
        if (m.channel.empty()) throw ParseError(line_no, "empty channel");
        if (m.sender.empty()) throw ParseError(line_no, "empty sender");
        m.at_ms = *at;
        out.push_back(std::move(m));
    }
    return out;
}

std::string format_chat_log(const std::vector<ChatMessage>& msgs) {
    std::string out;
    for (const auto& m : msgs) {
        out += format_iso8601_ms(m.at_ms);
        out += '\t';
        out += m.channel;
        out += '\t';
        out += m.sender;
        out += '\t';
        out += m.text;
        out += '\n';
    }
    return out;
}

std::vector<ChatMessage> generate_chat(const ChatGenSpec& spec) {
    if (!spec.users || !spec.channels || spec.users < 2)
        throw std::invalid_argument("chat generation needs at least 2 users and 1 channel");
    DetRng rng(spec.seed);

    std::vector<std::string> users;
    for (uint32_t u = 0; u < spec.users; ++u) users.push_back("user" + std::to_string(u));
    std::vector<std::string> channels;
    for (uint32_t c = 0; c < spec.channels; ++c)
        channels.push_back("#room" + std::to_string(c));

    // Every user sits in two rooms so rooms overlap; one room means one big
    // group.
    std::vector<std::set<uint32_t>> roster(spec.channels);
    if (spec.channels == 1) {
        for (uint32_t u = 0; u < spec.users; ++u) roster[0].insert(u);
    } else {
        for (uint32_t u = 0; u < spec.users; ++u) {
            roster[u % spec.channels].insert(u);
            roster[(u + 1) % spec.channels].insert(u);
        }
        for (uint32_t c = 0; c < spec.channels; ++c) {
            uint32_t fill = c % spec.users;
            while (roster[c].size() < 2) roster[c].insert(fill++ % spec.users);
        }
    }
    std::vector<std::vector<uint32_t>> members(spec.channels);
    for (uint32_t c = 0; c < spec.channels; ++c)
        members[c].assign(roster[c].begin(), roster[c].end());

    std::vector<double> cum(spec.channels);
    double acc = 0;
    for (uint32_t c = 0; c < spec.channels; ++c) {
        acc += 1.0 / std::pow(double(c + 1), spec.zipf_s);
        cum[c] = acc;
    }

    static const char* kWords[] = {"ok",    "right", "see",   "the",  "build", "works",
                                   "later", "ping",  "merge", "test", "fix",   "done",
                                   "sure",  "wait",  "look",  "good"};
    constexpr size_t kWordCount = sizeof(kWords) / sizeof(kWords[0]);

    int64_t base = days_from_civil(2016, 3, 1) * 86400000;
    std::vector<ChatMessage> out;
    for (uint32_t i = 0; i < spec.messages; ++i) {
        double pick = double(rng.uniform(1u << 20)) / double(1u << 20) * acc;
        uint32_t c = 0;
        while (c + 1 < spec.channels && cum[c] < pick) ++c;
        const auto& mem = members[c];
        uint32_t sender = mem[rng.uniform(mem.size())];
        ChatMessage m;
        m.at_ms = base + int64_t(i) * spec.interval_ms;
        m.channel = channels[c];
        m.sender = users[sender];
        m.text = "m" + std::to_string(i);
        uint32_t extra = 2 + uint32_t(rng.uniform(5));
        for (uint32_t w = 0; w < extra; ++w)
            m.text += std::string(" ") + kWords[rng.uniform(kWordCount)];
        out.push_back(std::move(m));
    }
    return out;
}

ReplayReport replay_workload(const std::vector<ChatMessage>& msgs, Config cfg, uint64_t seed,
                             int drain_grace_ms) {
    ReplayReport rep;
    rep.messages = msgs.size();
    if (msgs.empty()) return rep;

    std::vector<ChatMessage> sched = msgs;
    std::stable_sort(sched.begin(), sched.end(),
                     [](const ChatMessage& a, const ChatMessage& b) { return a.at_ms < b.at_ms; });

    std::map<std::string, std::set<std::string>> members;
    std::set<std::string> users;
    for (const auto& m : sched) {
        members[m.channel].insert(m.sender);
        users.insert(m.sender);
    }
    rep.clients = users.size();

    DetRng hrng(mix64(seed, 0x5EED));
    std::map<std::pair<std::string, std::string>, logproto::LogHandle> handles;
    for (const auto& [ch, mem] : members)
        for (const auto& s : mem) handles[{ch, s}] = logproto::gen_handle(hrng);

    cfg.rate_limit = false;
    Cluster cluster(std::move(cfg));
    const Config& live = cluster.cfg();
    if (!cluster.wait_ready(10000)) throw std::runtime_error("replay: cluster not ready");

    std::map<std::string, std::unique_ptr<client::ClientRuntime>> rts;
    {
        uint64_t idx = 0;
        for (const auto& u : users) {
            auto rt = std::make_unique<client::ClientRuntime>(live, mix64(seed, 100 + idx++));
            rt->connect(live.servers[0].host, live.servers[0].port);
            rts[u] = std::move(rt);
        }
    }
    for (const auto& [ch, mem] : members)
        for (const auto& s : mem) {
            const auto& h = handles[{ch, s}];
            rts[s]->core_unlocked().add_writable(h);
            for (const auto& reader : mem)
                if (reader != s) rts[reader]->core_unlocked().subscribe(h);
        }

    struct SlotInfo {
        steady::time_point sent;
    };
    std::mutex dmu;
    std::map<std::pair<LogId, uint64_t>, SlotInfo> slots;
    std::vector<double> latencies;
    size_t delivered = 0, expected_total = 0;

    for (auto& [u, rt] : rts) {
        rt->core_unlocked().on_delivery = [&](const client::Delivery& d) {
            auto now = steady::now();
            std::lock_guard<std::mutex> lk(dmu);
            auto it = slots.find({d.log, d.seq_no});
            if (it == slots.end()) return;
            latencies.push_back(
                std::chrono::duration<double, std::milli>(now - it->second.sent).count());
            ++delivered;
        };
    }

    for (auto& [u, rt] : rts) rt->start();

    // Run cover traffic until every client mirrors a countersigned window, so
    // the measured stretch starts from steady state rather than cold caches.
    auto warm_deadline = steady::now() + std::chrono::milliseconds(15000);
    for (auto& [u, rt] : rts) {
        while (steady::now() < warm_deadline &&
               !rt->with_core([](client::ClientCore& c) { return c.window_synced(); }))
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }

    struct Baseline {
        uint64_t out = 0, in = 0, rticks = 0, wticks = 0, fetches = 0;
    };
    std::map<std::string, Baseline> base_at_feed;
    for (auto& [u, rt] : rts) {
        Baseline b;
        const auto* st = rt->core_unlocked().session_stats();
        b.out = st->bytes_sent.load();
        b.in = st->bytes_received.load();
        std::tie(b.rticks, b.wticks, b.fetches) =
            rt->with_core([](client::ClientCore& c) {
                return std::tuple(c.read_ticks(), c.write_ticks(), c.metrics().get_updates);
            });
        base_at_feed[u] = b;
    }
    uint64_t leader_reads0 = cluster.leader().metrics().reads_answered.load();

    auto t0 = steady::now();
    int64_t first = sched.front().at_ms;

    for (const auto& m : sched) {
        std::this_thread::sleep_until(t0 + std::chrono::milliseconds(m.at_ms - first));
        auto& rt = rts[m.sender];
        const auto& h = handles[{m.channel, m.sender}];
        size_t readers = members[m.channel].size() - 1;
        auto seqs =
            rt->with_core([&](client::ClientCore& c) { return c.publish(h, to_bytes(m.text)); });
        auto now = steady::now();
        std::lock_guard<std::mutex> lk(dmu);
        for (uint64_t s : seqs) {
            slots[{h.id, s}] = SlotInfo{now};
            expected_total += readers;
            rep.chunks += 1;
        }
    }

    auto deadline = steady::now() + std::chrono::milliseconds(drain_grace_ms);
    while (steady::now() < deadline) {
        {
            std::lock_guard<std::mutex> lk(dmu);
            if (delivered == expected_total) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    auto t_end = steady::now();
    rep.duration_s = std::chrono::duration<double>(t_end - t0).count();

    for (auto& [u, rt] : rts) rt->stop();
    for (auto& [u, rt] : rts) {
        rt->core_unlocked().drain(3000);
        rt->core_unlocked().on_delivery = nullptr;
    }

    uint64_t traffic = 0, updates_in = 0, fetches = 0;
    for (auto& [u, rt] : rts) {
        auto& core = rt->core_unlocked();
        const auto* st = core.session_stats();
        const Baseline& b = base_at_feed[u];
        uint64_t d_out = st->bytes_sent.load() - b.out;
        uint64_t d_in = st->bytes_received.load() - b.in;
        traffic += d_out + d_in;

        auto p = params::from_config(live, 0);
        uint64_t fixed_in =
            (core.read_ticks() - b.rticks) * params::read_response_wire_bytes(p) +
            (core.write_ticks() - b.wticks) * params::write_ack_wire_bytes();
        if (d_in > fixed_in) updates_in += d_in - fixed_in;
        fetches += core.metrics().get_updates - b.fetches;
    }

    std::lock_guard<std::mutex> lk(dmu);
    rep.deliveries = delivered;
    rep.expected_deliveries = expected_total;
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        double sum = 0;
        for (double v : latencies) sum += v;
        rep.latency_mean_ms = sum / double(latencies.size());
        rep.latency_p50_ms = latencies[latencies.size() / 2];
        rep.latency_p95_ms = latencies[size_t(double(latencies.size() - 1) * 0.95)];
        rep.latency_max_ms = latencies.back();
    }
    if (rep.duration_s > 0 && !rts.empty()) {
        rep.bytes_per_client_day_measured =
            double(traffic) / double(rts.size()) / rep.duration_s * 86400.0;
        double mean_updates = fetches ? double(updates_in) / double(fetches) : 0.0;
        auto p = params::from_config(live, users.size());
        rep.bytes_per_client_day_closed_form =
            params::daily_client_bytes(p, live.get_updates_every, mean_updates);
        if (rep.bytes_per_client_day_closed_form > 0)
            rep.closed_form_gap = std::abs(rep.bytes_per_client_day_measured -
                                           rep.bytes_per_client_day_closed_form) /
                                  rep.bytes_per_client_day_closed_form;
        rep.server_reads_per_sec =
            double(cluster.leader().metrics().reads_answered.load() - leader_reads0) /
            rep.duration_s;
    }
    return rep;
}

std::string ReplayReport::to_json() const {
    json j;
    j["messages"] = messages;
    j["chunks"] = chunks;
    j["expected_deliveries"] = expected_deliveries;
    j["deliveries"] = deliveries;
    j["clients"] = clients;
    j["duration_s"] = duration_s;
    j["latency_ms"] = {{"mean", latency_mean_ms},
                       {"p50", latency_p50_ms},
                       {"p95", latency_p95_ms},
                       {"max", latency_max_ms}};
    j["bytes_per_client_day_measured"] = bytes_per_client_day_measured;
    j["bytes_per_client_day_closed_form"] = bytes_per_client_day_closed_form;
    j["closed_form_gap"] = closed_form_gap;
    j["server_reads_per_sec"] = server_reads_per_sec;
    return j.dump(2);
}

std::string ReplayReport::to_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << "messages                 " << messages << " (" << chunks << " chunks)\n";
    os << "deliveries               " << deliveries << "/" << expected_deliveries << "\n";
    os << "clients                  " << clients << "\n";
    os << "duration                 " << duration_s << " s\n";
    os << "latency mean/p50/p95     " << latency_mean_ms << " / " << latency_p50_ms << " / "
       << latency_p95_ms << " ms\n";
    os.precision(0);
    os << "bytes/client-day         " << bytes_per_client_day_measured << " (closed form "
       << bytes_per_client_day_closed_form << ")\n";
    os.precision(1);
    os << "server reads/sec         " << server_reads_per_sec << "\n";
    return os.str();
}

}  // namespace oblog::harness
