#include <doctest.h>

#include <sodium.h>

#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <thread>

#include "oblog/config.hpp"
#include "oblog/session.hpp"
#include "oblog/wire.hpp"

using namespace oblog;

TEST_CASE("frame header layout") {
    wire::Frame f{wire::Kind::Write, from_hex("deadbeef")};
    bytes enc = wire::encode_frame(f);
    REQUIRE(enc.size() == 9);
    CHECK(enc[0] == 0);
    CHECK(enc[3] == 4);
    CHECK(enc[4] == 0x01);
    CHECK(enc[5] == 0xde);
}

TEST_CASE("frame reader reassembles byte by byte") {
    wire::Frame a{wire::Kind::Read, bytes(300, 0x11)};
    wire::Frame b{wire::Kind::Error, {}};
    bytes stream = wire::encode_frame(a);
    bytes enc_b = wire::encode_frame(b);
    stream.insert(stream.end(), enc_b.begin(), enc_b.end());

    wire::FrameReader r;
    std::vector<wire::Frame> got;
    for (uint8_t byte : stream) {
        r.feed(byte_view(&byte, 1));
        while (auto f = r.next()) got.push_back(*f);
    }
    REQUIRE(got.size() == 2);
    CHECK(got[0].kind == wire::Kind::Read);
    CHECK(got[0].payload == a.payload);
    CHECK(got[1].kind == wire::Kind::Error);
    CHECK(got[1].payload.empty());
    CHECK_FALSE(r.poisoned());
}

TEST_CASE("frame reader poisons on unknown kind and oversize") {
    {
        wire::FrameReader r;
        bytes bad = {0, 0, 0, 0, 0x55};
        r.feed(bad);
        CHECK_FALSE(r.next().has_value());
        CHECK(r.poisoned());
    }
    {
        wire::FrameReader r;
        bytes bad = {0xff, 0xff, 0xff, 0xff, 0x01};
        r.feed(bad);
        CHECK_FALSE(r.next().has_value());
        CHECK(r.poisoned());
    }
}

TEST_CASE("write body codec") {
    DetRng rng(41);
    notify::BloomParams bp{4096, 3};
    size_t item_len = logproto::item_data_len(64);
    auto w = logproto::fake_write(500, 64, bp, rng);

    bytes enc = wire::encode_write(w, item_len);
    CHECK(enc.size() == wire::write_body_len(item_len));

    auto dec = wire::decode_write(enc, item_len);
    REQUIRE(dec.has_value());
    CHECK(dec->beta1 == w.beta1);
    CHECK(dec->beta2 == w.beta2);
    CHECK(dec->data == w.data);
    std::vector<uint32_t> want = w.interest;
    std::sort(want.begin(), want.end());
    want.erase(std::unique(want.begin(), want.end()), want.end());
    CHECK(dec->interest == want);

    enc.pop_back();
    CHECK_FALSE(wire::decode_write(enc, item_len).has_value());
}

TEST_CASE("read share codec enforces trailing bits") {
    DetRng rng(42);
    uint32_t buckets = 21;
    auto qs = pir::gen_queries(7, buckets, 3, rng);
    crypto::Seed seed{};
    rng.fill(seed.data(), seed.size());

    bytes enc = wire::encode_read_share(qs[0], seed);
    REQUIRE(enc.size() == wire::read_share_plain_len(buckets));
    auto dec = wire::decode_read_share(enc, buckets);
    REQUIRE(dec.has_value());
    CHECK(dec->first.data == qs[0].data);
    CHECK(dec->second == seed);

    bytes dirty = enc;
    dirty[wire::qv_len(buckets) - 1] |= 0x80;
    CHECK_FALSE(wire::decode_read_share(dirty, buckets).has_value());
}

TEST_CASE("read request codec") {
    DetRng rng(43);
    uint32_t buckets = 128, servers = 3;
    wire::ReadRequest r;
    r.epoch = 99;
    for (uint32_t i = 0; i < servers; ++i) r.blobs.push_back(rng.gen(wire::read_blob_len(buckets)));

    bytes enc = wire::encode_read(r);
    CHECK(enc.size() == wire::read_body_len(servers, buckets));
    auto dec = wire::decode_read(enc, servers, buckets);
    REQUIRE(dec.has_value());
    CHECK(dec->epoch == 99);
    CHECK(dec->blobs == r.blobs);

    CHECK_FALSE(wire::decode_read(enc, servers + 1, buckets).has_value());
}

TEST_CASE("reply codecs roundtrip") {
    {
        wire::WriteAck a{7, wire::Status::RateLimited, 123};
        auto d = wire::decode_write_ack(wire::encode_write_ack(a));
        REQUIRE(d);
        CHECK(d->corr == 7);
        CHECK(d->status == wire::Status::RateLimited);
        CHECK(d->epoch == 123);
    }
    {
        wire::ReadReply r{9, wire::Status::Ok, 5, bytes(256, 0xab)};
        bytes enc = wire::encode_read_reply(r);
        auto d = wire::decode_read_reply(enc, 256);
        REQUIRE(d);
        CHECK(d->block == r.block);
        CHECK_FALSE(wire::decode_read_reply(enc, 255).has_value());
    }
    {
        wire::UpdatesReply u;
        u.corr = 3;
        u.window_base = 10;
        u.first_delta = 12;
        u.deltas = {from_hex("0102"), from_hex("03")};
        u.sigs.resize(2);
        u.sigs[0].fill(0x41);
        u.sigs[1].fill(0x42);
        bytes enc = wire::encode_updates_reply(u);
        auto d = wire::decode_updates_reply(enc);
        REQUIRE(d);
        CHECK(d->window_base == 10);
        CHECK(d->first_delta == 12);
        CHECK(d->deltas == u.deltas);
        CHECK(d->sigs[1] == u.sigs[1]);
        enc.push_back(0);
        CHECK_FALSE(wire::decode_updates_reply(enc).has_value());
    }
    {
        DetRng rng(44);
        notify::BloomParams bp{1024, 2};
        size_t item_len = logproto::item_data_len(32);
        wire::SequencedWrite s;
        s.seq = 77;
        s.seal_after = true;
        s.write = logproto::fake_write(64, 32, bp, rng);
        bytes enc = wire::encode_sequenced_write(s, item_len);
        auto d = wire::decode_sequenced_write(enc, item_len);
        REQUIRE(d);
        CHECK(d->seq == 77);
        CHECK(d->seal_after);
        CHECK(d->write.data == s.write.data);
    }
    {
        wire::MaskedAnswer m{5, wire::Status::Ok, bytes(64, 0x7e)};
        auto d = wire::decode_masked_answer(wire::encode_masked_answer(m), 64);
        REQUIRE(d);
        CHECK(d->block == m.block);
    }
    {
        wire::WindowSig w;
        w.window_base = 4;
        w.newest_delta = 9;
        w.sig.fill(0x33);
        auto d = wire::decode_window_sig(wire::encode_window_sig(w));
        REQUIRE(d);
        CHECK(d->newest_delta == 9);
        CHECK(d->sig == w.sig);
    }
    {
        wire::ErrorBody e{11, wire::Status::Internal, "boom"};
        auto d = wire::decode_error(wire::encode_error(e));
        REQUIRE(d);
        CHECK(d->corr == 11);
        CHECK(d->message == "boom");
    }
}

TEST_CASE("decoders are total on random input") {
    DetRng rng(4242);
    for (int i = 0; i < 2000; ++i) {
        bytes buf = rng.gen(rng.uniform(200));
        wire::decode_write(buf, 96);
        wire::decode_read(buf, 3, 64);
        wire::decode_read_share(buf, 64);
        wire::decode_get_updates(buf);
        wire::decode_write_ack(buf);
        wire::decode_read_reply(buf, 64);
        wire::decode_updates_reply(buf);
        wire::decode_sequenced_write(buf, 96);
        wire::decode_masked_answer(buf, 64);
        wire::decode_window_sig(buf);
        wire::decode_hello(buf);
        wire::decode_hello_ack(buf);
        wire::decode_error(buf);
    }
    CHECK(true);
}

namespace {

struct TestNet {
    Config cfg;
    bytes digest;
    net::Listener listener;

    TestNet() {
        DetRng rng(7777);
        cfg = make_local_config(3, rng);
        digest = cfg.digest();
        listener = net::Listener("127.0.0.1", 0);
    }

    crypto::BoxKeyPair server_keys(size_t i) const {
        return crypto::BoxKeyPair{cfg.servers[i].box_pk, *cfg.servers[i].box_sk};
    }

    wire::Hello hello(uint8_t index, uint64_t epoch) const {
        wire::Hello h;
        h.config_digest = digest;
        h.server_index = index;
        h.latest_epoch = epoch;
        return h;
    }
};

}  // namespace

TEST_CASE("session handshake and echo") {
    TestNet tn;
    net::Session::AcceptResult srv;
    std::thread t([&] {
        int fd = tn.listener.accept(5000);
        REQUIRE(fd >= 0);
        srv = net::Session::accept(fd, tn.server_keys(0), tn.hello(0, 42), tn.digest,
                                   tn.cfg.servers[0].sign_pk, 5000);
    });

    DetRng rng(1);
    auto cr = net::Session::connect("127.0.0.1", tn.listener.port(), tn.cfg.servers[0].box_pk,
                                    tn.digest, wire::Role::Client, nullptr, rng, 5000);
    t.join();
    REQUIRE(srv.session);
    CHECK(srv.role == wire::Role::Client);
    CHECK(cr.hello.server_index == 0);
    CHECK(cr.hello.latest_epoch == 42);
    CHECK(cr.session->fingerprint() == srv.session->fingerprint());

    wire::Frame ping{wire::Kind::GetUpdates, wire::encode_get_updates(17)};
    cr.session->send(ping);
    auto got = srv.session->recv(2000);
    REQUIRE(got);
    CHECK(got->kind == wire::Kind::GetUpdates);
    CHECK(wire::decode_get_updates(got->payload) == 17);

    for (uint64_t k = 0; k < 5; ++k)
        srv.session->send(wire::Frame{wire::Kind::WriteAck,
                                      wire::encode_write_ack({uint32_t(k), wire::Status::Ok, k})});
    for (uint64_t k = 0; k < 5; ++k) {
        auto f = cr.session->recv(2000);
        REQUIRE(f);
        auto a = wire::decode_write_ack(f->payload);
        REQUIRE(a);
        CHECK(a->corr == k);
    }
    CHECK(cr.session->stats().frames_sent.load() >= 2);
    CHECK(cr.session->stats().bytes_received.load() > 0);

    srv.session->close();
    CHECK_THROWS_AS(cr.session->recv(2000), net::SessionClosed);
}

TEST_CASE("handshake fails against the wrong server key") {
    TestNet tn;
    std::thread t([&] {
        int fd = tn.listener.accept(5000);
        if (fd < 0) return;
        try {
            net::Session::accept(fd, tn.server_keys(0), tn.hello(0, 0), tn.digest,
                                 tn.cfg.servers[0].sign_pk, 2000);
        } catch (const net::SessionError&) {
        }
    });
    DetRng rng(2);
    CHECK_THROWS_AS(net::Session::connect("127.0.0.1", tn.listener.port(),
                                          tn.cfg.servers[1].box_pk, tn.digest, wire::Role::Client,
                                          nullptr, rng, 2000),
                    net::SessionError);
    t.join();
}

TEST_CASE("handshake fails on config digest mismatch") {
    TestNet tn;
    std::thread t([&] {
        int fd = tn.listener.accept(5000);
        if (fd < 0) return;
        try {
            net::Session::accept(fd, tn.server_keys(0), tn.hello(0, 0), tn.digest,
                                 tn.cfg.servers[0].sign_pk, 2000);
        } catch (const net::SessionError&) {
        }
    });
    DetRng rng(3);
    bytes other = tn.digest;
    other[0] ^= 1;
    CHECK_THROWS_AS(net::Session::connect("127.0.0.1", tn.listener.port(),
                                          tn.cfg.servers[0].box_pk, other, wire::Role::Client,
                                          nullptr, rng, 2000),
                    net::HandshakeError);
    t.join();
}

TEST_CASE("leader links are authenticated") {
    TestNet tn;

    SUBCASE("correct leader key is accepted") {
        net::Session::AcceptResult srv;
        std::thread t([&] {
            int fd = tn.listener.accept(5000);
            REQUIRE(fd >= 0);
            srv = net::Session::accept(fd, tn.server_keys(1), tn.hello(1, 0), tn.digest,
                                       tn.cfg.servers[0].sign_pk, 5000);
        });
        DetRng rng(4);
        auto cr = net::Session::connect("127.0.0.1", tn.listener.port(), tn.cfg.servers[1].box_pk,
                                        tn.digest, wire::Role::Leader,
                                        &*tn.cfg.servers[0].sign_sk, rng, 5000);
        t.join();
        REQUIRE(srv.session);
        CHECK(srv.role == wire::Role::Leader);
    }

    SUBCASE("a client key cannot claim the leader role") {
        bool rejected = false;
        std::thread t([&] {
            int fd = tn.listener.accept(5000);
            REQUIRE(fd >= 0);
            try {
                net::Session::accept(fd, tn.server_keys(1), tn.hello(1, 0), tn.digest,
                                     tn.cfg.servers[0].sign_pk, 2000);
            } catch (const net::HandshakeError&) {
                rejected = true;
            }
        });
        DetRng rng(5);
        crypto::Seed rogue_seed{};
        rng.fill(rogue_seed.data(), rogue_seed.size());
        auto rogue = crypto::sign_keygen_from_seed(rogue_seed);
        try {
            auto cr = net::Session::connect("127.0.0.1", tn.listener.port(),
                                            tn.cfg.servers[1].box_pk, tn.digest,
                                            wire::Role::Leader, &rogue.sk, rng, 2000);
            cr.session->recv(2000);
        } catch (const net::SessionError&) {
        }
        t.join();
        CHECK(rejected);
    }
}

TEST_CASE("tampered ciphertext tears the session down") {
    TestNet tn;
    DetRng rng(6);

    std::thread srv([&] {
        int fd = tn.listener.accept(5000);
        REQUIRE(fd >= 0);

        auto read_n = [&](uint8_t* out, size_t n) {
            size_t got = 0;
            while (got < n) {
                ssize_t r = ::recv(fd, out + got, n - got, 0);
                REQUIRE(r > 0);
                got += size_t(r);
            }
        };
        auto nonce_for = [](uint64_t c) {
            crypto::Nonce n{};
            for (int i = 0; i < 8; ++i) n[size_t(i)] = uint8_t(c >> (8 * i));
            return n;
        };
        auto send_all = [&](const bytes& b) {
            REQUIRE(::send(fd, b.data(), b.size(), MSG_NOSIGNAL) == ssize_t(b.size()));
        };

        uint8_t intro[36];
        read_n(intro, sizeof(intro));
        crypto::PublicKey eph;
        std::memcpy(eph.data(), intro + 4, 32);
        crypto::SymKey rx, tx;
        auto kp = tn.server_keys(0);
        REQUIRE(crypto_kx_server_session_keys(rx.data(), tx.data(), kp.pk.data(), kp.sk.data(),
                                              eph.data()) == 0);

        bytes plain{uint8_t(wire::Kind::Hello)};
        bytes hp = wire::encode_hello(tn.hello(0, 0));
        plain.insert(plain.end(), hp.begin(), hp.end());
        send_all(wire::encode_frame({wire::Kind::Hello, crypto::seal(tx, nonce_for(0), plain)}));

        uint8_t hdr[5];
        read_n(hdr, 5);
        bytes ack_body(load_u32be(hdr));
        read_n(ack_body.data(), ack_body.size());

        bytes plain2{uint8_t(wire::Kind::WriteAck)};
        bytes ap = wire::encode_write_ack({1, wire::Status::Ok, 0});
        plain2.insert(plain2.end(), ap.begin(), ap.end());
        bytes ct = crypto::seal(tx, nonce_for(1), plain2);
        ct[5] ^= 0x01;
        send_all(wire::encode_frame({wire::Kind::WriteAck, ct}));
        ::close(fd);
    });

    auto cr = net::Session::connect("127.0.0.1", tn.listener.port(), tn.cfg.servers[0].box_pk,
                                    tn.digest, wire::Role::Client, nullptr, rng, 5000);
    CHECK_THROWS_AS(cr.session->recv(3000), net::SessionError);
    srv.join();
}

TEST_CASE("config json roundtrip and digest stability") {
    DetRng rng(99);
    Config c = make_local_config(3, rng);
    c.capacity_n = 4096;
    c.message_z = 256;
    c.giv_rotate_writes = 8;

    std::string text = config_to_json(c);
    Config back = config_from_json(text);
    CHECK(back.capacity_n == 4096);
    CHECK(back.buckets() == c.buckets());
    CHECK(back.servers.size() == 3);
    CHECK(back.servers[1].box_pk == c.servers[1].box_pk);
    REQUIRE(back.servers[2].sign_sk.has_value());
    CHECK(back.digest() == c.digest());

    Config other = back;
    other.s_cuckoo[0] ^= 1;
    CHECK(other.digest() != back.digest());

    Config port_shift = back;
    port_shift.servers[0].port = 9999;
    CHECK(port_shift.digest() == back.digest());
}

TEST_CASE("config validation rejects bad shapes") {
    DetRng rng(100);
    Config c = make_local_config(2, rng);
    c.capacity_n = 100;
    c.depth_d = 4;
    c.buckets_b = 10;
    CHECK_THROWS(c.validate());

    Config d = make_local_config(1, rng);
    CHECK_THROWS(d.validate());
}
