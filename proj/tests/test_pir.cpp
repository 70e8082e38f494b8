#include <doctest.h>

#include <cmath>
#include <vector>

#include "oblog/pir.hpp"
#include "oblog/rng.hpp"
#include "oblog/stats.hpp"

using namespace oblog;
using namespace oblog::pir;

// Independent oracle: byte-at-a-time accumulation straight off the math.
static bytes oracle_answer(const Snapshot& snap, const QueryVector& q) {
    bytes acc(snap.bucket_size, 0);
    for (uint32_t j = 0; j < snap.bucket_count; ++j) {
        if (!q.get(j)) continue;
        byte_view b = snap.bucket(j);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] = uint8_t(acc[i] ^ b[i]);
    }
    return acc;
}

static Snapshot random_snapshot(uint32_t buckets, uint32_t bucket_size, Rng& rng) {
    Snapshot s;
    s.epoch = 1;
    s.bucket_count = buckets;
    s.bucket_size = bucket_size;
    s.data = rng.gen(size_t(buckets) * bucket_size);
    return s;
}

TEST_CASE("query bit layout: bit j lives at byte j/8, bit j%8") {
    QueryVector q = QueryVector::zero(16);
    q.set(0);
    q.set(9);
    CHECK(q.data.size() == 2);
    CHECK(q.data[0] == 0x01);
    CHECK(q.data[1] == 0x02);
    CHECK(q.get(0));
    CHECK(q.get(9));
    CHECK(!q.get(8));
}

TEST_CASE("gen_queries XOR to the unit vector") {
    DetRng rng(5);
    for (uint32_t b : {3u, 8u, 64u, 129u}) {
        for (uint32_t l : {2u, 3u, 5u}) {
            uint32_t beta = b / 2;
            auto qs = gen_queries(beta, b, l, rng);
            REQUIRE(qs.size() == l);
            QueryVector acc = QueryVector::zero(b);
            for (const auto& q : qs) {
                REQUIRE(q.bit_count == b);
                REQUIRE(q.data.size() == (b + 7) / 8);
                xor_into(acc.data.data(), q.data.data(), acc.data.size());
            }
            for (uint32_t j = 0; j < b; ++j) CHECK(acc.get(j) == (j == beta));
        }
    }
}

TEST_CASE("gen_queries validates arguments") {
    DetRng rng(1);
    CHECK_THROWS_AS(gen_queries(0, 0, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(gen_queries(5, 4, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(gen_queries(0, 4, 1, rng), std::invalid_argument);
}

TEST_CASE("each share is marginally uniform") {
    DetRng rng(17);
    const uint32_t b = 64, l = 3;
    const int n = 10000;
    std::vector<std::vector<uint64_t>> ones(l, std::vector<uint64_t>(b, 0));
    for (int i = 0; i < n; ++i) {
        auto qs = gen_queries(7, b, l, rng);
        for (uint32_t s = 0; s < l; ++s)
            for (uint32_t j = 0; j < b; ++j)
                if (qs[s].get(j)) ++ones[s][j];
    }
    double sigma = std::sqrt(n * 0.25);
    for (uint32_t s = 0; s < l; ++s)
        for (uint32_t j = 0; j < b; ++j)
            CHECK(std::fabs(double(ones[s][j]) - n / 2.0) <= 4.0 * sigma);
}

TEST_CASE("answer on a tiny known database") {
    Snapshot snap;
    snap.bucket_count = 3;
    snap.bucket_size = 1;
    snap.data = {0x0F, 0xF0, 0xAA};

    QueryVector q = QueryVector::zero(3);
    q.set(0);
    q.set(2);
    bytes got = answer(snap, q);
    CHECK(got == oracle_answer(snap, q));
    CHECK(got == bytes{0xA5});

    QueryVector zero = QueryVector::zero(3);
    CHECK(answer(snap, zero) == bytes{0x00});

    QueryVector unit = QueryVector::zero(3);
    unit.set(1);
    CHECK(answer(snap, unit) == bytes{0xF0});

    QueryVector wrong = QueryVector::zero(4);
    CHECK_THROWS_AS(answer(snap, wrong), std::invalid_argument);
}

TEST_CASE("reconstruct XORs answers") {
    CHECK(reconstruct({{0xA5}, {0x5A}, {0x0F}}) == bytes{0xF0});
    CHECK_THROWS_AS(reconstruct({}), std::invalid_argument);
    CHECK_THROWS_AS(reconstruct({{0x01}, {0x02, 0x03}}), std::invalid_argument);
}

TEST_CASE("full retrieval loop is exact for every target") {
    DetRng rng(23);
    Snapshot snap = random_snapshot(64, 12, rng);
    for (uint32_t beta = 0; beta < snap.bucket_count; ++beta) {
        auto qs = gen_queries(beta, snap.bucket_count, 3, rng);
        std::vector<bytes> answers;
        for (const auto& q : qs) {
            answers.push_back(answer(snap, q));
            CHECK(answers.back() == oracle_answer(snap, q));
        }
        bytes got = reconstruct(answers);
        byte_view want = snap.bucket(beta);
        CHECK(got == bytes(want.begin(), want.end()));
    }
}

TEST_CASE("answer_batch equals per-query answers") {
    DetRng rng(29);
    Snapshot snap = random_snapshot(40, 8, rng);
    std::vector<QueryVector> qs;
    for (int i = 0; i < 7; ++i) qs.push_back(gen_queries(uint32_t(i * 5), 40, 2, rng)[0]);
    auto batch = answer_batch(snap, qs);
    REQUIRE(batch.size() == qs.size());
    for (size_t i = 0; i < qs.size(); ++i) CHECK(batch[i] == answer(snap, qs[i]));
}

TEST_CASE("serialized masking is exactly equivalent to the plain protocol") {
    DetRng rng(31);
    Snapshot snap = random_snapshot(64, 16, rng);
    const uint32_t l = 3;
    for (uint32_t beta : {0u, 17u, 63u}) {
        auto qs = gen_queries(beta, snap.bucket_count, l, rng);
        std::vector<crypto::Seed> seeds(l);
        for (auto& s : seeds) rng.fill(s.data(), s.size());

        std::vector<bytes> plain, masked;
        for (uint32_t i = 0; i < l; ++i) {
            plain.push_back(answer(snap, qs[i]));
            masked.push_back(mask_answer(plain.back(), seeds[i]));
            CHECK(masked.back() != plain.back());
        }
        bytes combined = combine_masked(masked);
        bytes got = unmask(combined, seeds);
        CHECK(got == reconstruct(plain));
        byte_view want = snap.bucket(beta);
        CHECK(got == bytes(want.begin(), want.end()));
    }
}

TEST_CASE("mask/unmask roundtrip and pad pseudorandomness") {
    DetRng rng(37);
    bytes ans = rng.gen(2048);
    crypto::Seed seed;
    rng.fill(seed.data(), seed.size());
    bytes m = mask_answer(ans, seed);
    CHECK(unmask(m, {seed}) == ans);

    // The pad itself should look uniform.
    bytes zero(2048, 0);
    bytes pad = mask_answer(zero, seed);
    CHECK(stats::monobit_p(stats::count_ones(pad), pad.size() * 8) > 0.01);
}
