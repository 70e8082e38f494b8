#pragma once

#include <cstdint>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/rng.hpp"

namespace oblog::pir {

// One server's share of a read: a b-bit selection vector. Bit j lives at
// byte j/8, position j%8; trailing bits of the last byte stay zero.
struct QueryVector {
    uint32_t bit_count = 0;
    bytes data;

    static QueryVector zero(uint32_t bits) {
        QueryVector q;
        q.bit_count = bits;
        q.data.assign((bits + 7) / 8, 0);
        return q;
    }

    bool get(uint32_t j) const { return (data[j / 8] >> (j % 8)) & 1; }
    void set(uint32_t j) { data[j / 8] |= uint8_t(1u << (j % 8)); }
    void flip(uint32_t j) { data[j / 8] ^= uint8_t(1u << (j % 8)); }
};

// Immutable view of the replicated database at one sealed epoch: bucket_count
// buckets of bucket_size bytes, concatenated.
struct Snapshot {
    uint64_t epoch = 0;
    uint32_t bucket_count = 0;
    uint32_t bucket_size = 0;
    bytes data;

    byte_view bucket(uint32_t i) const {
        return byte_view(data.data() + size_t(i) * bucket_size, bucket_size);
    }
};

// l shares for target bucket beta: l-1 uniform vectors plus one chosen so the
// XOR of all of them is the unit vector at beta.
std::vector<QueryVector> gen_queries(uint32_t beta, uint32_t bucket_count, uint32_t servers,
                                     Rng& rng);

// XOR of the buckets selected by q; streams the snapshot once.
bytes answer(const Snapshot& snap, const QueryVector& q);

// Same pass answering many queries at once.
std::vector<bytes> answer_batch(const Snapshot& snap, const std::vector<QueryVector>& qs);

// XOR-combine per-server answers back into the target bucket.
bytes reconstruct(const std::vector<bytes>& answers);

// Serialized variant: answers travel through the leader under one-time pads
// expanded from per-server seeds only the client knows.
bytes mask_answer(byte_view answer, const crypto::Seed& seed);
bytes combine_masked(const std::vector<bytes>& masked);
bytes unmask(byte_view combined, const std::vector<crypto::Seed>& seeds);

}  // namespace oblog::pir
