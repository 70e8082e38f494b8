#include "oblog/pir.hpp"

#include <stdexcept>

namespace oblog::pir {

std::vector<QueryVector> gen_queries(uint32_t beta, uint32_t bucket_count, uint32_t servers,
                                     Rng& rng) {
    if (bucket_count == 0) throw std::invalid_argument("gen_queries: no buckets");
    if (servers < 2) throw std::invalid_argument("gen_queries: need at least 2 servers");
    if (beta >= bucket_count) throw std::invalid_argument("gen_queries: target out of range");

    std::vector<QueryVector> qs;
    qs.reserve(servers);
    for (uint32_t i = 0; i + 1 < servers; ++i) {
        QueryVector q = QueryVector::zero(bucket_count);
        rng.fill(q.data.data(), q.data.size());
        if (bucket_count % 8 != 0) q.data.back() &= uint8_t(0xffu >> (8 - bucket_count % 8));
        qs.push_back(std::move(q));
    }
    QueryVector last = QueryVector::zero(bucket_count);
    last.set(beta);
    for (const QueryVector& q : qs)
        xor_into(last.data.data(), q.data.data(), last.data.size());
    qs.push_back(std::move(last));
    return qs;
}

bytes answer(const Snapshot& snap, const QueryVector& q) {
    if (q.bit_count != snap.bucket_count)
        throw std::invalid_argument("answer: query length mismatch");
    bytes acc(snap.bucket_size, 0);
    for (uint32_t j = 0; j < snap.bucket_count; ++j) {
        if (q.get(j))
            xor_into(acc.data(), snap.data.data() + size_t(j) * snap.bucket_size,
                     snap.bucket_size);
    }
    return acc;
}

std::vector<bytes> answer_batch(const Snapshot& snap, const std::vector<QueryVector>& qs) {
    for (const QueryVector& q : qs)
        if (q.bit_count != snap.bucket_count)
            throw std::invalid_argument("answer_batch: query length mismatch");
    std::vector<bytes> accs(qs.size(), bytes(snap.bucket_size, 0));
    for (uint32_t j = 0; j < snap.bucket_count; ++j) {
        const uint8_t* bucket = snap.data.data() + size_t(j) * snap.bucket_size;
        for (size_t k = 0; k < qs.size(); ++k)
            if (qs[k].get(j)) xor_into(accs[k].data(), bucket, snap.bucket_size);
    }
    return accs;
}

bytes reconstruct(const std::vector<bytes>& answers) {
    if (answers.empty()) throw std::invalid_argument("reconstruct: no answers");
    bytes out = answers[0];
    for (size_t i = 1; i < answers.size(); ++i) {
        if (answers[i].size() != out.size())
            throw std::invalid_argument("reconstruct: answer length mismatch");
        xor_into(out.data(), answers[i].data(), out.size());
    }
    return out;
}

bytes mask_answer(byte_view answer, const crypto::Seed& seed) {
    bytes pad = crypto::prng_expand(seed, answer.size());
    xor_into(pad.data(), answer.data(), answer.size());
    return pad;
}

bytes combine_masked(const std::vector<bytes>& masked) {
    return reconstruct(masked);
}

bytes unmask(byte_view combined, const std::vector<crypto::Seed>& seeds) {
    bytes out(combined.begin(), combined.end());
    for (const crypto::Seed& s : seeds) {
        bytes pad = crypto::prng_expand(s, out.size());
        xor_into(out.data(), pad.data(), out.size());
    }
    return out;
}

}  // namespace oblog::pir
