#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "oblog/bytes.hpp"
#include "oblog/crypto.hpp"
#include "oblog/pir.hpp"
#include "oblog/rng.hpp"

namespace oblog::cuckoo {

inline constexpr uint32_t MAX_DISPLACEMENTS = 500;

struct Item {
    uint32_t beta1 = 0;
    uint32_t beta2 = 0;
    bytes data;
};

struct InsertReport {
    bool stored = false;       // incoming item resides in the table afterwards
    bool dropped = false;      // an item (incoming or displaced) was discarded
    bool gc_evicted = false;   // oldest entry deleted to hold the capacity bound
    uint32_t displacements = 0;
};

// Blocked cuckoo table: buckets x depth fixed-size slots. Every mutation is a
// pure function of (construction seed, insert sequence), so replicas that see
// the same write stream hold byte-identical state.
class Table {
public:
    Table(uint32_t buckets, uint32_t depth, uint64_t capacity, size_t item_size,
          const crypto::Seed& seed);

    InsertReport insert(const Item& item);

    // Flat bucket-major image of the slot payloads; empty slots are all-zero.
    pir::Snapshot snapshot() const;

    uint64_t writes_applied() const { return writes_applied_; }
    uint64_t live_count() const { return live_; }
    uint32_t buckets() const { return buckets_; }
    uint32_t depth() const { return depth_; }
    size_t item_size() const { return item_size_; }

    bytes state_digest() const;

    // Linear scan for tests: where does an item with this payload live?
    struct Loc {
        uint32_t bucket;
        uint32_t slot;
    };
    std::optional<Loc> locate(byte_view data) const;
    bool slot_used(uint32_t bucket, uint32_t slot) const;

private:
    struct SlotMeta {
        bool used = false;
        uint32_t beta1 = 0;
        uint32_t beta2 = 0;
        uint64_t stamp = 0;
    };

    uint8_t* slot_data(uint32_t bucket, uint32_t slot);
    const uint8_t* slot_data(uint32_t bucket, uint32_t slot) const;
    int free_slot(uint32_t bucket) const;
    void place(uint32_t bucket, uint32_t slot, const Item& item, uint64_t stamp);
    void clear(uint32_t bucket, uint32_t slot);

    uint32_t buckets_;
    uint32_t depth_;
    uint64_t capacity_;
    size_t item_size_;
    bytes data_;
    std::vector<SlotMeta> meta_;
    std::map<uint64_t, uint32_t> fifo_;  // insertion stamp -> flat slot index
    DetRng rng_;
    uint64_t next_stamp_ = 0;
    uint64_t writes_applied_ = 0;
    uint64_t live_ = 0;
};

}  // namespace oblog::cuckoo
