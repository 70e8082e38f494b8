#include "oblog/cuckoo.hpp"

#include <cstring>
#include <stdexcept>

namespace oblog::cuckoo {

Table::Table(uint32_t buckets, uint32_t depth, uint64_t capacity, size_t item_size,
             const crypto::Seed& seed)
    : buckets_(buckets),
      depth_(depth),
      capacity_(capacity),
      item_size_(item_size),
      rng_(seed) {
    if (buckets == 0 || depth == 0 || item_size == 0)
        throw std::invalid_argument("cuckoo: table dimensions must be positive");
    if (capacity == 0 || capacity > uint64_t(buckets) * depth)
        throw std::invalid_argument("cuckoo: capacity must be in [1, buckets*depth]");
    data_.assign(size_t(buckets) * depth * item_size, 0);
    meta_.assign(size_t(buckets) * depth, SlotMeta{});
}

uint8_t* Table::slot_data(uint32_t bucket, uint32_t slot) {
    return data_.data() + (size_t(bucket) * depth_ + slot) * item_size_;
}

const uint8_t* Table::slot_data(uint32_t bucket, uint32_t slot) const {
    return data_.data() + (size_t(bucket) * depth_ + slot) * item_size_;
}

int Table::free_slot(uint32_t bucket) const {
    for (uint32_t s = 0; s < depth_; ++s)
        if (!meta_[size_t(bucket) * depth_ + s].used) return int(s);
    return -1;
}

void Table::place(uint32_t bucket, uint32_t slot, const Item& item, uint64_t stamp) {
    std::memcpy(slot_data(bucket, slot), item.data.data(), item_size_);
    SlotMeta& m = meta_[size_t(bucket) * depth_ + slot];
    m.used = true;
    m.beta1 = item.beta1;
    m.beta2 = item.beta2;
    m.stamp = stamp;
    fifo_[stamp] = bucket * depth_ + slot;
    ++live_;
}

void Table::clear(uint32_t bucket, uint32_t slot) {
    std::memset(slot_data(bucket, slot), 0, item_size_);
    SlotMeta& m = meta_[size_t(bucket) * depth_ + slot];
    fifo_.erase(m.stamp);
    m = SlotMeta{};
    --live_;
}

InsertReport Table::insert(const Item& item) {
    if (item.beta1 >= buckets_ || item.beta2 >= buckets_)
        throw std::invalid_argument("cuckoo: bucket index out of range");
    if (item.data.size() != item_size_)
        throw std::invalid_argument("cuckoo: item size mismatch");

    InsertReport report;
    ++writes_applied_;

    if (live_ == capacity_) {
        uint32_t flat = fifo_.begin()->second;
        clear(flat / depth_, flat % depth_);
        report.gc_evicted = true;
    }

    uint64_t stamp = next_stamp_++;

    int s = free_slot(item.beta1);
    if (s >= 0) {
        place(item.beta1, uint32_t(s), item, stamp);
        report.stored = true;
        return report;
    }
    s = free_slot(item.beta2);
    if (s >= 0) {
        place(item.beta2, uint32_t(s), item, stamp);
        report.stored = true;
        return report;
    }

    // Both candidates full: evict along a random walk. The incoming item
    // lands immediately; each displaced resident moves toward its alternate
    // bucket until one finds space or the chain is cut.
    uint32_t be = rng_.uniform(2) == 0 ? item.beta1 : item.beta2;
    Item carry = item;
    uint64_t carry_stamp = stamp;
    bool carry_is_incoming = true;
    bool incoming_stored = false;

    for (uint32_t hops = 0;; ++hops) {
        int free = free_slot(be);
        if (free >= 0) {
            place(be, uint32_t(free), carry, carry_stamp);
            if (carry_is_incoming) incoming_stored = true;
            report.stored = incoming_stored;
            report.displacements = hops;
            return report;
        }
        if (hops == MAX_DISPLACEMENTS) break;
        uint32_t victim_slot = uint32_t(rng_.uniform(depth_));
        SlotMeta victim_meta = meta_[size_t(be) * depth_ + victim_slot];
        Item victim;
        victim.beta1 = victim_meta.beta1;
        victim.beta2 = victim_meta.beta2;
        victim.data.assign(slot_data(be, victim_slot), slot_data(be, victim_slot) + item_size_);
        clear(be, victim_slot);
        place(be, victim_slot, carry, carry_stamp);
        if (carry_is_incoming) incoming_stored = true;

        carry = std::move(victim);
        carry_stamp = victim_meta.stamp;
        carry_is_incoming = false;
        be = victim_meta.beta1 == be ? victim_meta.beta2 : victim_meta.beta1;
    }

    // Chain hit the displacement bound: the item left in hand is discarded.
    report.displacements = MAX_DISPLACEMENTS;
    report.dropped = true;
    report.stored = incoming_stored;
    return report;
}

pir::Snapshot Table::snapshot() const {
    pir::Snapshot snap;
    snap.epoch = writes_applied_;
    snap.bucket_count = buckets_;
    snap.bucket_size = depth_ * uint32_t(item_size_);
    snap.data = data_;
    return snap;
}

bytes Table::state_digest() const {
    crypto::Hasher h;
    h.update_u64(writes_applied_);
    h.update_u64(live_);
    h.update_u64(next_stamp_);
    h.update(data_);
    for (const SlotMeta& m : meta_) {
        h.update_u64(m.used ? 1 : 0);
        h.update_u64(uint64_t(m.beta1) << 32 | m.beta2);
        h.update_u64(m.stamp);
    }
    return h.finish();
}

std::optional<Table::Loc> Table::locate(byte_view data) const {
    if (data.size() != item_size_) return std::nullopt;
    for (uint32_t b = 0; b < buckets_; ++b)
        for (uint32_t s = 0; s < depth_; ++s)
            if (meta_[size_t(b) * depth_ + s].used &&
                std::memcmp(slot_data(b, s), data.data(), item_size_) == 0)
                return Loc{b, s};
    return std::nullopt;
}

bool Table::slot_used(uint32_t bucket, uint32_t slot) const {
    return meta_[size_t(bucket) * depth_ + slot].used;
}

}  // namespace oblog::cuckoo
