#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftn/rng.hpp"

namespace ftn::cov {

// Fixed map size for a campaign. Maps of different sizes are never compared.
inline constexpr size_t kMapSize = 65536;

// AFL count classes: 0,1,2,3,4-7,8-15,16-31,32-127,128-255.
inline uint32_t bucketize(uint8_t count) {
    if (count < 4) return count;
    if (count < 8) return 4;
    if (count < 16) return 5;
    if (count < 32) return 6;
    if (count < 128) return 7;
    return 8;
}

inline size_t edge_cell(uint64_t prev_location, uint64_t current_location, size_t map_size = kMapSize) {
    return (mix64(prev_location) ^ mix64(current_location)) % map_size;
}

// Writes saturating edge counters into an externally owned cell array
// (typically a file-backed shared mapping read by the orchestrator after
// the run ends). Exactly one writer per map instance.
class EdgeRecorder {
public:
    EdgeRecorder() = default;
    EdgeRecorder(uint8_t* cells, size_t size) : cells_(cells), size_(size) {}

    bool attached() const { return cells_ != nullptr; }

    void record_edge(uint64_t prev_location, uint64_t current_location) {
        if (!cells_) return;
        uint8_t& c = cells_[edge_cell(prev_location, current_location, size_)];
        if (c != 0xff) ++c;
    }

    // Convenience entry used by instrumented code: records the edge from the
    // previously hit location to `location`.
    void hit(uint64_t location) {
        record_edge(prev_, location);
        prev_ = location;
    }

    void reset_path() { prev_ = 0; }

private:
    uint8_t* cells_ = nullptr;
    size_t size_ = 0;
    uint64_t prev_ = 0;
};

struct Observation {
    bool is_novel = false;
    std::vector<uint32_t> novel_cells;
};

// Running summary of all coverage ever observed: per-cell maximum bucket.
// Monotone by construction; a map is novel iff some cell's bucket exceeds
// the recorded one.
class NoveltyIndex {
public:
    explicit NoveltyIndex(size_t cells = kMapSize) : virgin_(cells, 0) {}

    Observation observe(std::span<const uint8_t> map);

    size_t size() const { return virgin_.size(); }
    uint32_t bucket_at(size_t cell) const { return virgin_[cell]; }

    // Number of cells ever seen with a nonzero count.
    size_t cells_seen() const { return seen_; }

    bool covers(size_t cell) const { return virgin_[cell] != 0; }

    const std::vector<uint8_t>& virgin() const { return virgin_; }

private:
    std::vector<uint8_t> virgin_;
    size_t seen_ = 0;
};

} // namespace ftn::cov
