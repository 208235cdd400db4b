#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace ftn::stats {

inline constexpr const char* kHeader = "iteration,wall_ms,queue_len,crash_buckets,novel_cells_total,verdict";
inline constexpr const char* kMergedHeader = "iteration,median_novel_cells,p17_novel_cells,p83_novel_cells";

struct Row {
    uint64_t iteration = 0;
    uint64_t wall_ms = 0;
    uint64_t queue_len = 0;
    uint64_t crash_buckets = 0;
    uint64_t novel_cells_total = 0;
    std::string verdict;
};

// Appends one row per iteration; flushed per row so partial campaigns still
// leave usable stats behind.
class Writer {
public:
    explicit Writer(const std::string& path);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void row(const Row& r);

private:
    FILE* f_;
};

// Throws std::runtime_error naming the file on schema mismatch or parse
// failure.
std::vector<Row> read_csv(const std::string& path);

struct MergedRow {
    uint64_t iteration = 0;
    double median = 0;
    double p17 = 0;
    double p83 = 0;
};

// Linear-interpolation percentile over the values (spreadsheet
// PERCENTILE.INC convention): rank = p*(n-1).
double percentile(std::vector<double> values, double p);

// Aligns runs by iteration (up to the shortest run) and reduces
// novel_cells_total to per-iteration median and 17th/83rd percentiles.
std::vector<MergedRow> merge(const std::vector<std::vector<Row>>& runs);

std::string merged_to_csv(const std::vector<MergedRow>& rows);

} // namespace ftn::stats
