#include "ftn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ftn/bytes.hpp"

namespace ftn::stats {

Writer::Writer(const std::string& path) {
    f_ = std::fopen(path.c_str(), "w");
    if (!f_) throw std::runtime_error("cannot create stats file " + path);
    std::fprintf(f_, "%s\n", kHeader);
    std::fflush(f_);
}

Writer::~Writer() {
    if (f_) std::fclose(f_);
}

void Writer::row(const Row& r) {
    std::fprintf(f_, "%llu,%llu,%llu,%llu,%llu,%s\n", static_cast<unsigned long long>(r.iteration),
                 static_cast<unsigned long long>(r.wall_ms), static_cast<unsigned long long>(r.queue_len),
                 static_cast<unsigned long long>(r.crash_buckets),
                 static_cast<unsigned long long>(r.novel_cells_total), r.verdict.c_str());
    std::fflush(f_);
}

std::vector<Row> read_csv(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty stats file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw std::runtime_error(path + ": schema mismatch, expected header '" + kHeader + "'");

    std::vector<Row> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        Row r;
        auto next_u64 = [&](uint64_t& out) {
            if (!std::getline(ls, field, ',')) throw std::runtime_error(path + ": truncated row at line " + std::to_string(lineno));
            out = std::stoull(field);
        };
        next_u64(r.iteration);
        next_u64(r.wall_ms);
        next_u64(r.queue_len);
        next_u64(r.crash_buckets);
        next_u64(r.novel_cells_total);
        if (!std::getline(ls, r.verdict)) throw std::runtime_error(path + ": truncated row at line " + std::to_string(lineno));
        rows.push_back(std::move(r));
    }
    return rows;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::runtime_error("percentile of empty set");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    double rank = p * static_cast<double>(values.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(rank));
    size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<MergedRow> merge(const std::vector<std::vector<Row>>& runs) {
    if (runs.empty()) throw std::runtime_error("no stats files to merge");
    size_t n = runs[0].size();
    for (const auto& r : runs) n = std::min(n, r.size());

    std::vector<MergedRow> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> vals;
        vals.reserve(runs.size());
        for (const auto& r : runs) vals.push_back(static_cast<double>(r[i].novel_cells_total));
        MergedRow m;
        m.iteration = runs[0][i].iteration;
        m.median = percentile(vals, 0.5);
        m.p17 = percentile(vals, 0.17);
        m.p83 = percentile(vals, 0.83);
        out.push_back(m);
    }
    return out;
}

std::string merged_to_csv(const std::vector<MergedRow>& rows) {
    std::ostringstream os;
    os << kMergedHeader << '\n';
    for (const auto& r : rows) {
        os << r.iteration << ',' << r.median << ',' << r.p17 << ',' << r.p83 << '\n';
    }
    return os.str();
}

} // namespace ftn::stats
