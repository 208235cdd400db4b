#pragma once

#include <functional>
#include <map>
#include <string>

#include "ftn/config.hpp"
#include "ftn/fuzzer.hpp"
#include "ftn/replay.hpp"

namespace ftn::campaign {

struct Summary {
    uint64_t iterations = 0;
    size_t queue_len = 0;
    size_t crash_buckets = 0;
    size_t novel_cells = 0;
    uint64_t preconnect_discards = 0;
    bool stopped_on_crash = false;
    std::map<std::string, uint64_t> verdict_counts;
    std::vector<uint8_t> novelty_virgin; // final per-cell max buckets

    std::string text() const;
};

// Output directory layout, shared by fault and baseline campaigns:
//   <out>/config.ini    canonical as-run configuration
//   <out>/stats.csv     one row per iteration
//   <out>/summary.txt
//   <out>/baseline.map  identity-run coverage (fault, identity-check)
//   <out>/manifest.tsv  weird peer's exported site manifest (fault)
//   <out>/corpus/       queued entries: id-..,src-..,time-.. files
//   <out>/crashes/      reproducer files plus .txt sidecars
//   <out>/worker-N/     per-worker orchestrator scratch
// `stop_when` (optional, library-level) ends the campaign early once a
// goal holds, e.g. a coverage milestone; checked between iterations.
using StopPredicate = std::function<bool(const fuzz::Fuzzer&)>;
Summary run_fault_campaign(const cfg::CampaignConfig& config, const StopPredicate& stop_when = {});
Summary run_baseline_campaign(const cfg::CampaignConfig& config);

struct IdentityReport {
    bool stable = false;
    int reps = 0;
    std::string detail; // first difference found, empty when stable
};

IdentityReport run_identity_check(const cfg::CampaignConfig& config);

struct ReproduceReport {
    int runs = 0;
    int reproduced = 0;       // runs ending in TargetCrash
    bool key_match = false;   // every crash matched the sidecar bucket key
    std::string expected_key; // from the sidecar
    std::string seen_key;     // first observed key, empty if none
    bool bug_unarmed_hint = false;

    std::string text() const;
};

// entry_path names the fault-program file inside a crash directory; the
// bucket sidecar is expected at entry_path + ".txt".
ReproduceReport reproduce(const cfg::CampaignConfig& config, const std::string& entry_path, int runs = 5);

// Crash sidecar helpers (shared with tests).
std::string crash_sidecar_text(const fuzz::CrashReport& report);
std::string parse_sidecar_bucket(const std::string& sidecar_text);
std::string parse_sidecar_bug(const std::string& sidecar_text);

// Corpus entry file name: id-<seq>,src-<provenance>,time-<iteration>.
std::string entry_file_name(int64_t seq, const std::string& provenance, uint64_t iteration);

} // namespace ftn::campaign
