#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ftn/coverage.hpp"
#include "ftn/fault_runtime.hpp"
#include "ftn/mutation.hpp"
#include "ftn/orchestrator.hpp"
#include "ftn/rng.hpp"

namespace ftn::fuzz {

using fault::ProgramEntry;
using fault::ProgramFile;

enum class ProvenanceKind { SiteProbe, StreamMutation, Splice, Extend };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::SiteProbe;
    int64_t parent_a = -1;
    int64_t parent_b = -1;
    uint32_t site = 0; // probe/extend: the site introduced

    std::string str() const;
};

// One fuzzing-queue entry: the ordered (site, stream) list plus calibration
// and provenance metadata.
struct FaultProgram {
    std::vector<ProgramEntry> entries;
    std::map<uint32_t, uint64_t> calibration; // site -> hits measured at calibration
    Provenance provenance;
    uint64_t discovery_iter = 0;
    std::vector<uint32_t> novel_cells; // cells this entry first reached
    bool dormant = false;              // none of its sites were hit at calibration
    int64_t seq = -1;                  // queue sequence once admitted

    ProgramFile to_file() const;
    bool has_site(uint32_t site_id) const;
};

// Crash bucketing: the first five stack frames, sentinel-padded.
inline constexpr const char* kFrameSentinel = "-";
std::array<std::string, 5> dedup_key(const std::vector<std::string>& frames);
std::string key_string(const std::array<std::string, 5>& key);

struct CrashReport {
    std::array<std::string, 5> bucket_key;
    FaultProgram representative;
    std::string bug_id; // from the FTN-BUG line, may be empty
    uint64_t first_seen = 0;
    uint64_t count = 0;
};

class CrashTable {
public:
    struct Upsert {
        bool is_new = false;
        std::string key;
        const CrashReport* report = nullptr;
    };

    Upsert record(const std::vector<std::string>& frames, const FaultProgram& reproducer,
                  const std::string& bug_id, uint64_t iteration);

    size_t bucket_count() const { return by_key_.size(); }
    const std::map<std::string, CrashReport>& reports() const { return by_key_; }

private:
    std::map<std::string, CrashReport> by_key_;
};

struct SchedulerKnobs {
    int probes_per_site = 8;
    int crash_threshold = 6; // pre-connect probe crashes that skip-list a site
    double p_favored = 0.8;
    int weight_stream = 6;
    int weight_splice = 1;
    int weight_extend = 1;
    double dormant_weight = 0.1;
    int default_probe_bytes = 8;

    bool operator==(const SchedulerKnobs&) const = default;
};

// Run execution seam: the real implementation wraps the orchestrator; tests
// drive the scheduler with a scripted executor.
class RunExecutor {
public:
    virtual ~RunExecutor() = default;
    virtual orch::RunOutcome execute(const ProgramFile& program, orch::RunMode mode) = 0;
};

// ---------------------------------------------------------------------------
// Mutation operators (pure: children carry fresh provenance, parents are
// untouched).

// Child differs from the parent in exactly one entry's stream bytes.
FaultProgram mutate_stream(const FaultProgram& parent, Rng& rng);

// Appends one of b's entries whose site is absent from a; nullopt when all
// of b's sites collide.
std::optional<FaultProgram> splice(const FaultProgram& a, const FaultProgram& b, Rng& rng);

// Appends a freshly generated tuple for an unused, non-skip-listed site;
// nullopt when no site is eligible. Stream sized by the parent's last known
// hit count for that site, or the default probe size.
std::optional<FaultProgram> extend(const FaultProgram& parent,
                                   const std::vector<fault::FaultSiteDescriptor>& manifest,
                                   const std::set<uint32_t>& skip_list, int default_probe_bytes,
                                   Rng& rng);

// Calibration sizing rule: ceil(hits * width / 8) bytes, truncating or
// zero-padding the existing stream.
void resize_stream(std::vector<uint8_t>& stream, uint64_t hits, unsigned width_bits);

struct IterationReport {
    uint64_t iteration = 0;
    orch::Verdict verdict = orch::Verdict::CleanExit;
    bool novel = false;
    int64_t admitted_seq = -1;
    bool crash_new = false;
    std::string crash_key;
    size_t queue_len = 0;
    size_t crash_buckets = 0;
    size_t novel_cells_total = 0;
    Provenance tried;
};

struct InitStats {
    uint64_t probe_runs = 0;
    std::vector<uint32_t> skip_listed;
    bool completed = true;
    size_t resume_site_index = 0; // scan cursor when the budget ran out
};

// The fuzzing loop state: queue, novelty index, skip list, crash table and
// scheduling policy. Executor-agnostic and deterministic for a fixed seed.
//
// Concurrency contract: the object itself is not synchronized. Workers must
// call prepare_child / commit_outcome / finish_admission under one campaign
// lock, executing the run itself outside it; fuzz_one() bundles the three
// phases for the single-worker (bit-reproducible) mode.
class Fuzzer {
public:
    Fuzzer(std::vector<fault::FaultSiteDescriptor> manifest, SchedulerKnobs knobs, uint64_t rng_seed);

    void observe_baseline(const Bytes& coverage);

    // Counting run; sizes streams from measured hits. nullopt when the
    // calibration run did not finish cleanly (program rejected).
    std::optional<FaultProgram> calibrate(FaultProgram program, RunExecutor& exec);
    // The sizing half of calibration, applied to already-measured hits.
    void apply_calibration(FaultProgram& program, const std::map<uint32_t, uint64_t>& hits);

    // Per-site probing. Consumes iterations from the shared budget; admits
    // novelty-producing single-site programs and skip-lists sites whose
    // probes crash the weird peer before connecting.
    InitStats init_queue(RunExecutor& exec, uint64_t budget_iterations,
                         const std::function<void(const IterationReport&)>& on_iteration);

    // Phase 1: pick a queue entry and derive a child (or a probe while the
    // queue is still empty).
    FaultProgram prepare_child();

    struct Commit {
        IterationReport rep;
        bool want_calibration = false; // novel: admit after a calibration run
        std::vector<uint32_t> cells;
    };

    // Phase 2: fold a finished run into the campaign state (iteration
    // counter, novelty, crash table, discard accounting). Serializable and
    // idempotent per run; admission is deferred to phase 3.
    Commit commit_outcome(const FaultProgram& child, const orch::RunOutcome& outcome);

    // Phase 3: admit a novel child once its calibration run finished.
    std::optional<int64_t> finish_admission(FaultProgram child, std::vector<uint32_t> cells,
                                            const orch::RunOutcome& calibration_outcome);
    // Admission for programs calibrated immediately beforehand (queue init).
    int64_t admit_calibrated(FaultProgram program, std::vector<uint32_t> cells);

    // prepare + execute + commit (+ calibrate/admit) in one step.
    IterationReport fuzz_one(RunExecutor& exec);

    uint64_t iteration() const { return iteration_; }
    const std::vector<FaultProgram>& queue() const { return queue_; }
    const std::set<int64_t>& favored() const { return favored_; }
    const std::set<uint32_t>& skip_list() const { return skip_list_; }
    const CrashTable& crashes() const { return crashes_; }
    const cov::NoveltyIndex& novelty() const { return novelty_; }
    const std::vector<fault::FaultSiteDescriptor>& manifest() const { return manifest_; }
    uint64_t preconnect_discards() const { return preconnect_discards_; }

private:
    const fault::FaultSiteDescriptor* site_info(uint32_t site_id) const;
    FaultProgram make_probe(uint32_t site_id, int stream_bytes);
    int64_t admit(FaultProgram program, std::vector<uint32_t> cells);
    size_t select_parent();
    uint32_t mutated_site(const FaultProgram& child) const;

    std::vector<fault::FaultSiteDescriptor> manifest_;
    std::map<uint32_t, size_t> manifest_index_;
    SchedulerKnobs knobs_;
    Rng rng_;

    std::vector<FaultProgram> queue_;
    std::set<int64_t> favored_;
    std::set<uint32_t> skip_list_;
    cov::NoveltyIndex novelty_;
    CrashTable crashes_;
    std::map<uint32_t, int64_t> cell_owner_;
    std::vector<size_t> owned_count_;
    std::map<uint32_t, uint64_t> preconnect_crashes_by_site_;
    uint64_t preconnect_discards_ = 0;
    uint64_t iteration_ = 0;
    size_t init_cursor_ = 0;
};

} // namespace ftn::fuzz
