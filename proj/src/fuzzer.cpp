#include "ftn/fuzzer.hpp"

#include <algorithm>
#include <sstream>

namespace ftn::fuzz {

std::string Provenance::str() const {
    std::ostringstream os;
    switch (kind) {
        case ProvenanceKind::SiteProbe: os << "probe:s" << site; break;
        case ProvenanceKind::StreamMutation: os << "mut:" << parent_a; break;
        case ProvenanceKind::Splice: os << "splice:" << parent_a << "+" << parent_b; break;
        case ProvenanceKind::Extend: os << "extend:" << parent_a << ":s" << site; break;
    }
    return os.str();
}

ProgramFile FaultProgram::to_file() const {
    ProgramFile f;
    f.entries = entries;
    return f;
}

bool FaultProgram::has_site(uint32_t site_id) const {
    for (const auto& e : entries)
        if (e.site_id == site_id) return true;
    return false;
}

std::array<std::string, 5> dedup_key(const std::vector<std::string>& frames) {
    std::array<std::string, 5> key;
    for (size_t i = 0; i < key.size(); ++i) key[i] = i < frames.size() ? frames[i] : kFrameSentinel;
    return key;
}

std::string key_string(const std::array<std::string, 5>& key) {
    std::string s;
    for (size_t i = 0; i < key.size(); ++i) {
        if (i) s += '|';
        s += key[i];
    }
    return s;
}

CrashTable::Upsert CrashTable::record(const std::vector<std::string>& frames,
                                      const FaultProgram& reproducer, const std::string& bug_id,
                                      uint64_t iteration) {
    auto key = dedup_key(frames);
    std::string ks = key_string(key);
    auto it = by_key_.find(ks);
    Upsert up;
    up.key = ks;
    if (it == by_key_.end()) {
        CrashReport r;
        r.bucket_key = key;
        r.representative = reproducer;
        r.bug_id = bug_id;
        r.first_seen = iteration;
        r.count = 1;
        auto [pos, _] = by_key_.emplace(ks, std::move(r));
        up.is_new = true;
        up.report = &pos->second;
    } else {
        ++it->second.count;
        up.is_new = false;
        up.report = &it->second;
    }
    return up;
}

// ---------------------------------------------------------------------------
// Mutation operators

namespace {

FaultProgram child_of(const FaultProgram& parent) {
    FaultProgram c;
    c.entries = parent.entries;
    c.calibration = parent.calibration;
    c.dormant = parent.dormant;
    return c;
}

} // namespace

FaultProgram mutate_stream(const FaultProgram& parent, Rng& rng) {
    FaultProgram c = child_of(parent);
    if (!c.entries.empty()) {
        size_t which = rng.below(c.entries.size());
        mut::apply(c.entries[which].stream, rng);
    }
    c.provenance = {ProvenanceKind::StreamMutation, parent.seq, -1, 0};
    return c;
}

std::optional<FaultProgram> splice(const FaultProgram& a, const FaultProgram& b, Rng& rng) {
    std::vector<const ProgramEntry*> candidates;
    for (const auto& e : b.entries)
        if (!a.has_site(e.site_id)) candidates.push_back(&e);
    if (candidates.empty()) return std::nullopt;
    const ProgramEntry* pick = candidates[rng.below(candidates.size())];

    FaultProgram c = child_of(a);
    c.entries.push_back(*pick);
    // The calibration map holds the full per-site hit counts of the
    // calibration run, so the appended site's sizing data is already there.
    for (const auto& [site, hits] : b.calibration)
        c.calibration.emplace(site, hits);
    c.provenance = {ProvenanceKind::Splice, a.seq, b.seq, pick->site_id};
    return c;
}

std::optional<FaultProgram> extend(const FaultProgram& parent,
                                   const std::vector<fault::FaultSiteDescriptor>& manifest,
                                   const std::set<uint32_t>& skip_list, int default_probe_bytes,
                                   Rng& rng) {
    std::vector<const fault::FaultSiteDescriptor*> eligible;
    for (const auto& d : manifest)
        if (!parent.has_site(d.site_id) && !skip_list.count(d.site_id)) eligible.push_back(&d);
    if (eligible.empty()) return std::nullopt;
    const auto* site = eligible[rng.below(eligible.size())];

    size_t bytes = static_cast<size_t>(default_probe_bytes);
    if (auto it = parent.calibration.find(site->site_id); it != parent.calibration.end() && it->second > 0)
        bytes = static_cast<size_t>((it->second * site->width_bits + 7) / 8);

    ProgramEntry e;
    e.site_id = site->site_id;
    e.stream.resize(bytes);
    rng.fill(e.stream.data(), e.stream.size());

    FaultProgram c = child_of(parent);
    c.entries.push_back(std::move(e));
    c.provenance = {ProvenanceKind::Extend, parent.seq, -1, site->site_id};
    return c;
}

void resize_stream(std::vector<uint8_t>& stream, uint64_t hits, unsigned width_bits) {
    size_t bytes = static_cast<size_t>((hits * width_bits + 7) / 8);
    stream.resize(bytes, 0); // zero-pad: the extension is the identity fault
}

// ---------------------------------------------------------------------------
// Fuzzer

Fuzzer::Fuzzer(std::vector<fault::FaultSiteDescriptor> manifest, SchedulerKnobs knobs, uint64_t rng_seed)
    : manifest_(std::move(manifest)), knobs_(knobs), rng_(rng_seed), novelty_(cov::kMapSize) {
    for (size_t i = 0; i < manifest_.size(); ++i) manifest_index_[manifest_[i].site_id] = i;
}

void Fuzzer::observe_baseline(const Bytes& coverage) { novelty_.observe(coverage); }

const fault::FaultSiteDescriptor* Fuzzer::site_info(uint32_t site_id) const {
    auto it = manifest_index_.find(site_id);
    return it == manifest_index_.end() ? nullptr : &manifest_[it->second];
}

std::optional<FaultProgram> Fuzzer::calibrate(FaultProgram program, RunExecutor& exec) {
    orch::RunOutcome out = exec.execute(program.to_file(), orch::RunMode::Counting);
    if (out.verdict != orch::Verdict::CleanExit) return std::nullopt;
    apply_calibration(program, out.hits);
    return program;
}

void Fuzzer::apply_calibration(FaultProgram& program, const std::map<uint32_t, uint64_t>& hits) {
    program.calibration = hits;
    bool any_hit = false;
    for (auto& e : program.entries) {
        const auto* info = site_info(e.site_id);
        uint64_t h = 0;
        if (auto it = hits.find(e.site_id); it != hits.end()) h = it->second;
        if (h > 0) any_hit = true;
        resize_stream(e.stream, h, info ? info->width_bits : 8);
    }
    program.dormant = !any_hit;
}

FaultProgram Fuzzer::make_probe(uint32_t site_id, int stream_bytes) {
    FaultProgram p;
    ProgramEntry e;
    e.site_id = site_id;
    e.stream.resize(static_cast<size_t>(stream_bytes));
    rng_.fill(e.stream.data(), e.stream.size());
    p.entries.push_back(std::move(e));
    p.provenance = {ProvenanceKind::SiteProbe, -1, -1, site_id};
    return p;
}

int64_t Fuzzer::admit(FaultProgram program, std::vector<uint32_t> cells) {
    program.seq = static_cast<int64_t>(queue_.size());
    program.discovery_iter = iteration_;
    program.novel_cells = std::move(cells);
    owned_count_.push_back(0);

    for (uint32_t c : program.novel_cells) {
        auto it = cell_owner_.find(c);
        if (it != cell_owner_.end()) {
            size_t old_owner = static_cast<size_t>(it->second);
            if (--owned_count_[old_owner] == 0) favored_.erase(static_cast<int64_t>(old_owner));
            it->second = program.seq;
        } else {
            cell_owner_[c] = program.seq;
        }
        ++owned_count_[static_cast<size_t>(program.seq)];
    }
    if (owned_count_[static_cast<size_t>(program.seq)] > 0) favored_.insert(program.seq);
    int64_t seq = program.seq;
    queue_.push_back(std::move(program));
    return seq;
}

size_t Fuzzer::select_parent() {
    if (!favored_.empty() && rng_.chance(knobs_.p_favored)) {
        size_t k = rng_.below(favored_.size());
        auto it = favored_.begin();
        std::advance(it, static_cast<long>(k));
        return static_cast<size_t>(*it);
    }
    double total = 0;
    for (const auto& p : queue_) total += p.dormant ? knobs_.dormant_weight : 1.0;
    double x = rng_.unit() * total;
    for (size_t i = 0; i < queue_.size(); ++i) {
        x -= queue_[i].dormant ? knobs_.dormant_weight : 1.0;
        if (x <= 0) return i;
    }
    return queue_.size() - 1;
}

uint32_t Fuzzer::mutated_site(const FaultProgram& child) const {
    switch (child.provenance.kind) {
        case ProvenanceKind::SiteProbe:
        case ProvenanceKind::Extend:
        case ProvenanceKind::Splice:
            return child.provenance.site;
        case ProvenanceKind::StreamMutation:
            return child.entries.empty() ? 0 : child.entries.front().site_id;
    }
    return 0;
}

Fuzzer::Commit Fuzzer::commit_outcome(const FaultProgram& child, const orch::RunOutcome& out) {
    ++iteration_;

    Commit c;
    IterationReport& rep = c.rep;
    rep.iteration = iteration_;
    rep.verdict = out.verdict;
    rep.tried = child.provenance;

    switch (out.verdict) {
        case orch::Verdict::WeirdPeerCrashPreConnect:
            // Discarded: the crashed client never touched the target.
            ++preconnect_crashes_by_site_[mutated_site(child)];
            ++preconnect_discards_;
            break;
        case orch::Verdict::TargetCrash: {
            auto up = crashes_.record(out.crash_frames, child, out.crash_bug, iteration_);
            rep.crash_new = up.is_new;
            rep.crash_key = up.key;
            if (!out.coverage.empty()) novelty_.observe(out.coverage);
            break;
        }
        case orch::Verdict::Timeout:
            break;
        case orch::Verdict::CleanExit:
        case orch::Verdict::WeirdPeerCrashPostConnect: {
            // Post-connect weird crashes still drove the target: coverage kept.
            if (out.coverage.empty()) break;
            auto obs = novelty_.observe(out.coverage);
            rep.novel = obs.is_novel;
            if (obs.is_novel) {
                c.want_calibration = true;
                c.cells = std::move(obs.novel_cells);
            }
            break;
        }
    }

    rep.queue_len = queue_.size();
    rep.crash_buckets = crashes_.bucket_count();
    rep.novel_cells_total = novelty_.cells_seen();
    return c;
}

std::optional<int64_t> Fuzzer::finish_admission(FaultProgram child, std::vector<uint32_t> cells,
                                                const orch::RunOutcome& calibration_outcome) {
    if (calibration_outcome.verdict != orch::Verdict::CleanExit) return std::nullopt;
    apply_calibration(child, calibration_outcome.hits);
    return admit(std::move(child), std::move(cells));
}

int64_t Fuzzer::admit_calibrated(FaultProgram program, std::vector<uint32_t> cells) {
    return admit(std::move(program), std::move(cells));
}

InitStats Fuzzer::init_queue(RunExecutor& exec, uint64_t budget_iterations,
                             const std::function<void(const IterationReport&)>& on_iteration) {
    InitStats stats;
    for (; init_cursor_ < manifest_.size(); ++init_cursor_) {
        const auto& site = manifest_[init_cursor_];
        int probe_crashes = 0;
        for (int probe = 0; probe < knobs_.probes_per_site; ++probe) {
            if (iteration_ >= budget_iterations) {
                stats.completed = false;
                stats.resume_site_index = init_cursor_;
                return stats;
            }
            FaultProgram p = make_probe(site.site_id, knobs_.default_probe_bytes);
            std::optional<FaultProgram> calibrated = calibrate(std::move(p), exec);
            if (!calibrated) continue; // calibration run failed: probe rejected

            orch::RunOutcome out = exec.execute(calibrated->to_file(), orch::RunMode::Faulting);
            Commit c = commit_outcome(*calibrated, out);
            ++stats.probe_runs;
            if (c.rep.verdict == orch::Verdict::WeirdPeerCrashPreConnect) ++probe_crashes;
            if (c.want_calibration) {
                // Probes were calibrated right before the run; admit as-is.
                c.rep.admitted_seq = admit_calibrated(std::move(*calibrated), std::move(c.cells));
                c.rep.queue_len = queue_.size();
            }
            if (on_iteration) on_iteration(c.rep);
        }
        if (probe_crashes >= knobs_.crash_threshold) {
            skip_list_.insert(site.site_id);
            stats.skip_listed.push_back(site.site_id);
        }
    }
    return stats;
}

FaultProgram Fuzzer::prepare_child() {
    if (queue_.empty()) {
        // Nothing admitted yet: fall back to probing a random eligible site
        // so the campaign keeps producing runs.
        std::vector<const fault::FaultSiteDescriptor*> eligible;
        for (const auto& d : manifest_)
            if (!skip_list_.count(d.site_id)) eligible.push_back(&d);
        if (eligible.empty()) throw std::runtime_error("no fault sites left to fuzz");
        uint32_t site = eligible[rng_.below(eligible.size())]->site_id;
        return make_probe(site, knobs_.default_probe_bytes);
    }

    size_t parent_idx = select_parent();
    const FaultProgram& parent = queue_[parent_idx];

    int total_w = knobs_.weight_stream + knobs_.weight_splice + knobs_.weight_extend;
    int64_t draw = static_cast<int64_t>(rng_.below(static_cast<uint64_t>(total_w)));

    if (draw < knobs_.weight_stream) return mutate_stream(parent, rng_);
    if (draw < knobs_.weight_stream + knobs_.weight_splice) {
        const FaultProgram& partner = queue_[rng_.below(queue_.size())];
        auto spliced = splice(parent, partner, rng_);
        return spliced ? std::move(*spliced) : mutate_stream(parent, rng_);
    }
    auto extended = extend(parent, manifest_, skip_list_, knobs_.default_probe_bytes, rng_);
    return extended ? std::move(*extended) : mutate_stream(parent, rng_);
}

IterationReport Fuzzer::fuzz_one(RunExecutor& exec) {
    FaultProgram child = prepare_child();
    orch::RunOutcome out = exec.execute(child.to_file(), orch::RunMode::Faulting);
    Commit c = commit_outcome(child, out);
    if (c.want_calibration) {
        orch::RunOutcome cal = exec.execute(child.to_file(), orch::RunMode::Counting);
        auto seq = finish_admission(std::move(child), std::move(c.cells), cal);
        if (seq) {
            c.rep.admitted_seq = *seq;
            c.rep.queue_len = queue_.size();
        }
    }
    return c.rep;
}

} // namespace ftn::fuzz
