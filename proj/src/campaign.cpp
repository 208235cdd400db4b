#include "ftn/campaign.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <sstream>
#include <thread>

#include "ftn/stats.hpp"

namespace ftn::campaign {

namespace {

using Clock = std::chrono::steady_clock;

uint64_t ms_since(Clock::time_point t0) {
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count());
}

void check_config(const cfg::CampaignConfig& c) {
    auto errs = c.validate();
    if (!errs.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw cfg::ConfigError(msg);
    }
}

struct OutputDirs {
    std::string root, corpus, crashes;

    explicit OutputDirs(const cfg::CampaignConfig& c) : root(c.out_dir) {
        corpus = root + "/corpus";
        crashes = root + "/crashes";
        ensure_dir(root);
        ensure_dir(corpus);
        ensure_dir(crashes);
        c.save(root + "/config.ini");
    }

    std::string worker(int i) const { return root + "/worker-" + std::to_string(i); }
};

class PairExecutor : public fuzz::RunExecutor {
public:
    explicit PairExecutor(orch::Orchestrator& o) : orch_(o) {}
    orch::RunOutcome execute(const fault::ProgramFile& program, orch::RunMode mode) override {
        return orch_.run_once(program, mode);
    }

private:
    orch::Orchestrator& orch_;
};

// Tracks stats rows, verdict tallies, corpus/crash files and the stop
// condition; every mutation of campaign state funnels through here.
class Recorder {
public:
    Recorder(const OutputDirs& dirs, const cfg::CampaignConfig& cfg)
        : dirs_(dirs), cfg_(cfg), stats_(dirs.root + "/stats.csv"), t0_(Clock::now()) {}

    void iteration(const fuzz::IterationReport& rep) {
        stats_.row({rep.iteration, ms_since(t0_), rep.queue_len, rep.crash_buckets,
                    rep.novel_cells_total, orch::verdict_name(rep.verdict)});
        ++verdicts_[orch::verdict_name(rep.verdict)];
        if (cfg_.stop_on_crash && rep.verdict == orch::Verdict::TargetCrash) {
            stopped_on_crash_ = true;
        }
    }

    void corpus_entry(int64_t seq, const std::string& provenance, uint64_t iter, const Bytes& bytes) {
        write_file(dirs_.corpus + "/" + entry_file_name(seq, provenance, iter), std::span<const uint8_t>(bytes));
    }

    void crash(const std::string& key, const fuzz::CrashReport& report, const Bytes& reproducer_bytes) {
        auto it = crash_files_.find(key);
        if (it == crash_files_.end()) {
            std::string name = entry_file_name(static_cast<int64_t>(crash_files_.size()),
                                               report.representative.provenance.str(), report.first_seen);
            std::string path = dirs_.crashes + "/" + name;
            write_file(path, std::span<const uint8_t>(reproducer_bytes));
            it = crash_files_.emplace(key, path).first;
        }
        write_file(it->second + ".txt", crash_sidecar_text(report));
    }

    bool should_stop(uint64_t iterations_done) const {
        if (stopped_on_crash_) return true;
        if (cfg_.iterations > 0 && iterations_done >= cfg_.iterations) return true;
        if (cfg_.wall_time_s > 0 && ms_since(t0_) >= cfg_.wall_time_s * 1000) return true;
        return false;
    }

    bool stopped_on_crash() const { return stopped_on_crash_; }
    const std::map<std::string, uint64_t>& verdicts() const { return verdicts_; }

private:
    const OutputDirs& dirs_;
    const cfg::CampaignConfig& cfg_;
    stats::Writer stats_;
    Clock::time_point t0_;
    std::map<std::string, uint64_t> verdicts_;
    std::map<std::string, std::string> crash_files_;
    bool stopped_on_crash_ = false;
};

void write_summary(const OutputDirs& dirs, const Summary& s) {
    write_file(dirs.root + "/summary.txt", s.text());
}

} // namespace

std::string Summary::text() const {
    std::ostringstream os;
    os << "iterations: " << iterations << '\n'
       << "queue: " << queue_len << '\n'
       << "crash_buckets: " << crash_buckets << '\n'
       << "novel_cells: " << novel_cells << '\n'
       << "preconnect_discards: " << preconnect_discards << '\n'
       << "stopped_on_crash: " << (stopped_on_crash ? "true" : "false") << '\n';
    os << "verdicts:";
    for (const auto& [name, count] : verdict_counts) os << ' ' << name << '=' << count;
    os << '\n';
    return os.str();
}

std::string entry_file_name(int64_t seq, const std::string& provenance, uint64_t iteration) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "id-%06lld,src-", static_cast<long long>(seq));
    std::string name = buf;
    name += provenance;
    std::snprintf(buf, sizeof buf, ",time-%06llu", static_cast<unsigned long long>(iteration));
    name += buf;
    return name;
}

std::string crash_sidecar_text(const fuzz::CrashReport& report) {
    std::ostringstream os;
    os << "bug: " << report.bug_id << '\n';
    os << "bucket: " << fuzz::key_string(report.bucket_key) << '\n';
    os << "count: " << report.count << '\n';
    os << "first_seen: " << report.first_seen << '\n';
    os << "frames:\n";
    for (const auto& f : report.bucket_key)
        if (f != fuzz::kFrameSentinel) os << "  " << f << '\n';
    return os.str();
}

std::string parse_sidecar_bucket(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (line.rfind("bucket: ", 0) == 0) return line.substr(8);
    return "";
}

std::string parse_sidecar_bug(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (line.rfind("bug: ", 0) == 0) return line.substr(5);
    return "";
}

Summary run_fault_campaign(const cfg::CampaignConfig& config, const StopPredicate& stop_when) {
    check_config(config);
    OutputDirs dirs(config);
    Recorder rec(dirs, config);

    // Identity run: exports the site manifest and records baseline coverage.
    orch::Orchestrator orch0(config.weird_spec(), config.target_spec(), config.timeouts,
                             dirs.worker(0), config.transport);
    orch::RunOutcome identity =
        orch0.run_once(fault::ProgramFile{}, orch::RunMode::Off, {.want_manifest = true});
    if (identity.verdict != orch::Verdict::CleanExit)
        throw std::runtime_error(std::string("identity run failed: ") + orch::verdict_name(identity.verdict));

    std::string manifest_text = read_text_file(orch0.manifest_path());
    write_file(dirs.root + "/manifest.tsv", manifest_text);
    auto manifest = fault::parse_manifest(manifest_text);
    if (manifest.empty()) throw std::runtime_error("weird peer exported an empty site manifest");
    write_file(dirs.root + "/baseline.map", std::span<const uint8_t>(identity.coverage));

    fuzz::Fuzzer fz(std::move(manifest), config.sched, config.seed);
    fz.observe_baseline(identity.coverage);

    uint64_t iter_budget = config.iterations > 0 ? config.iterations : UINT64_MAX;

    // Queue initialization (single-threaded; workers start afterwards).
    PairExecutor exec0(orch0);
    fz.init_queue(exec0, iter_budget, [&](const fuzz::IterationReport& rep) {
        if (rep.admitted_seq >= 0) {
            const auto& p = fz.queue()[static_cast<size_t>(rep.admitted_seq)];
            rec.corpus_entry(p.seq, p.provenance.str(), p.discovery_iter, p.to_file().serialize());
        }
        if (!rep.crash_key.empty())
            rec.crash(rep.crash_key, fz.crashes().reports().at(rep.crash_key),
                      fz.crashes().reports().at(rep.crash_key).representative.to_file().serialize());
        rec.iteration(rep);
    });

    // Main loop: prepare/commit under the campaign lock, runs outside it.
    std::mutex mu;
    int workers = std::max(1, config.workers);
    std::vector<std::thread> threads;
    auto worker_fn = [&](int w) {
        std::unique_ptr<orch::Orchestrator> own;
        orch::Orchestrator* orch = &orch0;
        if (w > 0) {
            own = std::make_unique<orch::Orchestrator>(config.weird_spec(), config.target_spec(),
                                                       config.timeouts, dirs.worker(w), config.transport);
            orch = own.get();
        }
        PairExecutor exec(*orch);
        while (true) {
            fuzz::FaultProgram child;
            {
                std::lock_guard lock(mu);
                if (rec.should_stop(fz.iteration())) break;
                if (stop_when && stop_when(fz)) break;
                child = fz.prepare_child();
            }
            orch::RunOutcome out = exec.execute(child.to_file(), orch::RunMode::Faulting);
            fuzz::Fuzzer::Commit c;
            {
                std::lock_guard lock(mu);
                c = fz.commit_outcome(child, out);
                if (!c.rep.crash_key.empty())
                    rec.crash(c.rep.crash_key, fz.crashes().reports().at(c.rep.crash_key),
                              child.to_file().serialize());
            }
            if (c.want_calibration) {
                orch::RunOutcome cal = exec.execute(child.to_file(), orch::RunMode::Counting);
                std::lock_guard lock(mu);
                auto seq = fz.finish_admission(std::move(child), std::move(c.cells), cal);
                if (seq) {
                    const auto& p = fz.queue()[static_cast<size_t>(*seq)];
                    rec.corpus_entry(p.seq, p.provenance.str(), p.discovery_iter, p.to_file().serialize());
                    c.rep.admitted_seq = *seq;
                    c.rep.queue_len = fz.queue().size();
                }
            }
            {
                std::lock_guard lock(mu);
                rec.iteration(c.rep);
            }
        }
    };
    if (workers == 1) {
        worker_fn(0);
    } else {
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker_fn, w);
        for (auto& t : threads) t.join();
    }

    Summary s;
    s.iterations = fz.iteration();
    s.queue_len = fz.queue().size();
    s.crash_buckets = fz.crashes().bucket_count();
    s.novel_cells = fz.novelty().cells_seen();
    s.preconnect_discards = fz.preconnect_discards();
    s.stopped_on_crash = rec.stopped_on_crash();
    s.verdict_counts = rec.verdicts();
    s.novelty_virgin = fz.novelty().virgin();
    write_summary(dirs, s);
    return s;
}

Summary run_baseline_campaign(const cfg::CampaignConfig& config) {
    check_config(config);
    OutputDirs dirs(config);
    Recorder rec(dirs, config);

    testbed::Transcript seed = testbed::Transcript::load(config.transcript);
    replay::ReplayFuzzer rf(std::move(seed), config.seed);

    orch::PeerSpec target = config.target_spec();
    std::string workdir = dirs.worker(0);

    while (!rec.should_stop(rf.iteration())) {
        fuzz::IterationReport rep = rf.fuzz_one(target, config.timeouts, workdir, config.transport);
        if (rep.admitted_seq >= 0) {
            const replay::CorpusEntry* e = rf.last_admitted();
            rec.corpus_entry(e->seq, "mut:" + std::to_string(e->parent), e->discovery_iter,
                             e->transcript.serialize());
        }
        if (!rep.crash_key.empty())
            rec.crash(rep.crash_key, rf.crashes().reports().at(rep.crash_key), Bytes{});
        rec.iteration(rep);
    }

    Summary s;
    s.iterations = rf.iteration();
    s.queue_len = rf.corpus().size();
    s.crash_buckets = rf.crashes().bucket_count();
    s.novel_cells = rf.novelty().cells_seen();
    s.stopped_on_crash = rec.stopped_on_crash();
    s.verdict_counts = rec.verdicts();
    s.novelty_virgin = rf.novelty().virgin();
    write_summary(dirs, s);
    return s;
}

IdentityReport run_identity_check(const cfg::CampaignConfig& config) {
    check_config(config);
    OutputDirs dirs(config);
    ensure_dir(dirs.root + "/identity");

    orch::Orchestrator orch(config.weird_spec(), config.target_spec(), config.timeouts,
                            dirs.worker(0), config.transport);

    IdentityReport report;
    report.reps = config.identity_reps;
    Bytes first_map;
    Bytes first_transcript;
    for (int i = 0; i < config.identity_reps; ++i) {
        std::string rec_path = dirs.root + "/identity/rep-" + std::to_string(i) + ".transcript";
        orch::RunOutcome out =
            orch.run_once(fault::ProgramFile{}, orch::RunMode::Off, {.record_path = rec_path});
        if (out.verdict != orch::Verdict::CleanExit) {
            report.detail = "rep " + std::to_string(i) + ": verdict " + orch::verdict_name(out.verdict);
            return report;
        }
        Bytes transcript = read_file(rec_path);
        if (i == 0) {
            first_map = out.coverage;
            first_transcript = transcript;
            write_file(dirs.root + "/baseline.map", std::span<const uint8_t>(first_map));
        } else {
            if (out.coverage != first_map) {
                report.detail = "rep " + std::to_string(i) + ": coverage map differs from rep 0";
                return report;
            }
            if (transcript != first_transcript) {
                report.detail = "rep " + std::to_string(i) + ": transcript differs from rep 0";
                return report;
            }
        }
    }
    report.stable = true;

    Summary s;
    s.iterations = static_cast<uint64_t>(config.identity_reps);
    s.novel_cells = 0;
    write_summary(dirs, s);
    return report;
}

std::string ReproduceReport::text() const {
    std::ostringstream os;
    os << "reproduced: " << reproduced << "/" << runs << '\n';
    os << "bucket_match: " << (key_match ? "yes" : "no") << '\n';
    if (!expected_key.empty()) os << "expected_bucket: " << expected_key << '\n';
    if (!seen_key.empty()) os << "seen_bucket: " << seen_key << '\n';
    if (bug_unarmed_hint) os << "hint: target exited cleanly every run; is the bug armed in this build?\n";
    return os.str();
}

ReproduceReport reproduce(const cfg::CampaignConfig& config, const std::string& entry_path, int runs) {
    check_config(config);
    if (!file_exists(entry_path)) throw std::runtime_error("crash entry not found: " + entry_path);
    std::string sidecar_path = entry_path + ".txt";
    if (!file_exists(sidecar_path)) throw std::runtime_error("bucket sidecar not found: " + sidecar_path);

    fault::ProgramFile program = fault::ProgramFile::load(entry_path);
    std::string sidecar = read_text_file(sidecar_path);

    ReproduceReport rep;
    rep.runs = runs;
    rep.expected_key = parse_sidecar_bucket(sidecar);

    ensure_dir(config.out_dir);
    orch::Orchestrator orch(config.weird_spec(), config.target_spec(), config.timeouts,
                            config.out_dir + "/reproduce-tmp", config.transport);

    int clean = 0;
    bool all_match = true;
    for (int i = 0; i < runs; ++i) {
        orch::RunOutcome out = orch.run_once(program, orch::RunMode::Faulting);
        if (out.verdict == orch::Verdict::TargetCrash) {
            ++rep.reproduced;
            std::string key = fuzz::key_string(fuzz::dedup_key(out.crash_frames));
            if (rep.seen_key.empty()) rep.seen_key = key;
            if (key != rep.expected_key) all_match = false;
        } else if (out.verdict == orch::Verdict::CleanExit) {
            ++clean;
        }
    }
    rep.key_match = rep.reproduced > 0 && all_match;
    rep.bug_unarmed_hint = rep.reproduced == 0 && clean == runs && !parse_sidecar_bug(sidecar).empty();
    return rep;
}

} // namespace ftn::campaign
