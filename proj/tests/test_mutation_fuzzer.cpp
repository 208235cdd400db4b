#include <doctest.h>

#include <sstream>

#include "ftn/fuzzer.hpp"
#include "ftn/mutation.hpp"

using namespace ftn;
using namespace ftn::fuzz;

namespace {

fault::FaultSiteDescriptor msite(uint32_t id, fault::FaultKind kind, uint8_t width) {
    fault::FaultSiteDescriptor d;
    d.site_id = id;
    d.kind = kind;
    d.width_bits = width;
    d.label = "site" + std::to_string(id);
    return d;
}

std::vector<fault::FaultSiteDescriptor> micro_manifest() {
    // Widths {1,8,64} x ids 1..9; loop bounds live in the fake executor.
    std::vector<fault::FaultSiteDescriptor> m;
    const uint8_t widths[] = {1, 1, 1, 8, 8, 8, 64, 64, 64};
    for (uint32_t i = 0; i < 9; ++i) {
        auto kind = widths[i] == 1 ? fault::FaultKind::Branch : fault::FaultKind::ValueStore;
        m.push_back(msite(i + 1, kind, widths[i]));
    }
    return m;
}

Bytes map_with(std::initializer_list<uint32_t> cells) {
    Bytes m(cov::kMapSize, 0);
    for (uint32_t c : cells) m[c] = 1;
    return m;
}

orch::RunOutcome clean_run(Bytes coverage) {
    orch::RunOutcome o;
    o.verdict = orch::Verdict::CleanExit;
    o.coverage = std::move(coverage);
    return o;
}

orch::RunOutcome counting_run(std::map<uint32_t, uint64_t> hits) {
    orch::RunOutcome o;
    o.verdict = orch::Verdict::CleanExit;
    o.hits = std::move(hits);
    o.coverage = Bytes(cov::kMapSize, 0);
    return o;
}

struct FakeExec : RunExecutor {
    std::function<orch::RunOutcome(const ProgramFile&, orch::RunMode)> fn;
    int counting_calls = 0;
    int faulting_calls = 0;

    orch::RunOutcome execute(const ProgramFile& p, orch::RunMode mode) override {
        if (mode == orch::RunMode::Counting)
            ++counting_calls;
        else if (mode == orch::RunMode::Faulting)
            ++faulting_calls;
        return fn(p, mode);
    }
};

FaultProgram program_with(std::vector<ProgramEntry> entries, int64_t seq = 0) {
    FaultProgram p;
    p.entries = std::move(entries);
    p.seq = seq;
    return p;
}

} // namespace

TEST_CASE("dedup_key: five-frame rule with sentinel padding") {
    auto k1 = dedup_key({"a", "b", "c", "d", "e", "f"});
    CHECK(k1 == std::array<std::string, 5>{"a", "b", "c", "d", "e"});
    auto k2 = dedup_key({"a", "b"});
    CHECK(k2 == std::array<std::string, 5>{"a", "b", "-", "-", "-"});
    // Frames differing only at position 6 share a bucket.
    CHECK(dedup_key({"a", "b", "c", "d", "e", "x"}) == dedup_key({"a", "b", "c", "d", "e", "y"}));
    CHECK(key_string(k2) == "a|b|-|-|-");
}

TEST_CASE("crash table: one report per bucket, duplicates counted") {
    CrashTable t;
    FaultProgram repro = program_with({{1, {0xFF}}});
    auto first = t.record({"f", "g", "h", "i", "j", "k"}, repro, "B1", 10);
    CHECK(first.is_new);
    auto dup = t.record({"f", "g", "h", "i", "j", "OTHER"}, repro, "B1", 12);
    CHECK_FALSE(dup.is_new);
    CHECK(dup.report->count == 2);
    CHECK(dup.report->first_seen == 10);
    CHECK(t.bucket_count() == 1);
    auto other = t.record({"x"}, repro, "", 13);
    CHECK(other.is_new);
    CHECK(t.bucket_count() == 2);
}

TEST_CASE("mutate_stream: child differs from parent in exactly one entry's bytes") {
    Rng rng(3);
    FaultProgram parent = program_with({{1, {0, 0, 0, 0, 0, 0, 0, 0}}, {2, {0xAA, 0xBB}}}, 4);
    for (int t = 0; t < 50; ++t) {
        FaultProgram child = mutate_stream(parent, rng);
        REQUIRE(child.entries.size() == parent.entries.size());
        int differing = 0;
        for (size_t i = 0; i < child.entries.size(); ++i) {
            CHECK(child.entries[i].site_id == parent.entries[i].site_id);
            CHECK(child.entries[i].stream.size() == parent.entries[i].stream.size());
            if (child.entries[i].stream != parent.entries[i].stream) ++differing;
        }
        CHECK(differing <= 1); // zero when the operator picked the same byte value
        CHECK(child.provenance.kind == ProvenanceKind::StreamMutation);
        CHECK(child.provenance.parent_a == 4);
    }
}

TEST_CASE("mutate_stream: block-zero over the whole stream is the identity-fault child") {
    FaultProgram parent = program_with({{1, {0x55, 0x66}}});
    std::vector<uint8_t> data = parent.entries[0].stream;
    Rng rng(0);
    mut::apply_op(data, mut::Op::BlockZero, rng);
    // The operator zeroes a block; zero bytes mean no fault is applied.
    for (size_t i = 0; i < data.size(); ++i) CHECK((data[i] == 0 || data[i] == parent.entries[0].stream[i]));
}

TEST_CASE("mutation operators: deterministic under a fixed seed") {
    FaultProgram parent = program_with({{1, {1, 2, 3, 4, 5, 6, 7, 8}}});
    Rng a(77), b(77);
    FaultProgram c1 = mutate_stream(parent, a);
    FaultProgram c2 = mutate_stream(parent, b);
    CHECK(c1.entries[0].stream == c2.entries[0].stream);
}

TEST_CASE("splice: appends one tuple from the partner") {
    Rng rng(5);
    FaultProgram a = program_with({{1, {0x01}}}, 0);
    FaultProgram b = program_with({{2, {0x02}}}, 1);
    auto child = splice(a, b, rng);
    REQUIRE(child.has_value());
    REQUIRE(child->entries.size() == 2);
    CHECK(child->entries[0].site_id == 1);
    CHECK(child->entries[1].site_id == 2);
    CHECK(child->provenance.kind == ProvenanceKind::Splice);

    SUBCASE("full site collision means no splice") {
        FaultProgram c = program_with({{1, {0x03}}}, 2);
        CHECK_FALSE(splice(a, c, rng).has_value());
    }
    SUBCASE("one tuple appended even when several are available") {
        FaultProgram big = program_with({{5, {}}, {6, {}}, {7, {}}}, 3);
        FaultProgram two = program_with({{1, {}}, {2, {}}}, 4);
        auto kid = splice(two, big, rng);
        REQUIRE(kid.has_value());
        CHECK(kid->entries.size() == 3);
    }
}

TEST_CASE("extend: fresh site from the eligible set only") {
    auto manifest = micro_manifest();
    Rng rng(9);
    FaultProgram parent = program_with({{1, {0x01}}}, 0);

    SUBCASE("skip-listed sites are never chosen") {
        std::set<uint32_t> skip = {3, 4, 5, 6, 7, 8, 9};
        auto child = extend(parent, manifest, skip, 8, rng);
        REQUIRE(child.has_value());
        CHECK(child->entries.back().site_id == 2); // only eligible site
        CHECK(child->provenance.kind == ProvenanceKind::Extend);
    }
    SUBCASE("no eligible site means no extend") {
        std::set<uint32_t> skip;
        for (uint32_t i = 2; i <= 9; ++i) skip.insert(i);
        CHECK_FALSE(extend(parent, manifest, skip, 8, rng).has_value());
    }
    SUBCASE("stream sized by the parent's hit knowledge") {
        FaultProgram p = parent;
        p.calibration[7] = 2; // 64-bit site hit twice: 16 bytes
        std::set<uint32_t> skip = {2, 3, 4, 5, 6, 8, 9};
        auto child = extend(p, manifest, skip, 8, rng);
        REQUIRE(child.has_value());
        CHECK(child->entries.back().site_id == 7);
        CHECK(child->entries.back().stream.size() == 16);
    }
    SUBCASE("deterministic choice under a fixed seed") {
        Rng r1(123), r2(123);
        auto c1 = extend(parent, manifest, {}, 8, r1);
        auto c2 = extend(parent, manifest, {}, 8, r2);
        REQUIRE(c1.has_value());
        REQUIRE(c2.has_value());
        CHECK(c1->entries.back().site_id == c2->entries.back().site_id);
        CHECK(c1->entries.back().stream == c2->entries.back().stream);
    }
}

TEST_CASE("calibration: stream lengths follow ceil(hits x width / 8)") {
    Fuzzer fz(micro_manifest(), SchedulerKnobs{}, 1);
    FakeExec exec;
    exec.fn = [](const ProgramFile&, orch::RunMode) {
        return counting_run({{1, 1}, {2, 3}, {3, 9}, {4, 1}, {5, 3}, {6, 9}, {7, 1}, {8, 3}, {9, 9}});
    };

    FaultProgram p;
    for (uint32_t id = 1; id <= 9; ++id) p.entries.push_back({id, Bytes(64, 0xEE)});
    auto calibrated = fz.calibrate(std::move(p), exec);
    REQUIRE(calibrated.has_value());
    const size_t expected[] = {1, 1, 2, 1, 3, 9, 8, 24, 72};
    for (size_t i = 0; i < 9; ++i) CHECK(calibrated->entries[i].stream.size() == expected[i]);
    CHECK_FALSE(calibrated->dormant);
}

TEST_CASE("calibration: zero-hit site sizes to zero and flags the entry dormant") {
    Fuzzer fz(micro_manifest(), SchedulerKnobs{}, 1);
    FakeExec exec;
    exec.fn = [](const ProgramFile&, orch::RunMode) { return counting_run({}); };
    auto calibrated = fz.calibrate(program_with({{1, {0xAB, 0xCD}}}), exec);
    REQUIRE(calibrated.has_value());
    CHECK(calibrated->entries[0].stream.empty());
    CHECK(calibrated->dormant);
}

TEST_CASE("calibration: short streams are zero-padded to the computed length") {
    Fuzzer fz(micro_manifest(), SchedulerKnobs{}, 1);
    FakeExec exec;
    exec.fn = [](const ProgramFile&, orch::RunMode) { return counting_run({{7, 2}}); };
    auto calibrated = fz.calibrate(program_with({{7, {0x11}}}), exec);
    REQUIRE(calibrated.has_value());
    REQUIRE(calibrated->entries[0].stream.size() == 16); // 2 hits x 64 bits
    CHECK(calibrated->entries[0].stream[0] == 0x11);
    for (size_t i = 1; i < 16; ++i) CHECK(calibrated->entries[0].stream[i] == 0);
}

TEST_CASE("calibration: a crashing or timed-out calibration run rejects the program") {
    Fuzzer fz(micro_manifest(), SchedulerKnobs{}, 1);
    FakeExec exec;
    exec.fn = [](const ProgramFile&, orch::RunMode) {
        orch::RunOutcome o;
        o.verdict = orch::Verdict::Timeout;
        return o;
    };
    CHECK_FALSE(fz.calibrate(program_with({{1, {0x01}}}), exec).has_value());
}

TEST_CASE("init_queue: run count, admissions and skip-listing") {
    SchedulerKnobs knobs;
    knobs.probes_per_site = 3;
    knobs.crash_threshold = 3;
    Fuzzer fz(micro_manifest(), knobs, 42);
    fz.observe_baseline(map_with({100}));

    // Site 1 probes always crash the weird peer pre-connect; site 2 probes
    // reach a new cell; everything else reproduces the baseline.
    FakeExec exec;
    exec.fn = [&](const ProgramFile& p, orch::RunMode mode) {
        if (mode == orch::RunMode::Counting) {
            std::map<uint32_t, uint64_t> hits;
            for (const auto& e : p.entries) hits[e.site_id] = 2;
            return counting_run(std::move(hits));
        }
        REQUIRE(p.entries.size() == 1);
        if (p.entries[0].site_id == 1) {
            orch::RunOutcome o;
            o.verdict = orch::Verdict::WeirdPeerCrashPreConnect;
            return o;
        }
        if (p.entries[0].site_id == 2) return clean_run(map_with({100, 200}));
        return clean_run(map_with({100}));
    };

    std::vector<IterationReport> reports;
    auto stats = fz.init_queue(exec, UINT64_MAX, [&](const IterationReport& r) { reports.push_back(r); });

    CHECK(stats.completed);
    CHECK(stats.probe_runs == 9 * 3);
    CHECK(exec.faulting_calls == 9 * 3);
    CHECK(exec.counting_calls == 9 * 3); // each probe calibrates once
    CHECK(stats.skip_listed == std::vector<uint32_t>{1});
    CHECK(fz.skip_list().count(1) == 1);

    // Site 2's first probe was admitted; its later probes add no novelty.
    REQUIRE(fz.queue().size() == 1);
    CHECK(fz.queue()[0].entries[0].site_id == 2);
    CHECK(fz.queue()[0].novel_cells == std::vector<uint32_t>{200});
    CHECK(fz.queue()[0].provenance.kind == ProvenanceKind::SiteProbe);
    CHECK(fz.favored().count(0) == 1);

    // Discarded pre-connect runs never updated the novelty index.
    CHECK(fz.novelty().cells_seen() == 2);
    CHECK(fz.preconnect_discards() == 3);

    // The iteration stream covers every probe run.
    CHECK(reports.size() == 27);
    CHECK(reports.front().iteration == 1);
    CHECK(reports.back().iteration == 27);
}

TEST_CASE("init_queue: budget exhaustion leaves a resume cursor") {
    SchedulerKnobs knobs;
    knobs.probes_per_site = 2;
    Fuzzer fz(micro_manifest(), knobs, 7);
    fz.observe_baseline(map_with({1}));
    FakeExec exec;
    exec.fn = [&](const ProgramFile& p, orch::RunMode mode) {
        if (mode == orch::RunMode::Counting) {
            std::map<uint32_t, uint64_t> hits;
            for (const auto& e : p.entries) hits[e.site_id] = 1;
            return counting_run(std::move(hits));
        }
        return clean_run(map_with({1}));
    };
    auto stats = fz.init_queue(exec, 5, nullptr);
    CHECK_FALSE(stats.completed);
    CHECK(stats.resume_site_index == 2); // sites 1 and 2 probed (2 each), site 3 cut short
    CHECK(fz.iteration() == 5);
}

TEST_CASE("fuzz_one: novel children enter the queue, crashes deduplicate, discards stay out") {
    SchedulerKnobs knobs;
    knobs.probes_per_site = 1;
    knobs.crash_threshold = 1;
    Fuzzer fz(micro_manifest(), knobs, 9);
    fz.observe_baseline(map_with({10}));

    int phase = 0;
    FakeExec exec;
    exec.fn = [&](const ProgramFile& p, orch::RunMode mode) {
        if (mode == orch::RunMode::Counting) {
            std::map<uint32_t, uint64_t> hits;
            for (const auto& e : p.entries) hits[e.site_id] = 1;
            return counting_run(std::move(hits));
        }
        switch (phase) {
            case 0: return clean_run(map_with({10, 20})); // novel
            case 1: {
                orch::RunOutcome o;
                o.verdict = orch::Verdict::TargetCrash;
                o.crash_frames = {"f", "g", "h", "i", "j"};
                o.crash_bug = "B1_len_copy";
                o.coverage = map_with({10});
                return o;
            }
            case 2: {
                orch::RunOutcome o;
                o.verdict = orch::Verdict::WeirdPeerCrashPreConnect;
                o.coverage = map_with({10, 30, 40}); // would be novel, must be discarded
                return o;
            }
            default: return clean_run(map_with({10}));
        }
    };

    phase = 0;
    auto r0 = fz.fuzz_one(exec);
    CHECK(r0.novel);
    CHECK(r0.admitted_seq == 0);
    CHECK(fz.queue().size() == 1);

    phase = 1;
    auto r1 = fz.fuzz_one(exec);
    CHECK(r1.verdict == orch::Verdict::TargetCrash);
    CHECK(r1.crash_new);
    CHECK(fz.crashes().bucket_count() == 1);
    CHECK(fz.queue().size() == 1); // crashes are preserved as reproducers, not queued

    phase = 1;
    auto r2 = fz.fuzz_one(exec);
    CHECK_FALSE(r2.crash_new);
    CHECK(fz.crashes().reports().at(r2.crash_key).count == 2);

    phase = 2;
    size_t cells_before = fz.novelty().cells_seen();
    auto r3 = fz.fuzz_one(exec);
    CHECK(r3.verdict == orch::Verdict::WeirdPeerCrashPreConnect);
    CHECK(fz.novelty().cells_seen() == cells_before); // discard rule
    CHECK(fz.queue().size() == 1);
}

TEST_CASE("fuzz_one: full-loop determinism under a fixed seed") {
    auto run_campaign = [](uint64_t seed) {
        SchedulerKnobs knobs;
        Fuzzer fz(micro_manifest(), knobs, seed);
        fz.observe_baseline(map_with({0}));
        FakeExec exec;
        exec.fn = [](const ProgramFile& p, orch::RunMode mode) {
            // Outcome is a pure function of the program bytes.
            uint64_t h = 1469598103934665603ULL;
            for (const auto& e : p.entries) {
                h = (h ^ e.site_id) * 1099511628211ULL;
                for (uint8_t b : e.stream) h = (h ^ b) * 1099511628211ULL;
            }
            if (mode == orch::RunMode::Counting) {
                std::map<uint32_t, uint64_t> hits;
                for (const auto& e : p.entries) hits[e.site_id] = 1 + h % 3;
                return counting_run(std::move(hits));
            }
            if (h % 11 == 0) {
                orch::RunOutcome o;
                o.verdict = orch::Verdict::WeirdPeerCrashPreConnect;
                return o;
            }
            if (h % 7 == 0) {
                orch::RunOutcome o;
                o.verdict = orch::Verdict::TargetCrash;
                o.crash_frames = {"f" + std::to_string(h % 3), "g", "h"};
                o.coverage = map_with({static_cast<uint32_t>(h % 512)});
                return o;
            }
            return clean_run(map_with({0, static_cast<uint32_t>(h % 512)}));
        };

        std::ostringstream transcript;
        for (int i = 0; i < 100; ++i) {
            auto rep = fz.fuzz_one(exec);
            transcript << rep.iteration << ':' << orch::verdict_name(rep.verdict) << ':' << rep.novel
                       << ':' << rep.admitted_seq << ':' << rep.queue_len << ':' << rep.crash_buckets
                       << ':' << rep.novel_cells_total << ':' << rep.tried.str() << '\n';
        }
        return transcript.str();
    };

    std::string a = run_campaign(2024);
    std::string b = run_campaign(2024);
    CHECK(a == b);
    std::string c = run_campaign(2025);
    CHECK(a != c); // different seed explores differently
}

TEST_CASE("mutation closure: children satisfy the program invariants") {
    auto manifest = micro_manifest();
    Rng rng(31337);
    std::vector<FaultProgram> pool;
    pool.push_back(program_with({{1, {0x01}}}, 0));
    pool.push_back(program_with({{2, {0xFF, 0x00}}, {5, {1, 2, 3}}}, 1));

    for (int t = 0; t < 300; ++t) {
        const FaultProgram& parent = pool[rng.below(pool.size())];
        FaultProgram child;
        switch (rng.below(3)) {
            case 0: child = mutate_stream(parent, rng); break;
            case 1: {
                auto s = splice(parent, pool[rng.below(pool.size())], rng);
                if (!s) continue;
                child = std::move(*s);
                break;
            }
            default: {
                auto e = extend(parent, manifest, {9}, 8, rng);
                if (!e) continue;
                child = std::move(*e);
                break;
            }
        }
        CHECK_FALSE(child.entries.empty());
        std::set<uint32_t> seen;
        for (const auto& e : child.entries) CHECK(seen.insert(e.site_id).second); // no duplicate sites
        if (child.provenance.kind == ProvenanceKind::Extend) CHECK(seen.count(9) == 0);
        if (child.seq == -1 && t % 7 == 0) {
            child.seq = static_cast<int64_t>(pool.size());
            pool.push_back(child);
        }
    }
}
