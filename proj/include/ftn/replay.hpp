#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftn/coverage.hpp"
#include "ftn/fuzzer.hpp"
#include "ftn/orchestrator.hpp"
#include "ftn/rng.hpp"
#include "ftn/testbed/net.hpp"

namespace ftn::replay {

// A corpus entry of the transcript-replay baseline.
struct CorpusEntry {
    testbed::Transcript transcript;
    int64_t seq = -1;
    int64_t parent = -1; // -1: the recorded seed transcript
    uint64_t discovery_iter = 0;
    std::vector<uint32_t> novel_cells;
};

// Sends a transcript's client-direction records at the target in order,
// draining (and discarding) server replies with short receive timeouts.
// Used as the in-process client body of a server-only run. `refused` is set
// when the connection was refused even after the single retry.
void replay_transcript(const testbed::Transcript& t, const std::string& addr, uint16_t port,
                       proc::Transport transport, bool* refused = nullptr);

// Minimal AFLNet-style mutational replay fuzzer: the comparative control.
// Shares the mutation operators, novelty function, coverage runtime and
// timeout budget with the fault fuzzer so results isolate the strategy.
class ReplayFuzzer {
public:
    ReplayFuzzer(testbed::Transcript seed, uint64_t rng_seed);

    // Iteration 1 replays the unmutated seed; later iterations mutate one
    // client record of a uniformly chosen corpus entry.
    fuzz::IterationReport fuzz_one(const orch::PeerSpec& target, const orch::Timeouts& timeouts,
                                   const std::string& workdir, proc::Transport transport);

    uint64_t iteration() const { return iteration_; }
    const std::vector<CorpusEntry>& corpus() const { return corpus_; }
    const fuzz::CrashTable& crashes() const { return crashes_; }
    const cov::NoveltyIndex& novelty() const { return novelty_; }
    const CorpusEntry* last_admitted() const { return last_admitted_ < 0 ? nullptr : &corpus_[last_admitted_]; }

private:
    Rng rng_;
    std::vector<CorpusEntry> corpus_;
    cov::NoveltyIndex novelty_;
    fuzz::CrashTable crashes_;
    uint64_t iteration_ = 0;
    int64_t last_admitted_ = -1;
};

} // namespace ftn::replay
