#include "ftn/replay.hpp"

#include <cerrno>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "ftn/mutation.hpp"

namespace ftn::replay {

namespace {

constexpr int kDrainMs = 3;      // per-record opportunistic reply drain
constexpr int kFinalDrainMs = 3; // after the last record

void drain_and_discard(int fd, int timeout_ms) {
    struct pollfd p{fd, POLLIN, 0};
    while (::poll(&p, 1, timeout_ms) > 0) {
        char buf[4096];
        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) return;
        timeout_ms = 0; // only sweep what is already queued
    }
}

int connect_once(const std::string& addr, uint16_t port, proc::Transport transport) {
    return transport == proc::Transport::Tcp ? testbed::tcp_connect_peer(addr, port)
                                             : testbed::udp_connect_peer(addr, port);
}

} // namespace

void replay_transcript(const testbed::Transcript& t, const std::string& addr, uint16_t port,
                       proc::Transport transport, bool* refused) {
    if (refused) *refused = false;
    int fd = connect_once(addr, port, transport);
    if (fd < 0) fd = connect_once(addr, port, transport); // refused: retry once
    if (fd < 0) {
        if (refused) *refused = true;
        return;
    }
    for (const auto& rec : t.records) {
        if (rec.dir != 0) continue; // only client-direction records are sent
        ssize_t n = ::send(fd, rec.bytes.data(), rec.bytes.size(), MSG_NOSIGNAL);
        if (n < 0) break; // server closed on us: iteration over
        drain_and_discard(fd, kDrainMs);
    }
    drain_and_discard(fd, kFinalDrainMs);
    ::close(fd);
}

ReplayFuzzer::ReplayFuzzer(testbed::Transcript seed, uint64_t rng_seed)
    : rng_(rng_seed), novelty_(cov::kMapSize) {
    CorpusEntry e;
    e.transcript = std::move(seed);
    e.seq = 0;
    corpus_.push_back(std::move(e));
}

fuzz::IterationReport ReplayFuzzer::fuzz_one(const orch::PeerSpec& target, const orch::Timeouts& timeouts,
                                             const std::string& workdir, proc::Transport transport) {
    last_admitted_ = -1;

    testbed::Transcript child;
    int64_t parent_seq;
    if (iteration_ == 0) {
        // First iteration: the unmutated seed, the replay fuzzer's baseline.
        child = corpus_[0].transcript;
        parent_seq = 0;
    } else {
        const CorpusEntry& parent = corpus_[rng_.below(corpus_.size())];
        parent_seq = parent.seq;
        child = parent.transcript;
        auto client_records = child.client_record_indices();
        if (!client_records.empty()) {
            size_t which = client_records[rng_.below(client_records.size())];
            mut::apply(child.records[which].bytes, rng_);
        }
    }

    bool refused = false;
    orch::RunOutcome out = orch::run_server_round(target, timeouts, workdir, transport,
                                                  [&](const std::string& addr, uint16_t port) {
                                                      replay_transcript(child, addr, port, transport, &refused);
                                                  });
    ++iteration_;

    fuzz::IterationReport rep;
    rep.iteration = iteration_;
    rep.verdict = out.verdict;
    rep.tried = {fuzz::ProvenanceKind::StreamMutation, parent_seq, -1, 0};

    if (out.verdict == orch::Verdict::TargetCrash) {
        fuzz::FaultProgram none; // replay reproducers are transcripts, kept by the campaign layer
        auto up = crashes_.record(out.crash_frames, none, out.crash_bug, iteration_);
        rep.crash_new = up.is_new;
        rep.crash_key = up.key;
        if (!out.coverage.empty()) novelty_.observe(out.coverage);
    } else if (out.verdict != orch::Verdict::Timeout && !refused && !out.coverage.empty()) {
        auto obs = novelty_.observe(out.coverage);
        rep.novel = obs.is_novel;
        if (obs.is_novel && iteration_ > 1) {
            CorpusEntry e;
            e.transcript = std::move(child);
            e.seq = static_cast<int64_t>(corpus_.size());
            e.parent = parent_seq;
            e.discovery_iter = iteration_;
            e.novel_cells = std::move(obs.novel_cells);
            rep.admitted_seq = e.seq;
            last_admitted_ = e.seq;
            corpus_.push_back(std::move(e));
        }
    }

    rep.queue_len = corpus_.size();
    rep.crash_buckets = crashes_.bucket_count();
    rep.novel_cells_total = novelty_.cells_seen();
    return rep;
}

} // namespace ftn::replay
