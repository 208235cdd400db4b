#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ftn/bytes.hpp"
#include "ftn/fault_program.hpp"
#include "ftn/process.hpp"

namespace ftn::orch {

using proc::Transport;

enum class Verdict {
    CleanExit,
    TargetCrash,
    WeirdPeerCrashPreConnect,
    WeirdPeerCrashPostConnect,
    Timeout,
};

const char* verdict_name(Verdict v);
std::optional<Verdict> parse_verdict(const std::string& name);

enum class Role { WeirdPeer, TargetPeer };
enum class Side { Client, Server };

// Exit code a testbed server uses to report a failed bind; the orchestrator
// retries such runs on a fresh port instead of recording a verdict.
inline constexpr int kBindFailureExit = 12;

// Transcript recording request, honored by the testbed client.
inline constexpr const char* kEnvRecord = "FTN_RECORD";

struct PeerSpec {
    std::string exe;
    std::vector<std::string> args; // {ADDR} and {PORT} placeholders substituted per run
    Role role = Role::TargetPeer;
    Side side = Side::Server;
    std::vector<std::pair<std::string, std::string>> env;
    int startup_grace_ms = 500; // readiness fallback when the server never reports Ready
};

struct ExitStatus {
    bool spawned = false;
    bool signaled = false;
    int code = 0;   // exit code or terminating signal
    bool by_us = false; // terminated by the orchestrator

    bool crashed() const { return spawned && ((signaled && !by_us) || (!signaled && code != 0)); }
};

struct RunEvent {
    std::string what;
    int at_ms; // offset from server spawn
};

enum class RunMode { Off, Counting, Faulting };

struct RunOutcome {
    Verdict verdict = Verdict::CleanExit;
    ExitStatus target_exit;
    ExitStatus weird_exit;
    int duration_ms = 0;
    int ready_latency_ms = -1; // -1: readiness fell back to the grace timer
    Bytes coverage;            // empty when discarded (pre-connect weird crash)
    std::vector<std::string> crash_frames; // innermost first
    std::string crash_bug;                 // FTN-BUG id when present
    std::map<uint32_t, uint64_t> hits;     // counting runs only
    std::vector<RunEvent> events;
    std::string target_stderr;
};

struct Timeouts {
    int run_ms = 1000;   // whole-run budget
    int drain_ms = 200;  // grace for the surviving peer once the other exits
    int ready_ms = 500;  // readiness fallback when the server is uninstrumented

    bool operator==(const Timeouts&) const = default;
};

struct RunOptions {
    bool want_manifest = false;        // export the weird peer's site manifest
    std::string record_path;           // set FTN_RECORD on the weird peer
    bool keep_coverage_on_discard = false;
};

// Supervises one (weird peer, target peer) exchange at a time: spawns the
// server side first, spawns the client side once the server reports Ready
// (or after the grace timer), enforces the run timeout and the drain grace,
// classifies the outcome, and harvests coverage plus crash evidence.
class Orchestrator {
public:
    Orchestrator(PeerSpec weird, PeerSpec target, Timeouts timeouts, std::string workdir,
                 Transport transport = Transport::Tcp);

    RunOutcome run_once(const fault::ProgramFile& program, RunMode mode, const RunOptions& opts = {});

    const std::string& workdir() const { return workdir_; }
    std::string manifest_path() const { return workdir_ + "/manifest.tsv"; }
    const Timeouts& timeouts() const { return timeouts_; }

private:
    PeerSpec weird_;
    PeerSpec target_;
    Timeouts timeouts_;
    std::string workdir_;
    Transport transport_;
};

// Target-server-only supervision for the replay baseline: the caller plays
// the client itself. `client_body` runs in-process once the server is ready.
RunOutcome run_server_round(const PeerSpec& target_server, const Timeouts& timeouts,
                            const std::string& workdir, Transport transport,
                            const std::function<void(const std::string& addr, uint16_t port)>& client_body);

// Parses the testbed's machine-readable crash record from a diagnostic
// stream: a `FTN-BUG <id>` line followed by `FRAME <name>` lines, innermost
// first. Unparseable input yields an empty frame list.
std::vector<std::string> parse_crash_record(const std::string& diagnostics, std::string* bug_id = nullptr);

} // namespace ftn::orch
