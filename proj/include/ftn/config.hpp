#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ftn/fuzzer.hpp"
#include "ftn/orchestrator.hpp"
#include "ftn/process.hpp"

namespace ftn::cfg {

enum class Mode { Fault, Baseline, IdentityCheck, Reproduce };
const char* mode_name(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

// Raised for malformed or semantically invalid configs; carries the line or
// the section.key the problem was found at.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PeerEntry {
    std::string exe;
    std::string args;       // whitespace-separated, {ADDR}/{PORT} placeholders
    orch::Side side = orch::Side::Server;
    std::string env;        // semicolon-separated KEY=VALUE list
    int grace_ms = 500;

    bool operator==(const PeerEntry&) const = default;

    std::vector<std::string> split_args() const;
    std::vector<std::pair<std::string, std::string>> split_env() const;
};

// The campaign front-door configuration. Round-trips losslessly through the
// flat key-value file format: parse(serialize(c)) == c and serializing a
// parsed file is byte-stable.
struct CampaignConfig {
    Mode mode = Mode::Fault;
    uint64_t seed = 1;
    uint64_t iterations = 1000; // 0: no iteration budget
    uint64_t wall_time_s = 0;   // 0: no wall-clock budget
    int workers = 1;
    bool stop_on_crash = false;
    int identity_reps = 5;
    std::string transcript; // baseline mode: recorded session to replay
    std::string out_dir = "out";

    PeerEntry weird;
    PeerEntry target;

    fuzz::SchedulerKnobs sched;
    orch::Timeouts timeouts;
    proc::Transport transport = proc::Transport::Tcp;

    bool operator==(const CampaignConfig&) const = default;

    static CampaignConfig parse(const std::string& text); // throws ConfigError with line info
    std::string serialize() const;                         // canonical form
    static CampaignConfig load(const std::string& path);
    void save(const std::string& path) const;

    // Generic override: set("campaign.seed", "7"). Every CLI flag routes
    // through this, so each flag has a config-file equivalent by construction.
    void set(const std::string& section_key, const std::string& value); // throws ConfigError

    // Semantic validation; each message names the offending field.
    std::vector<std::string> validate() const;

    orch::PeerSpec weird_spec() const;
    orch::PeerSpec target_spec() const;
};

} // namespace ftn::cfg
