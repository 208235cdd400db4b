#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ftn/fault_program.hpp"
#include "ftn/fault_site.hpp"
#include "ftn/fault_stream.hpp"

namespace ftn::fault {

enum class Mode {
    Off,      // identity behavior, no hit-count output
    Counting, // identity behavior, hit counts exported
    Faulting, // streams applied
};

// Outcome of a CallEntry site application.
struct CallAction {
    bool skip = false;
    uint32_t index = 0; // valid when !skip; 0 = original callee

    bool operator==(const CallAction&) const = default;
};

// Environment variables understood by init_from_env(); the orchestrator
// sets these on the weird peer per run.
inline constexpr const char* kEnvMode = "FTN_MODE";            // off|counting|faulting
inline constexpr const char* kEnvProgram = "FTN_PROGRAM";      // fault program file
inline constexpr const char* kEnvHitsOut = "FTN_HITS_OUT";     // per-site hit counts, written at exit
inline constexpr const char* kEnvManifestOut = "FTN_MANIFEST_OUT"; // site manifest, written at seal

// The in-process fault-injection runtime linked into a weird peer. Sites are
// registered once at startup, the runtime is sealed, and afterwards each
// instrumented location routes its value/branch/switch/call through the
// apply functions below. Single-threaded by contract.
class Runtime {
public:
    using Handle = uint32_t;

    Runtime() = default;

    // Registration. Throws std::runtime_error on duplicate site ids,
    // invalid descriptors, or registration after seal().
    Handle register_site(const FaultSiteDescriptor& desc);
    void register_call_table(const std::string& arity_class, std::vector<std::string> entries);

    // Freezes registration and exports the manifest if configured.
    void seal();
    bool sealed() const { return sealed_; }

    // Test/config entry points. configure() replaces any program loaded so far.
    void configure(Mode mode, const ProgramFile* program);
    void init_from_env();

    Mode mode() const { return mode_; }

    // Fault application. All are identity when the mode is not Faulting,
    // when the site has no stream, or when its stream is exhausted.
    uint64_t value(Handle h, uint64_t original);
    bool branch(Handle h, bool condition);
    uint32_t switch_case(Handle h, uint32_t original_index, uint32_t case_count);
    CallAction call(Handle h, uint32_t table_len);

    // Calibration support.
    std::map<uint32_t, uint64_t> hit_counts() const; // site_id -> hits this run
    uint64_t hits_for(uint32_t site_id) const;       // 0 for unknown/never-hit sites
    uint64_t bits_consumed(Handle h) const;
    void reset_run(); // clears hits and stream cursors

    std::string manifest_text() const;
    std::string hits_text() const;

    // Writes the hits file if FTN_HITS_OUT (or set_hits_path) is configured.
    // Installed as an atexit hook by init_from_env().
    void flush_outputs();
    void set_hits_path(std::string path) { hits_path_ = std::move(path); }
    void set_manifest_path(std::string path) { manifest_path_ = std::move(path); }

    size_t site_count() const { return sites_.size(); }
    const FaultSiteDescriptor& descriptor(Handle h) const { return sites_[h].desc; }

    static Runtime& global();

private:
    struct Site {
        FaultSiteDescriptor desc;
        FaultStream stream;
        bool has_stream = false;
        uint64_t hits = 0;
    };

    uint64_t take_bits(Site& s, unsigned n_bits);

    std::vector<Site> sites_;
    std::map<uint32_t, Handle> by_id_;
    std::map<std::string, std::vector<std::string>> call_tables_;
    Mode mode_ = Mode::Off;
    bool sealed_ = false;
    std::string hits_path_;
    std::string manifest_path_;
};

// Parses a manifest produced by Runtime::manifest_text().
std::vector<FaultSiteDescriptor> parse_manifest(const std::string& text);

// Parses a hits file produced by Runtime::hits_text().
std::map<uint32_t, uint64_t> parse_hits(const std::string& text);

} // namespace ftn::fault
