#pragma once

#include <cstdint>

#include "ftn/coverage.hpp"

namespace ftn::cov {

// Coverage map location passed by the orchestrator to the target peer.
inline constexpr const char* kEnvMapPath = "FTN_COV_PATH";

// Process-global recorder for the target peer. attach_from_env() maps the
// file named by FTN_COV_PATH with MAP_SHARED so counter updates land in the
// file even if the process is killed or aborts; the orchestrator reads the
// file only after the run has terminated. No-op (and cheap) when the
// environment variable is absent, so instrumented binaries run normally
// outside a campaign.
bool attach_from_env();
bool attach_file(const char* path);
void detach();

EdgeRecorder& recorder();

// Instrumentation entry: record the edge from the previous point to `loc`.
inline void point(uint64_t loc) { recorder().hit(loc); }

} // namespace ftn::cov
