#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ftn/campaign.hpp"
#include "ftn/stats.hpp"

using namespace ftn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides; // section.key=value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "campaign config file");
    cmd->add_option("--set", opts.overrides, "override a config option (section.key=value)")
        ->take_all();
}

cfg::CampaignConfig load_config(const CommonOpts& opts) {
    cfg::CampaignConfig c;
    if (!opts.config_path.empty()) c = cfg::CampaignConfig::load(opts.config_path);
    for (const auto& kv : opts.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw cfg::ConfigError("--set expects section.key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

int run_command(const cfg::CampaignConfig& config) {
    switch (config.mode) {
        case cfg::Mode::Fault: {
            campaign::Summary s = campaign::run_fault_campaign(config);
            std::fputs(s.text().c_str(), stdout);
            return kExitOk;
        }
        case cfg::Mode::Baseline: {
            campaign::Summary s = campaign::run_baseline_campaign(config);
            std::fputs(s.text().c_str(), stdout);
            return kExitOk;
        }
        case cfg::Mode::IdentityCheck: {
            campaign::IdentityReport r = campaign::run_identity_check(config);
            if (r.stable) {
                std::printf("stable (%d identical repetitions)\n", r.reps);
                return kExitOk;
            }
            std::printf("unstable: %s\n", r.detail.c_str());
            return kExitRuntime;
        }
        case cfg::Mode::Reproduce:
            throw cfg::ConfigError("campaign.mode=reproduce needs the 'reproduce <entry>' subcommand");
    }
    return kExitRuntime;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"faultnet: fault-injection fuzzing for network peers"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    auto* run_cmd = app.add_subcommand("run", "run a campaign (mode from config: fault|baseline|identity-check)");
    add_common(run_cmd, run_opts);
    std::string mode_flag, out_flag, transcript_flag;
    uint64_t seed_flag = 0, iters_flag = 0;
    int workers_flag = 0;
    bool stop_on_crash_flag = false;
    run_cmd->add_option("--mode", mode_flag, "fault|baseline|identity-check");
    run_cmd->add_option("--seed", seed_flag, "rng seed");
    run_cmd->add_option("--iterations", iters_flag, "iteration budget");
    run_cmd->add_option("--out", out_flag, "output directory");
    run_cmd->add_option("--workers", workers_flag, "parallel workers");
    run_cmd->add_option("--transcript", transcript_flag, "seed transcript (baseline mode)");
    run_cmd->add_flag("--stop-on-crash", stop_on_crash_flag, "stop at the first target crash");

    CommonOpts id_opts;
    auto* id_cmd = app.add_subcommand("identity-check", "verify identity runs are byte-stable");
    add_common(id_cmd, id_opts);
    int reps_flag = 0;
    id_cmd->add_option("--reps", reps_flag, "repetitions to compare");

    CommonOpts repro_opts;
    auto* repro_cmd = app.add_subcommand("reproduce", "re-run a crash-directory entry 5 times");
    add_common(repro_cmd, repro_opts);
    std::string entry_path;
    int repro_runs = 5;
    repro_cmd->add_option("entry", entry_path, "crash entry (fault program file)")->required();
    repro_cmd->add_option("--runs", repro_runs, "number of re-runs");

    auto* stats_cmd = app.add_subcommand("stats", "merge per-run stats CSVs into a median/percentile series");
    std::vector<std::string> stats_inputs;
    std::string stats_out;
    stats_cmd->add_option("csv", stats_inputs, "stats.csv files (shared schema)")->required();
    stats_cmd->add_option("-o,--out", stats_out, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run_cmd->parsed()) {
            cfg::CampaignConfig c = load_config(run_opts);
            if (!mode_flag.empty()) c.set("campaign.mode", mode_flag);
            if (run_cmd->count("--seed")) c.set("campaign.seed", std::to_string(seed_flag));
            if (run_cmd->count("--iterations")) c.set("campaign.iterations", std::to_string(iters_flag));
            if (run_cmd->count("--out")) c.set("campaign.out", out_flag);
            if (run_cmd->count("--workers")) c.set("campaign.workers", std::to_string(workers_flag));
            if (run_cmd->count("--transcript")) c.set("campaign.transcript", transcript_flag);
            if (stop_on_crash_flag) c.set("campaign.stop_on_crash", "true");
            return run_command(c);
        }
        if (id_cmd->parsed()) {
            cfg::CampaignConfig c = load_config(id_opts);
            c.set("campaign.mode", "identity-check");
            if (id_cmd->count("--reps")) c.set("campaign.identity_reps", std::to_string(reps_flag));
            return run_command(c);
        }
        if (repro_cmd->parsed()) {
            cfg::CampaignConfig c = load_config(repro_opts);
            campaign::ReproduceReport r = campaign::reproduce(c, entry_path, repro_runs);
            std::fputs(r.text().c_str(), stdout);
            return kExitOk;
        }
        if (stats_cmd->parsed()) {
            std::vector<std::vector<stats::Row>> runs;
            for (const auto& path : stats_inputs) runs.push_back(stats::read_csv(path));
            std::string csv = stats::merged_to_csv(stats::merge(runs));
            if (stats_out.empty())
                std::fputs(csv.c_str(), stdout);
            else
                write_file(stats_out, csv);
            return kExitOk;
        }
    } catch (const cfg::ConfigError& e) {
        std::fprintf(stderr, "faultnet: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "faultnet: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
