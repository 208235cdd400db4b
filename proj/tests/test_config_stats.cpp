#include <doctest.h>

#include <cstdio>

#include "ftn/campaign.hpp"
#include "ftn/config.hpp"
#include "ftn/stats.hpp"
#include "test_support.hpp"

using namespace ftn;

TEST_CASE("config: defaults round-trip losslessly and serialization is byte-stable") {
    cfg::CampaignConfig c;
    c.weird.exe = "./tinychat-client";
    c.weird.args = "--port {PORT} --seed 5";
    c.weird.side = orch::Side::Client;
    c.target.exe = "./tinychat-server";
    c.target.args = "--port {PORT} --seed 5";

    std::string text = c.serialize();
    cfg::CampaignConfig parsed = cfg::CampaignConfig::parse(text);
    CHECK(parsed == c);
    CHECK(parsed.serialize() == text);
}

TEST_CASE("config: every field survives a round trip") {
    cfg::CampaignConfig c;
    c.mode = cfg::Mode::Baseline;
    c.seed = 987654321;
    c.iterations = 0;
    c.wall_time_s = 3600;
    c.workers = 4;
    c.stop_on_crash = true;
    c.identity_reps = 9;
    c.transcript = "seed.transcript";
    c.out_dir = "campaign-out";
    c.weird.exe = "/bin/wp";
    c.weird.args = "--host {ADDR} --port {PORT}";
    c.weird.side = orch::Side::Client;
    c.weird.env = "A=1;B=two";
    c.weird.grace_ms = 123;
    c.target.exe = "/bin/tp";
    c.target.args = "--port {PORT}";
    c.target.env = "C=3";
    c.sched.probes_per_site = 5;
    c.sched.crash_threshold = 4;
    c.sched.p_favored = 0.25;
    c.sched.weight_stream = 2;
    c.sched.weight_splice = 3;
    c.sched.weight_extend = 4;
    c.sched.dormant_weight = 0.5;
    c.sched.default_probe_bytes = 12;
    c.timeouts.run_ms = 750;
    c.timeouts.drain_ms = 80;
    c.timeouts.ready_ms = 350;
    c.transport = proc::Transport::Udp;

    CHECK(cfg::CampaignConfig::parse(c.serialize()) == c);
}

TEST_CASE("config: parse errors carry line numbers, set() names the field") {
    CHECK_THROWS_WITH_AS(cfg::CampaignConfig::parse("[campaign]\nbogus = 1\n"),
                         doctest::Contains("line 2"), cfg::ConfigError);
    CHECK_THROWS_WITH_AS(cfg::CampaignConfig::parse("[campaign]\nseed = banana\n"),
                         doctest::Contains("campaign.seed"), cfg::ConfigError);
    CHECK_THROWS_WITH_AS(cfg::CampaignConfig::parse("no equals sign"),
                         doctest::Contains("line 1"), cfg::ConfigError);

    cfg::CampaignConfig c;
    CHECK_THROWS_AS(c.set("nonsense.key", "1"), cfg::ConfigError);
    c.set("campaign.seed", "17");
    CHECK(c.seed == 17);
    c.set("scheduler.p_favored", "0.5");
    CHECK(c.sched.p_favored == doctest::Approx(0.5));
}

TEST_CASE("config: comments and blank lines are tolerated") {
    auto c = cfg::CampaignConfig::parse("# header comment\n\n[campaign]\n# inner\nseed = 4\n");
    CHECK(c.seed == 4);
}

TEST_CASE("config: validation messages name the offending fields") {
    cfg::CampaignConfig c; // missing exes, fault mode
    c.iterations = 0;
    c.wall_time_s = 0;
    auto errs = c.validate();
    bool budget = false, weird = false, target = false;
    for (const auto& e : errs) {
        if (e.find("budget") != std::string::npos) budget = true;
        if (e.find("weird.exe") != std::string::npos) weird = true;
        if (e.find("target.exe") != std::string::npos) target = true;
    }
    CHECK(budget);
    CHECK(weird);
    CHECK(target);

    c.weird.exe = "wp";
    c.target.exe = "tp";
    c.iterations = 10;
    c.weird.side = orch::Side::Client;
    CHECK(c.validate().empty());
}

TEST_CASE("config: peer env splitting") {
    cfg::PeerEntry p;
    p.env = "A=1;B=x=y;";
    auto env = p.split_env();
    REQUIRE(env.size() == 2);
    CHECK(env[0] == std::pair<std::string, std::string>{"A", "1"});
    CHECK(env[1] == std::pair<std::string, std::string>{"B", "x=y"});
    p.env = "BROKEN";
    CHECK_THROWS_AS(p.split_env(), cfg::ConfigError);
}

TEST_CASE("stats: writer/reader round trip and schema validation") {
    std::string dir = ftn_test::fresh_dir("/tmp", "ftn-stats");
    ensure_dir(dir);
    std::string path = dir + "/stats.csv";
    {
        stats::Writer w(path);
        w.row({1, 5, 0, 0, 10, "CleanExit"});
        w.row({2, 9, 1, 0, 12, "TargetCrash"});
    }
    auto rows = stats::read_csv(path);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].iteration == 1);
    CHECK(rows[0].novel_cells_total == 10);
    CHECK(rows[1].verdict == "TargetCrash");

    write_file(dir + "/bad.csv", std::string("wrong,header\n1,2\n"));
    CHECK_THROWS_WITH_AS(stats::read_csv(dir + "/bad.csv"), doctest::Contains("bad.csv"),
                         std::runtime_error);
}

TEST_CASE("stats: percentile matches the spreadsheet convention") {
    // Fixture of 10 values; expectations computed independently:
    // sorted = 1 1 2 3 3 4 5 5 6 9; p17 = 1.53, median = 3.5, p83 = 5.47.
    std::vector<double> vals = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
    CHECK(stats::percentile(vals, 0.17) == doctest::Approx(1.53));
    CHECK(stats::percentile(vals, 0.5) == doctest::Approx(3.5));
    CHECK(stats::percentile(vals, 0.83) == doctest::Approx(5.47));
    CHECK(stats::percentile({42}, 0.5) == doctest::Approx(42));
}

TEST_CASE("stats: merge of a single run is the run itself") {
    std::vector<stats::Row> run = {{1, 0, 0, 0, 5, "CleanExit"}, {2, 0, 0, 0, 8, "CleanExit"}};
    auto merged = stats::merge({run});
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].median == 5);
    CHECK(merged[0].p17 == 5);
    CHECK(merged[1].p83 == 8);
}

TEST_CASE("stats: merge medians across runs, aligned by iteration") {
    std::vector<stats::Row> r1 = {{1, 0, 0, 0, 1, "CleanExit"}, {2, 0, 0, 0, 1, "CleanExit"}};
    std::vector<stats::Row> r2 = {{1, 0, 0, 0, 2, "CleanExit"}, {2, 0, 0, 0, 2, "CleanExit"}};
    std::vector<stats::Row> r3 = {{1, 0, 0, 0, 3, "CleanExit"}}; // shorter run truncates the merge
    auto merged = stats::merge({r1, r2, r3});
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].median == 2);

    std::string csv = stats::merged_to_csv(merged);
    CHECK(csv.find(stats::kMergedHeader) == 0);
    CHECK(csv.find("1,2,") != std::string::npos);
}

TEST_CASE("campaign: corpus entry naming") {
    CHECK(campaign::entry_file_name(7, "probe:s3", 42) == "id-000007,src-probe:s3,time-000042");
    CHECK(campaign::entry_file_name(0, "splice:1+2", 9) == "id-000000,src-splice:1+2,time-000009");
}

TEST_CASE("campaign: crash sidecar round trip") {
    fuzz::CrashReport r;
    r.bucket_key = {"a", "b", "c", "-", "-"};
    r.bug_id = "B2_dup_overflow";
    r.count = 3;
    r.first_seen = 17;
    std::string text = campaign::crash_sidecar_text(r);
    CHECK(campaign::parse_sidecar_bucket(text) == "a|b|c|-|-");
    CHECK(campaign::parse_sidecar_bug(text) == "B2_dup_overflow");
}
