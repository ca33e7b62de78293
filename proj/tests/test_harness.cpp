// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <dropmuon/harness/config.hpp>
#include <dropmuon/harness/experiment.hpp>
#include <dropmuon/harness/verify.hpp>

using namespace dropmuon;
using namespace dropmuon::harness;
namespace fs = std::filesystem;

namespace {

json small_config() {
    return json::parse(R"({
      "problem": {"type": "separable_quadratic", "shapes": [[3, 2], [2, 2], [2, 3]],
                  "curvature": [0.5, 1.0, 4.0], "init_scale": 1.0, "seed": 3},
      "iterations": 25,
      "seeds": [1, 2],
      "cost": {"c_ov": 0.5, "c": [1, 1, 1]},
      "targets": [1e-2],
      "variants": [
        {"name": "full", "scheme": {"type": "full"}},
        {"name": "rpt", "scheme": {"type": "rpt", "p": [0.2, 0.3, 0.5]}}
      ],
      "baseline": "full"
    })");
}

std::string config_error_path(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.path;
    }
    return "<no error>";
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("dropmuon_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int status;
    std::string out;
};

CliResult cli(const std::string& args) {
    const auto dir = fs::temp_directory_path();
    const auto out = dir / "dropmuon_cli_stdout.txt";
    const std::string cmd = std::string("\"") + DROPMUON_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2>&1";
    const int raw = std::system(cmd.c_str());
    const int status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return {status, slurp(out)};
}

std::string sample(const std::string& name) { return std::string(DROPMUON_SAMPLES_DIR) + "/" + name; }

}  // namespace

TEST(Config, ParsesSmallConfig) {
    const auto c = config_from_json(small_config());
    EXPECT_EQ(c.variants.size(), 2u);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_EQ(c.baseline, 0u);
    EXPECT_EQ(c.norms, std::vector<NormKind>(3, NormKind::Spectral));
}

TEST(Config, ErrorsCarryFieldPaths) {
    auto j = small_config();
    j["variants"][0]["name"] = "bad name";
    EXPECT_EQ(config_error_path(j), "$.variants[0].name");

    j = small_config();
    j["seeds"] = {1, 1};
    EXPECT_EQ(config_error_path(j), "$.seeds[1]");

    j = small_config();
    j["problem"]["type"] = "nope";
    EXPECT_EQ(config_error_path(j), "$.problem.type");

    j = small_config();
    j.erase("iterations");
    EXPECT_EQ(config_error_path(j), "$.iterations");

    j = small_config();
    j["variants"][1]["name"] = "full";
    EXPECT_EQ(config_error_path(j), "$.variants[1].name");

    j = small_config();
    j["baseline"] = "missing";
    EXPECT_EQ(config_error_path(j), "$.baseline");

    j = small_config();
    j["variants"][1]["scheme"]["p"] = {0.5, 0.5};
    EXPECT_EQ(config_error_path(j), "$.variants[1].scheme");

    j = small_config();
    j["newton_schulz"] = {{"coefficients", "fast"}};
    EXPECT_EQ(config_error_path(j), "$.newton_schulz.coefficients");
}

TEST(Config, NewtonSchulzPresets) {
    auto j = small_config();
    j["newton_schulz"] = {{"coefficients", "banded"}, {"iterations", 7}};
    const auto c = config_from_json(j);
    EXPECT_EQ(c.newton_schulz.iterations, 7);
    EXPECT_EQ(c.newton_schulz.coefficients, NewtonSchulzConfig::banded().coefficients);
}

TEST(Experiment, ZeroIterationsGivesHeaderOnlyCsv) {
    auto j = small_config();
    j["iterations"] = 0;
    const auto dir = scratch("k0");
    run_experiment(config_from_json(j), dir.string(), false);
    EXPECT_EQ(slurp(dir / run_file_name("full", 1)), csv_header() + "\n");
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
    EXPECT_TRUE(fs::exists(dir / "columns.json"));
}

TEST(Experiment, RerunIsByteIdentical) {
    const auto c = config_from_json(small_config());
    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    run_experiment(c, a.string(), false);
    run_experiment(c, b.string(), false);
    for (const auto* name : {"full_seed1.csv", "full_seed2.csv", "rpt_seed1.csv", "rpt_seed2.csv", "summary.json"})
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
}

TEST(Experiment, CsvRoundTripsRunValues) {
    const auto c = config_from_json(small_config());
    const auto dir = scratch("roundtrip");
    const auto o = run_experiment(c, dir.string(), false);
    const auto t = read_csv((dir / run_file_name("rpt", 2)).string());
    const auto& run = o.runs[1][1];
    ASSERT_EQ(t.rows.size(), run.steps.size());
    ASSERT_EQ(t.header[1], "f");
    ASSERT_EQ(t.header[7], "cumulative_units");
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        EXPECT_EQ(parse_number(t.rows[k][1]), run.steps[k].report.f_after);
        EXPECT_EQ(parse_number(t.rows[k][7]), run.steps[k].cumulative_units);
        const auto active_min = static_cast<std::size_t>(parse_number(t.rows[k][4]));
        EXPECT_EQ(active_min, run.steps[k].report.active.min_index() + 1);
    }
    // Quadratics do not count multiply-accumulates.
    EXPECT_EQ(t.rows[0][8], "");
}

TEST(Experiment, TimeToTargetFindsFirstCrossing) {
    const auto c = config_from_json(small_config());
    const auto o = run_experiment(c, "", false);
    const auto& run = o.runs[0][0];
    const double f_star = *c.problem->optimal_value();
    const double thr = 0.5 * (run.initial_value - f_star);
    const auto hit = time_to_target(run, f_star, thr);
    ASSERT_TRUE(hit.reached);
    ASSERT_GE(hit.iterations, 1u);
    EXPECT_LE(run.steps[hit.iterations - 1].report.f_after - f_star, thr);
    for (std::size_t k = 0; k + 1 < hit.iterations; ++k) EXPECT_GT(run.steps[k].report.f_after - f_star, thr);
    EXPECT_EQ(hit.units, run.steps[hit.iterations - 1].cumulative_units);

    EXPECT_TRUE(time_to_target(run, f_star, run.initial_value - f_star).reached);
    EXPECT_EQ(time_to_target(run, f_star, run.initial_value - f_star).iterations, 0u);
    EXPECT_FALSE(time_to_target(run, f_star, -1.0).reached);
}

TEST(Verify, UnknownSuiteThrows) { EXPECT_THROW(run_suite("nope"), std::invalid_argument); }

TEST(NumberFormat, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5})
        EXPECT_EQ(parse_number(format_number(v)), v);
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_THROW(parse_number("1.5x"), std::invalid_argument);
}

TEST(Cli, RunWritesCsvsAndSummary) {
    const auto dir = scratch("cli_run");
    const auto r = cli("run --config \"" + sample("experiment.json") + "\" --seed 1 --out \"" + dir.string() + "\"");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "full_seed1.csv"));
    EXPECT_TRUE(fs::exists(dir / "rpt-opt_seed1.csv"));
    EXPECT_FALSE(fs::exists(dir / "full_seed2.csv"));
    const auto summary = read_json_file((dir / "summary.json").string());
    EXPECT_TRUE(summary.contains("variants"));
}

TEST(Cli, OptimalProbsPrintsVerdict) {
    const auto r = cli("optimal-probs --config \"" + sample("table.json") + "\"");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("p = 1 0 0"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("verdict: full-network optimal"), std::string::npos) << r.out;
}

TEST(Cli, MarginalsAndCost) {
    auto r = cli("marginals --config \"" + sample("marginals.json") + "\" --draws 2000");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_EQ(r.out.rfind("layer,F_analytic", 0), 0u) << r.out;

    r = cli("cost --config \"" + sample("cost.json") + "\"");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("\"total_cost\""), std::string::npos) << r.out;
}

TEST(Cli, VerifyGeometryPasses) {
    const auto r = cli("verify --suite geometry");
    EXPECT_EQ(r.status, 0) << r.out;
}

TEST(Cli, BadConfigExitsWithTwo) {
    const auto dir = scratch("cli_bad");
    auto j = small_config();
    j["seeds"] = json::array();
    std::ofstream(dir / "bad.json") << j.dump();
    const auto r = cli("run --config \"" + (dir / "bad.json").string() + "\"");
    EXPECT_EQ(r.status, 2) << r.out;
    EXPECT_NE(r.out.find("$.seeds"), std::string::npos) << r.out;
}
