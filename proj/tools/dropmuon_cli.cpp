// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors
//
// Command-line driver: run, optimal-probs, verify, marginals, cost.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <dropmuon/dropmuon.hpp>
#include <dropmuon/harness/config.hpp>
#include <dropmuon/harness/experiment.hpp>
#include <dropmuon/harness/io.hpp>
#include <dropmuon/harness/verify.hpp>

namespace dm = dropmuon;
namespace hx = dropmuon::harness;
using hx::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void write_text(const std::string& dir, const std::string& file, const std::string& text) {
    std::filesystem::create_directories(dir);
    std::ofstream f(std::filesystem::path(dir) / file, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("failed writing " + file + " in " + dir);
}

std::string vector_line(const std::vector<double>& p) {
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + hx::format_number(p[i]);
    return s;
}

// ---------------------------------------------------------------------------

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed, const std::string& out) {
    auto cfg = hx::load_config(config_path);
    if (seed) cfg.seeds = {*seed};
    const std::string dir = out.empty() ? cfg.output : out;
    const auto o = hx::run_experiment(cfg, dir);
    std::cout << "wrote " << cfg.variants.size() * cfg.seeds.size() << " run file(s), columns.json and summary.json to "
              << dir << "\n";
    for (const auto& r : o.summary["ratios"]) {
        std::cout << r["variant"].get<std::string>() << ": predicted speedup "
                  << (r["predicted"].is_null() ? std::string("n/a") : hx::format_number(r["predicted"].get<double>()));
        for (const auto& t : r["targets"]) {
            std::cout << "; gap <= " << hx::format_number(t["threshold"].get<double>()) << ": ";
            if (t["arithmetic_mean"].is_null()) std::cout << "not reached";
            else
                std::cout << "arithmetic " << hx::format_number(t["arithmetic_mean"].get<double>()) << ", geometric "
                          << (t["geometric_mean"].is_null() ? std::string("n/a")
                                                            : hx::format_number(t["geometric_mean"].get<double>()));
        }
        std::cout << "\n";
    }
    int status = 0;
    for (const auto& v : o.summary["variants"])
        for (const auto& run : v["runs"]) {
            const bool bad = (run["monotone_violations"].is_number() && run["monotone_violations"].get<int>() > 0) ||
                             (run["descent_bound_violations"].is_number() && run["descent_bound_violations"].get<int>() > 0);
            if (bad) {
                std::cerr << "verification failed: variant " << v["name"].get<std::string>() << ", seed "
                          << run["seed"].get<std::uint64_t>() << "\n";
                status = kExitFailure;
            }
        }
    return status;
}

// ---------------------------------------------------------------------------

int cmd_optimal_probs(const std::string& config_path, const std::string& table_path, const std::string& cost_path,
                      const std::string& regime_name, const std::string& out) {
    json doc = config_path.empty() ? json::object() : hx::read_json_file(config_path);
    if (!table_path.empty()) doc["table"] = hx::read_json_file(table_path);
    if (!cost_path.empty()) doc["cost"] = hx::read_json_file(cost_path);
    const auto table = hx::table_from_json(hx::require(doc, "table", "$"), "$.table");
    const std::size_t b = table.layers();
    const auto cp = doc.contains("cost") ? hx::cost_from_json(doc["cost"], b, "$.cost") : dm::CostParams::uniform(b, 0.0, 1.0, 0.0);
    const auto regime = dm::cost_regime_from_string(regime_name);

    json out_j{{"schema_version", hx::kSchemaVersion}, {"regime", std::string(dm::to_string(regime))}};
    std::vector<double> p;
    bool full_optimal = false;
    if (table.mode() == dm::SmoothnessTable::Mode::Partition) {
        const auto opt = dm::optimal_partition_probs(table.blocks(), table, regime, cp);
        p = opt.p;
        out_j["scheme"] = "partitioned";
        out_j["block_max"] = opt.block_max;
        out_j["minimal_cost"] = opt.minimal_cost;
        out_j["dual"] = opt.dual;
    } else if (regime == dm::CostRegime::Smooth) {
        const auto rec = dm::optimal_rpt_probs_smooth(table, cp);
        p = rec.p;
        full_optimal = dm::full_network_optimal_smooth(table);
        out_j["scheme"] = "rpt";
        out_j["q"] = rec.q;
        out_j["objective"] = dm::RptObjective(table, cp, regime)(p);
    } else {
        const auto sol = dm::optimal_rpt_probs_l0l1(table, cp, regime);
        p = sol.p;
        full_optimal = !sol.beat_full_network;
        out_j["scheme"] = "rpt";
        out_j["objective"] = sol.objective;
        out_j["full_network_objective"] = sol.full_network_objective;
        out_j["layer1_l1_is_max"] = sol.full_network_condition;
        out_j["grid_resolution"] = sol.grid_resolution;
    }
    out_j["p"] = p;
    if (table.mode() == dm::SmoothnessTable::Mode::RptCutoff) {
        out_j["full_network_optimal"] = full_optimal;
        out_j["verdict"] = full_optimal ? "full-network optimal" : "not full-network optimal";
    }
    std::cout << "p = " << vector_line(p) << "\n";
    if (out_j.contains("verdict")) std::cout << "verdict: " << out_j["verdict"].get<std::string>() << "\n";
    std::cout << out_j.dump(2) << "\n";
    if (!out.empty()) write_text(out, "optimal_probs.json", out_j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite, const std::string& out) {
    const auto results = hx::run_suite(suite);
    const auto report = hx::suite_report(suite, results);
    for (const auto& r : results)
        std::cerr << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << " (" << hx::format_number(r.seconds) << " s): "
                  << r.detail << "\n";
    std::cout << report.dump(2) << "\n";
    if (!out.empty()) write_text(out, "verify_" + suite + ".json", report.dump(2) + "\n");
    return report["passed"].get<bool>() ? 0 : kExitFailure;
}

// ---------------------------------------------------------------------------

int cmd_marginals(const std::string& config_path, std::size_t draws, std::uint64_t seed, const std::string& out) {
    const json doc = hx::read_json_file(config_path);
    const json& sj = doc.contains("scheme") ? doc["scheme"] : doc;
    const std::size_t b = doc.contains("layers") ? hx::as_count(doc["layers"], "$.layers") : 0;
    const auto scheme = hx::scheme_from_json(sj, b, doc.contains("scheme") ? "$.scheme" : "$");
    if (draws < 1) throw hx::ConfigError("--draws", "need at least one draw");
    const auto rows = hx::empirical_marginals(scheme, draws, seed);
    std::string csv = "layer,F_analytic,F_empirical,F_z,Q_analytic,Q_empirical,Q_z\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv += std::to_string(i + 1) + "," + hx::format_number(r.analytic_f) + "," + hx::format_number(r.empirical_f) +
               "," + hx::format_number(r.z_f) + "," + hx::format_number(r.analytic_q) + "," +
               hx::format_number(r.empirical_q) + "," + hx::format_number(r.z_q) + "\n";
    }
    std::cout << csv;
    if (!out.empty()) write_text(out, "marginals.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_cost(const std::string& config_path, const std::string& regime_name, const std::string& out) {
    const json doc = hx::read_json_file(config_path);
    const auto table = hx::table_from_json(hx::require(doc, "table", "$"), "$.table");
    const std::size_t b = table.layers();
    const auto cp = hx::cost_from_json(hx::require(doc, "cost", "$"), b, "$.cost");
    const auto regime = dm::cost_regime_from_string(regime_name);
    const double eps = doc.contains("eps") ? hx::as_number(doc["eps"], "$.eps") : 1.0;
    const double delta0 = doc.contains("delta0") ? hx::as_number(doc["delta0"], "$.delta0") : 1.0;
    bool ceiling = true;
    if (doc.contains("ceiling")) {
        if (!doc["ceiling"].is_boolean()) throw hx::ConfigError("$.ceiling", "expected true or false");
        ceiling = doc["ceiling"].get<bool>();
    }
    json list = doc.contains("schemes") ? doc["schemes"] : json::array({hx::require(doc, "scheme", "$")});
    const std::string list_path = doc.contains("schemes") ? "$.schemes" : "$";
    json rows = json::array();
    for (std::size_t k = 0; k < list.size(); ++k) {
        const auto path = doc.contains("schemes") ? hx::join_path(list_path, k) : std::string("$.scheme");
        dm::SamplingScheme scheme;
        if (list[k].is_object() && list[k].value("type", "") == "rpt_optimal")
            scheme = dm::Rpt{regime == dm::CostRegime::Smooth ? dm::optimal_rpt_probs_smooth(table, cp).p
                                                              : dm::optimal_rpt_probs_l0l1(table, cp, regime).p};
        else
            scheme = hx::scheme_from_json(list[k], b, path);
        const auto c = dm::total_cost(scheme, cp, table, eps, regime, delta0, ceiling);
        json row{{"scheme", hx::scheme_to_json(scheme)},
                 {"expected_iteration_cost", c.iteration_cost},
                 {"terms", {{"overhead", c.terms.overhead}, {"propagation", c.terms.propagation}, {"update", c.terms.update}}},
                 {"min_weight", c.min_weight},
                 {"iterations_unrounded", c.k_unrounded},
                 {"iterations", c.k},
                 {"total_cost", c.total}};
        if (regime != dm::CostRegime::Smooth) row["terms"]["eps2"] = c.eps2_term, row["terms"]["eps"] = c.eps_term;
        std::cout << dm::scheme_name(scheme) << ": expected iteration cost " << hx::format_number(c.iteration_cost)
                  << ", iterations " << hx::format_number(c.k) << ", total " << hx::format_number(c.total) << "\n";
        rows.push_back(row);
    }
    const json report{{"schema_version", hx::kSchemaVersion},
                      {"regime", std::string(dm::to_string(regime))},
                      {"eps", eps},
                      {"delta0", delta0},
                      {"ceiling", ceiling},
                      {"schemes", rows}};
    std::cout << report.dump(2) << "\n";
    if (!out.empty()) write_text(out, "cost.json", report.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layer-sampled spectral optimizer toolkit"};
    app.require_subcommand(1);

    std::string config, out, regime = "smooth", suite = "all", table_path, cost_path;
    std::optional<std::uint64_t> seed;
    std::uint64_t marginal_seed = 0;
    std::size_t draws = 100000;
    const std::vector<std::string> regimes = {"smooth", "l0l1-eps", "l0l1-eps2"};

    auto* run = app.add_subcommand("run", "run an experiment config; writes CSVs and a JSON summary");
    run->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "run only this seed");
    run->add_option("--out", out, "output directory (overrides the config)");

    auto* opt = app.add_subcommand("optimal-probs", "optimal sampling probabilities for a smoothness table");
    opt->add_option("--config", config, "JSON with \"table\" and optional \"cost\"")->check(CLI::ExistingFile);
    opt->add_option("--table", table_path, "smoothness table JSON")->check(CLI::ExistingFile);
    opt->add_option("--cost", cost_path, "cost parameters JSON")->check(CLI::ExistingFile);
    opt->add_option("--regime", regime, "objective")->check(CLI::IsMember(regimes));
    opt->add_option("--out", out, "also write optimal_probs.json here");

    auto* ver = app.add_subcommand("verify", "run a verification suite");
    ver->add_option("--suite", suite, "suite name")->check(CLI::IsMember(hx::suite_names()));
    ver->add_option("--out", out, "also write the JSON report here");

    auto* mar = app.add_subcommand("marginals", "analytic vs empirical marginals of a sampling scheme");
    mar->add_option("--config", config, "scheme JSON")->required()->check(CLI::ExistingFile);
    mar->add_option("--draws", draws, "number of draws");
    mar->add_option("--seed", marginal_seed, "sampling seed");
    mar->add_option("--out", out, "also write marginals.csv here");

    auto* cost = app.add_subcommand("cost", "expected total cost of sampling schemes");
    cost->add_option("--config", config, "JSON with \"table\", \"cost\" and \"scheme\" or \"schemes\"")
        ->required()
        ->check(CLI::ExistingFile);
    cost->add_option("--regime", regime, "cost regime")->check(CLI::IsMember(regimes));
    cost->add_option("--out", out, "also write cost.json here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, seed, out);
        if (*opt) {
            if (config.empty() && table_path.empty()) {
                std::cerr << "error: optimal-probs needs --config or --table\n";
                return kExitUsage;
            }
            return cmd_optimal_probs(config, table_path, cost_path, regime, out);
        }
        if (*ver) return cmd_verify(suite, out);
        if (*mar) return cmd_marginals(config, draws, marginal_seed, out);
        if (*cost) return cmd_cost(config, regime, out);
    } catch (const hx::ConfigError& e) {
        std::cerr << "error: invalid input at " << e.what() << "\n";
        return kExitUsage;
    } catch (const dm::MissingConstant& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
