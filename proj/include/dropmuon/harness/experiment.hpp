// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_HARNESS_EXPERIMENT_HPP
#define DROPMUON_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "../costmodel.hpp"
#include "../optimizer.hpp"
#include "../theory.hpp"
#include "config.hpp"
#include "io.hpp"

namespace dropmuon::harness {

// A variant with everything a run needs except the seed.
struct ResolvedVariant {
    std::string name;
    RunSpec spec;
    json scheme_json;
    std::string policy_name;
    std::optional<double> expected_iteration_cost;
    std::optional<double> predicted_total_cost;  // smooth-regime total_cost with eps = delta0 = 1, no ceiling
    std::string aggregate_description;
};

inline std::string policy_name(const StepPolicy& p) {
    return std::visit(Overloaded{[](const SmoothInverse&) { return std::string("smooth_inverse"); },
                                 [](const GenSmoothInverse&) { return std::string("gen_smooth_inverse"); },
                                 [](const FixedRadius&) { return std::string("fixed_radius"); },
                                 [](const Theorem4Schedule&) { return std::string("theorem4"); }},
                      p);
}

inline ResolvedVariant resolve_variant(const ExperimentConfig& c, const VariantConfig& v) {
    const std::size_t b = c.layers();
    ResolvedVariant r;
    r.name = v.name;
    r.policy_name = policy_name(v.policy);
    RunSpec& s = r.spec;
    s.scheme = v.scheme;
    s.policy = v.policy;
    s.iterations = c.iterations;
    s.cost = c.cost;
    s.noise = c.noise;
    s.beta = c.beta;
    s.momentum_init = c.momentum_init;
    s.orthogonalization = c.orthogonalization;
    s.newton_schulz = c.newton_schulz;

    const bool partitioned = std::holds_alternative<PartitionedSubmodel>(v.scheme);
    const bool cutoff_family = v.kind != SchemeKind::Fixed || std::holds_alternative<Rpt>(v.scheme) ||
                               std::holds_alternative<FullNetwork>(v.scheme);
    // Table: variant's own, then the shared one, then computed from the problem.
    std::optional<SmoothnessTable> table = v.table ? v.table : c.table;
    if (table) {
        if (table->layers() != b)
            throw ConfigError(join_path(v.path, "smoothness"), "table covers " + std::to_string(table->layers()) +
                                                                   " layers, expected " + std::to_string(b));
        const bool want_partition = partitioned;
        if ((table->mode() == SmoothnessTable::Mode::Partition) != want_partition && (partitioned || cutoff_family))
            table.reset();  // shared table of the other family; fall back to computed constants
    }
    if (!table && (partitioned || cutoff_family)) {
        const SamplingScheme for_table = partitioned ? v.scheme : SamplingScheme{FullNetwork{b}};
        table = smoothness_constants(*c.problem, for_table, c.norms, c.secant);
    }

    const auto path_policy = join_path(v.path, "policy");
    if (is_deterministic_policy(v.policy) && !table)
        throw ConfigError(path_policy, r.policy_name + " needs smoothness constants, which are not available for " +
                                           scheme_name(v.scheme) + " sampling");
    if (std::holds_alternative<GenSmoothInverse>(v.policy) && !table->has_l1())
        throw ConfigError(path_policy, "gen_smooth_inverse needs L1 constants; supply a smoothness table with L1");

    if (v.kind == SchemeKind::RptOptimal) {
        try {
            s.scheme = v.optimal_regime == CostRegime::Smooth
                           ? Rpt{optimal_rpt_probs_smooth(*table, c.cost).p}
                           : Rpt{optimal_rpt_probs_l0l1(*table, c.cost, v.optimal_regime).p};
        } catch (const std::exception& e) {
            throw ConfigError(join_path(v.path, "scheme"), e.what());
        }
    }
    if (v.kind == SchemeKind::EpochShift) {
        s.epoch_shift_alpha = v.alpha;
        r.scheme_json = json{{"type", "epoch_shift"}, {"alpha", v.alpha}};
    } else {
        r.scheme_json = scheme_to_json(s.scheme);
    }
    s.table = table;

    // Aggregate weights follow the rate statement matching the policy.
    s.aggregate_power = 2.0;
    r.aggregate_description = "uniform weights, squared dual norms";
    if (v.kind != SchemeKind::EpochShift) {
        try {
            if (std::holds_alternative<SmoothInverse>(v.policy)) {
                s.aggregate_weights = theory_weights(s.scheme, &*table, WeightRegime::Smooth).normalized();
                r.aggregate_description = "smooth theory weights w_i / mean(w), squared dual norms";
            } else if (std::holds_alternative<GenSmoothInverse>(v.policy)) {
                s.aggregate_weights = theory_weights(s.scheme, &*table, WeightRegime::L0L1).normalized();
                s.aggregate_power = 1.0;
                r.aggregate_description = "(L0,L1) theory weights w_i / mean(w), dual norms";
            } else {
                std::vector<double> eta;
                if (const auto* t4 = std::get_if<Theorem4Schedule>(&v.policy)) eta = t4->eta;
                s.aggregate_weights = theory_weights(s.scheme, nullptr, WeightRegime::Stochastic, eta).normalized();
                s.aggregate_power = 1.0;
                r.aggregate_description = "stochastic theory weights w_i / mean(w), dual norms";
            }
        } catch (const LayerNeverUpdated& e) {
            throw ConfigError(join_path(v.path, "scheme"), e.what());
        }
        r.expected_iteration_cost = expected_iteration_cost(s.scheme, c.cost);
        if (table) {
            try {
                r.predicted_total_cost = total_cost(s.scheme, c.cost, *table, 1.0, CostRegime::Smooth, 1.0, false).total;
            } catch (const std::exception&) {
                r.predicted_total_cost.reset();
            }
        }
    } else {
        s.aggregate_power = std::holds_alternative<SmoothInverse>(v.policy) ? 2.0 : 1.0;
        if (s.aggregate_power == 1.0) r.aggregate_description = "uniform weights, dual norms";
    }
    return r;
}

// ---------------------------------------------------------------------------
// Per-run records.

struct ColumnInfo {
    const char* name;
    const char* description;
};

inline const std::vector<ColumnInfo>& csv_columns() {
    static const std::vector<ColumnInfo> cols = {
        {"k", "iteration index; the row describes the step from X^k to X^(k+1)"},
        {"f", "objective value f(X^(k+1)) after the step"},
        {"f_gap", "f - f_star; empty when the optimum is unknown"},
        {"weighted_dual_grad", "weighted dual-gradient aggregate at X^k (see summary for weights and power)"},
        {"active_min", "smallest active layer, 1-based"},
        {"active_size", "number of active layers"},
        {"units", "cost-model units of this step"},
        {"cumulative_units", "cost-model units summed over steps 0..k"},
        {"macs", "measured multiply-accumulates of this step; empty when the problem does not count them"},
        {"cumulative_macs", "measured multiply-accumulates summed over steps 0..k; empty when not counted"},
    };
    return cols;
}

inline std::string csv_header() {
    std::string h;
    for (const auto& c : csv_columns()) {
        if (!h.empty()) h += ',';
        h += c.name;
    }
    return h;
}

inline void write_run_csv(std::ostream& out, const RunResult& r, std::optional<double> f_star, bool counts_macs) {
    out << csv_header() << '\n';
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
        const auto& st = r.steps[k];
        out << k << ',' << format_number(st.report.f_after) << ',';
        if (f_star) out << format_number(st.report.f_after - *f_star);
        out << ',' << format_number(st.aggregate) << ',' << st.report.active.min_index() + 1 << ','
            << st.report.active.size() << ',' << format_number(st.units) << ',' << format_number(st.cumulative_units)
            << ',';
        if (counts_macs) out << st.report.macs << ',' << st.cumulative_macs;
        else out << ',';
        out << '\n';
    }
}

struct TargetHit {
    double threshold = 0.0;
    bool reached = false;
    std::size_t iterations = 0;  // steps taken when the gap first fell below the threshold
    double units = 0.0;
    std::uint64_t macs = 0;
};

// First row with f_gap <= threshold; the initial point counts as zero steps.
inline TargetHit time_to_target(const RunResult& r, double f_star, double threshold) {
    TargetHit hit;
    hit.threshold = threshold;
    if (r.initial_value - f_star <= threshold) {
        hit.reached = true;
        return hit;
    }
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
        if (r.steps[k].report.f_after - f_star <= threshold) {
            hit.reached = true;
            hit.iterations = k + 1;
            hit.units = r.steps[k].cumulative_units;
            hit.macs = r.steps[k].cumulative_macs;
            return hit;
        }
    }
    return hit;
}

struct RunChecks {
    std::size_t monotone_violations = 0;
    std::size_t descent_bound_violations = 0;
    bool monotone_checked = false;
    bool descent_bound_checked = false;
};

inline RunChecks check_run(const RunResult& r, const RunSpec& spec, const VerifyToggles& t) {
    RunChecks c;
    const bool deterministic = is_deterministic_policy(spec.policy);
    c.monotone_checked = t.monotone && deterministic;
    c.descent_bound_checked = t.descent_bound && !deterministic && spec.table &&
                              spec.orthogonalization == Orthogonalization::ExactSvd;
    for (const auto& st : r.steps) {
        if (c.monotone_checked && st.report.f_after > st.report.f_before + t.slack) ++c.monotone_violations;
        if (c.descent_bound_checked && st.report.descent_bound && st.report.f_after > *st.report.descent_bound + t.slack)
            ++c.descent_bound_violations;
    }
    return c;
}

// ---------------------------------------------------------------------------

struct MeanPair {
    std::size_t count = 0;
    std::optional<double> arithmetic;
    std::optional<double> geometric;
};

inline MeanPair means(const std::vector<double>& xs) {
    MeanPair m;
    m.count = xs.size();
    if (xs.empty()) return m;
    double sum = 0.0, logs = 0.0;
    bool positive = true;
    for (double x : xs) {
        sum += x;
        if (x > 0.0) logs += std::log(x);
        else positive = false;
    }
    m.arithmetic = sum / static_cast<double>(xs.size());
    if (positive) m.geometric = std::exp(logs / static_cast<double>(xs.size()));
    return m;
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct ExperimentOutcome {
    std::vector<ResolvedVariant> variants;
    std::vector<std::vector<RunResult>> runs;  // [variant][seed]
    json summary;
};

// Runs every (variant, seed) pair on a worker pool. Results are kept in (variant, seed) order.
inline std::vector<std::vector<RunResult>> run_all(const ExperimentConfig& c, const std::vector<ResolvedVariant>& vars) {
    const std::size_t nv = vars.size(), ns = c.seeds.size();
    std::vector<std::vector<RunResult>> results(nv, std::vector<RunResult>(ns));
    std::vector<std::exception_ptr> errors(nv * ns);
    std::atomic<std::size_t> next{0};
    const LayerModel start{c.problem->initial_point(), c.norms};
    auto worker = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < nv * ns;) {
            const std::size_t v = job / ns, s = job % ns;
            try {
                RunSpec spec = vars[v].spec;
                spec.seed = c.seeds[s];
                results[v][s] = run(*c.problem, start, spec);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };
    std::size_t threads = c.workers ? c.workers : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, nv * ns);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (std::size_t job = 0; job < errors.size(); ++job) {
        if (!errors[job]) continue;
        try {
            std::rethrow_exception(errors[job]);
        } catch (const std::exception& e) {
            throw std::runtime_error("variant '" + vars[job / ns].name + "', seed " +
                                     std::to_string(c.seeds[job % ns]) + ": " + e.what());
        }
    }
    return results;
}

inline std::string run_file_name(const std::string& variant, std::uint64_t seed) {
    return variant + "_seed" + std::to_string(seed) + ".csv";
}

inline json columns_manifest() {
    json cols = json::array();
    for (const auto& c : csv_columns()) cols.push_back(json{{"name", c.name}, {"description", c.description}});
    return json{{"schema_version", kSchemaVersion}, {"format", "csv"}, {"encoding", "utf-8"}, {"separator", ","},
                {"decimal", "."}, {"columns", cols}};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json build_summary(const ExperimentConfig& c, const std::vector<ResolvedVariant>& vars,
                          const std::vector<std::vector<RunResult>>& runs) {
    const auto f_star = c.problem->optimal_value();
    const bool macs = c.problem->counts_operations();
    json out;
    out["schema_version"] = kSchemaVersion;
    out["name"] = c.name;
    out["problem"] = c.problem->name();
    out["layers"] = c.layers();
    out["iterations"] = c.iterations;
    out["seeds"] = c.seeds;
    out["f_star"] = optional_number(f_star);
    out["targets"] = c.targets;
    out["baseline"] = vars[c.baseline].name;
    out["cost"] = cost_to_json(c.cost);
    out["columns_manifest"] = "columns.json";

    // hits[v][s][t]
    std::vector<std::vector<std::vector<TargetHit>>> hits(vars.size());
    json variants = json::array();
    for (std::size_t v = 0; v < vars.size(); ++v) {
        const auto& rv = vars[v];
        json vj;
        vj["name"] = rv.name;
        vj["scheme"] = rv.scheme_json;
        vj["policy"] = rv.policy_name;
        vj["aggregate"] = {{"description", rv.aggregate_description},
                           {"weights", rv.spec.aggregate_weights},
                           {"power", rv.spec.aggregate_power}};
        vj["smoothness"] = rv.spec.table ? table_to_json(*rv.spec.table) : json(nullptr);
        vj["expected_iteration_cost"] = optional_number(rv.expected_iteration_cost);
        vj["predicted_total_cost"] = optional_number(rv.predicted_total_cost);
        json rj = json::array();
        hits[v].resize(c.seeds.size());
        for (std::size_t s = 0; s < c.seeds.size(); ++s) {
            const auto& r = runs[v][s];
            const auto chk = check_run(r, rv.spec, c.verify);
            const double final_f = r.steps.empty() ? r.initial_value : r.steps.back().report.f_after;
            json one;
            one["seed"] = c.seeds[s];
            one["csv"] = run_file_name(rv.name, c.seeds[s]);
            one["initial_f"] = r.initial_value;
            one["final_f"] = final_f;
            one["initial_gap"] = f_star ? json(r.initial_value - *f_star) : json(nullptr);
            one["final_gap"] = f_star ? json(final_f - *f_star) : json(nullptr);
            one["total_units"] = r.steps.empty() ? 0.0 : r.steps.back().cumulative_units;
            one["total_macs"] = macs ? json(r.steps.empty() ? 0 : r.steps.back().cumulative_macs) : json(nullptr);
            one["warnings"] = r.warnings;
            one["monotone_violations"] = chk.monotone_checked ? json(chk.monotone_violations) : json(nullptr);
            one["descent_bound_violations"] =
                chk.descent_bound_checked ? json(chk.descent_bound_violations) : json(nullptr);
            json tt = json::array();
            if (f_star) {
                for (double thr : c.targets) {
                    const auto hit = time_to_target(r, *f_star, thr);
                    hits[v][s].push_back(hit);
                    tt.push_back(json{{"threshold", thr},
                                      {"reached", hit.reached},
                                      {"iterations", hit.reached ? json(hit.iterations) : json(nullptr)},
                                      {"units", hit.reached ? json(hit.units) : json(nullptr)},
                                      {"macs", hit.reached && macs ? json(hit.macs) : json(nullptr)}});
                }
            }
            one["time_to_target"] = tt;
            rj.push_back(one);
        }
        vj["runs"] = rj;
        json agg = json::array();
        if (f_star) {
            for (std::size_t t = 0; t < c.targets.size(); ++t) {
                std::vector<double> units, iters;
                for (std::size_t s = 0; s < c.seeds.size(); ++s)
                    if (hits[v][s][t].reached) {
                        units.push_back(hits[v][s][t].units);
                        iters.push_back(static_cast<double>(hits[v][s][t].iterations));
                    }
                const auto mu = means(units);
                agg.push_back(json{{"threshold", c.targets[t]},
                                   {"seeds_reached", units.size()},
                                   {"units_arithmetic_mean", optional_number(mu.arithmetic)},
                                   {"units_geometric_mean", optional_number(mu.geometric)},
                                   {"iterations_arithmetic_mean", optional_number(means(iters).arithmetic)}});
            }
        }
        vj["time_to_target"] = agg;
        variants.push_back(vj);
    }
    out["variants"] = variants;

    // Speedup of each variant over the baseline: per-seed baseline_units / variant_units.
    json ratios = json::array();
    const std::size_t base = c.baseline;
    for (std::size_t v = 0; v < vars.size(); ++v) {
        json rj;
        rj["variant"] = vars[v].name;
        std::optional<double> predicted;
        if (vars[base].predicted_total_cost && vars[v].predicted_total_cost && *vars[v].predicted_total_cost > 0.0)
            predicted = *vars[base].predicted_total_cost / *vars[v].predicted_total_cost;
        rj["predicted"] = optional_number(predicted);
        json tj = json::array();
        if (f_star) {
            for (std::size_t t = 0; t < c.targets.size(); ++t) {
                std::vector<double> per_seed;
                for (std::size_t s = 0; s < c.seeds.size(); ++s) {
                    const auto& hb = hits[base][s][t];
                    const auto& hv = hits[v][s][t];
                    if (hb.reached && hv.reached && hv.units > 0.0) per_seed.push_back(hb.units / hv.units);
                }
                const auto mu = means(per_seed);
                tj.push_back(json{{"threshold", c.targets[t]},
                                  {"seeds_compared", mu.count},
                                  {"arithmetic_mean", optional_number(mu.arithmetic)},
                                  {"geometric_mean", optional_number(mu.geometric)}});
            }
        }
        rj["targets"] = tj;
        ratios.push_back(rj);
    }
    out["ratios"] = ratios;
    return out;
}

// Runs the experiment. With an output directory, writes one CSV per (variant, seed), the column
// manifest and summary.json; the collector writes in variant then seed order.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, const std::string& out_dir,
                                        bool with_timestamp = true) {
    ExperimentOutcome o;
    for (const auto& v : c.variants) o.variants.push_back(resolve_variant(c, v));
    o.runs = run_all(c, o.variants);
    o.summary = build_summary(c, o.variants, o.runs);
    o.summary["metadata"] = json{{"generator", "dropmuon"}};
    if (with_timestamp) o.summary["metadata"]["generated_at"] = utc_timestamp();
    if (out_dir.empty()) return o;

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto f_star = c.problem->optimal_value();
    for (std::size_t v = 0; v < o.variants.size(); ++v)
        for (std::size_t s = 0; s < c.seeds.size(); ++s) {
            std::ofstream f(fs::path(out_dir) / run_file_name(o.variants[v].name, c.seeds[s]), std::ios::binary);
            write_run_csv(f, o.runs[v][s], f_star, c.problem->counts_operations());
            if (!f) throw std::runtime_error("failed writing CSV in " + out_dir);
        }
    {
        std::ofstream f(fs::path(out_dir) / "columns.json", std::ios::binary);
        f << columns_manifest().dump(2) << '\n';
    }
    std::ofstream f(fs::path(out_dir) / "summary.json", std::ios::binary);
    f << o.summary.dump(2) << '\n';
    if (!f) throw std::runtime_error("failed writing summary in " + out_dir);
    return o;
}

}  // namespace dropmuon::harness

#endif  // DROPMUON_HARNESS_EXPERIMENT_HPP
