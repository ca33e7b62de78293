// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_HARNESS_CRITERIA_HPP
#define DROPMUON_HARNESS_CRITERIA_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../dropmuon.hpp"
#include "io.hpp"

namespace dropmuon::harness {

struct CheckResult {
    std::string id;
    std::string description;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;  // 0: no runtime budget
    json metrics = json::object();
};

inline json to_json(const CheckResult& r) {
    return json{{"id", r.id},         {"description", r.description}, {"passed", r.passed},
                {"detail", r.detail}, {"seconds", r.seconds},         {"budget_seconds", r.budget_seconds},
                {"metrics", r.metrics}};
}

// Times body(result) and folds the runtime budget into the verdict.
inline CheckResult timed_check(std::string id, std::string description, double budget,
                               const std::function<void(CheckResult&)>& body) {
    CheckResult r;
    r.id = std::move(id);
    r.description = std::move(description);
    r.budget_seconds = budget;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget > 0.0 && r.seconds > budget) {
        r.passed = false;
        r.detail += (r.detail.empty() ? "" : "; ") + std::string("runtime ") + format_number(r.seconds) +
                    " s exceeds budget " + format_number(budget) + " s";
    }
    return r;
}

namespace detail {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
inline double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) total += (v = uniform(rng, 0.05, 1.0));
    for (auto& v : p) v /= total;
    return p;
}

// Lower-triangular cutoff constants, non-increasing as the cutoff moves towards the layer.
inline std::vector<std::vector<double>> random_nested_rows(Rng& rng, std::size_t b) {
    std::vector<std::vector<double>> rows(b);
    for (std::size_t i = 0; i < b; ++i) {
        rows[i].assign(i + 1, 0.0);
        rows[i][i] = log_uniform(rng, 0.1, 10.0);
        for (std::size_t s = i; s-- > 0;) rows[i][s] = rows[i][s + 1] * uniform(rng, 1.0, 2.0);
    }
    return rows;
}

inline double max_later_full(const std::vector<std::vector<double>>& rows) {
    double m = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) m = std::max(m, rows[i][0]);
    return m;
}

inline CostParams random_cost(Rng& rng, std::size_t b) {
    CostParams cp;
    cp.c_ov = uniform(rng, 0.0, 2.0);
    for (std::size_t i = 0; i < b; ++i) {
        cp.c.push_back(uniform(rng, 0.1, 3.0));
        cp.c_sharp.push_back(uniform(rng, 0.0, 1.0));
    }
    return cp;
}

inline std::string vec_str(const std::vector<double>& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
    return s + ")";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1. Geometry identities.

inline CheckResult criterion_geometry(std::uint64_t seed = 1) {
    return timed_check("criterion-1", "geometry identities over 1000 random matrices per norm kind", 10.0,
                       [&](CheckResult& r) {
        constexpr double tol = 1e-9;
        Rng rng(seed);
        double worst[4] = {0, 0, 0, 0};
        json per_kind = json::object();
        for (NormKind kind : {NormKind::Euclidean, NormKind::Spectral}) {
            double kw[4] = {0, 0, 0, 0};
            for (int n = 0; n < 1000; ++n) {
                const auto rows = static_cast<Eigen::Index>(1 + rng.index(6));
                const auto cols = static_cast<Eigen::Index>(1 + rng.index(6));
                Matrix m(rows, cols);
                if (n % 5 == 4) {
                    // Rank-one inputs exercise the truncated SVD.
                    Eigen::VectorXd u(rows), v(cols);
                    for (auto& x : u) x = rng.normal();
                    for (auto& x : v) x = rng.normal();
                    m = u * v.transpose();
                } else {
                    for (Eigen::Index c = 0; c < cols; ++c)
                        for (Eigen::Index rr = 0; rr < rows; ++rr) m(rr, c) = rng.normal();
                }
                const double t = detail::uniform(rng, 0.1, 3.0);
                const auto d = lmo(kind, m, t);
                const Matrix s = sharp(kind, m);
                const double dn = dual_norm(kind, m);
                const double e[4] = {std::abs(norm(kind, d.direction) - t), std::abs(inner(m, d.direction) + t * dn),
                                     std::abs(inner(m, s) - std::pow(norm(kind, s), 2)), std::abs(norm(kind, s) - dn)};
                for (int q = 0; q < 4; ++q) kw[q] = std::max(kw[q], e[q]);
            }
            per_kind[std::string(to_string(kind))] = {
                {"norm_lmo", kw[0]}, {"inner_lmo", kw[1]}, {"inner_sharp", kw[2]}, {"norm_sharp", kw[3]}};
            for (int q = 0; q < 4; ++q) worst[q] = std::max(worst[q], kw[q]);
        }
        r.metrics = per_kind;
        r.passed = std::all_of(std::begin(worst), std::end(worst), [](double w) { return w <= tol; });
        std::ostringstream os;
        os << "max abs errors: norm(lmo)=" << worst[0] << " inner(lmo)=" << worst[1] << " inner(sharp)=" << worst[2]
           << " norm(sharp)=" << worst[3] << " (tol 1e-9)";
        r.detail = os.str();
    });
}

// ---------------------------------------------------------------------------
// 2. Marginals by Monte Carlo.

struct MarginalRow {
    double analytic_f = 0.0, empirical_f = 0.0, z_f = 0.0;
    double analytic_q = 0.0, empirical_q = 0.0, z_q = 0.0;
};

inline double binomial_z(double empirical, double q, std::size_t n) {
    const double var = q * (1.0 - q) / static_cast<double>(n);
    if (var <= 0.0) return empirical == q ? 0.0 : INFINITY;
    return (empirical - q) / std::sqrt(var);
}

// Empirical F_i = P(min S <= i) and Q_i = P(i in S) from n draws of one seeded stream.
inline std::vector<MarginalRow> empirical_marginals(const SamplingScheme& scheme, std::size_t n, std::uint64_t seed) {
    const std::size_t b = layer_count(scheme);
    std::vector<std::size_t> fc(b, 0), qc(b, 0);
    Rng rng(Rng::stream_seed(seed, 0, 0));
    for (std::size_t k = 0; k < n; ++k) {
        const auto s = sample(scheme, rng);
        for (std::size_t i = s.min_index(); i < b; ++i) ++fc[i];
        for (std::size_t i : s.indices) ++qc[i];
    }
    const auto m = marginals(scheme);
    std::vector<MarginalRow> rows(b);
    for (std::size_t i = 0; i < b; ++i) {
        auto& r = rows[i];
        r.analytic_f = m.F[i];
        r.analytic_q = m.Q[i];
        r.empirical_f = static_cast<double>(fc[i]) / static_cast<double>(n);
        r.empirical_q = static_cast<double>(qc[i]) / static_cast<double>(n);
        r.z_f = binomial_z(r.empirical_f, r.analytic_f, n);
        r.z_q = binomial_z(r.empirical_q, r.analytic_q, n);
    }
    return rows;
}

inline CheckResult criterion_marginals(std::uint64_t seed = 2) {
    return timed_check("criterion-2", "empirical marginals over 1e5 draws within 3 sigma", 30.0, [&](CheckResult& r) {
        constexpr std::size_t n = 100000;
        Rng rng(seed);
        const std::size_t b = 8;
        std::vector<SamplingScheme> schemes = {
            Rpt{detail::random_simplex(rng, b)},
            TauNice{b, 3},
            TauSubmodel{b, 3, detail::random_simplex(rng, b - 3 + 1)},
            PartitionedSubmodel{{{0, 3, 6}, {1, 7}, {2, 4, 5}}, detail::random_simplex(rng, 3)},
        };
        bool ok = true;
        double worst = 0.0;
        std::string fails;
        for (std::size_t k = 0; k < schemes.size(); ++k) {
            const auto rows = empirical_marginals(schemes[k], n, seed + 100 + k);
            double kw = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                kw = std::max({kw, std::abs(rows[i].z_f), std::abs(rows[i].z_q)});
                if (!(std::abs(rows[i].z_f) <= 3.0) || !(std::abs(rows[i].z_q) <= 3.0)) {
                    ok = false;
                    fails += " " + scheme_name(schemes[k]) + "[layer " + std::to_string(i + 1) + "]";
                }
            }
            r.metrics[scheme_name(schemes[k])] = {{"max_abs_z", kw}};
            worst = std::max(worst, kw);
        }
        // TauNice Q_i = tau / b exactly.
        const auto tn = marginals(TauNice{b, 3});
        bool exact = true;
        for (double q : tn.Q) exact = exact && q == 3.0 / 8.0;
        r.passed = ok && exact;
        r.detail = "max |z| = " + format_number(worst) + (exact ? "; tau-nice Q = tau/b exactly" : "; tau-nice Q inexact") +
                   (fails.empty() ? "" : "; outside 3 sigma:" + fails);
    });
}

// ---------------------------------------------------------------------------
// 3. Deterministic descent and rate.

struct RateInstance {
    SeparableQuadratic problem;
    std::vector<NormKind> norms;
    SmoothnessTable table;
    Rpt scheme;
};

inline RateInstance rate_instance() {
    const std::vector<Shape> shapes = {{4, 3}, {3, 3}, {3, 2}};
    const std::vector<double> a = {2.0, 1.0, 3.0};
    std::vector<double> floor;
    for (double v : a) floor.push_back(v / 20.0);
    auto problem = SeparableQuadratic::make(shapes, a, floor, 1.0, 0.0, 3);
    std::vector<NormKind> norms(3, NormKind::Spectral);
    auto table = smoothness_constants(problem, FullNetwork{3}, norms);
    return {std::move(problem), norms, std::move(table), Rpt{{0.5, 0.3, 0.2}}};
}

inline CheckResult criterion_descent_rate() {
    return timed_check("criterion-3", "deterministic descent and smooth rate on a separable quadratic", 20.0,
                       [&](CheckResult& r) {
        const auto inst = rate_instance();
        const auto w = theory_weights(inst.scheme, &inst.table, WeightRegime::Smooth);
        const LayerModel start{inst.problem.initial_point(), inst.norms};
        const double delta0 = value(inst.problem, start.layers) - *inst.problem.optimal_value();
        bool monotone = true;
        double worst_increase = -INFINITY;
        bool rate_ok = true;
        std::string detail;
        for (std::size_t k_total : {10, 100, 1000}) {
            double lhs = 0.0;
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                RunSpec spec;
                spec.scheme = inst.scheme;
                spec.policy = SmoothInverse{};
                spec.iterations = k_total;
                spec.seed = seed;
                spec.table = inst.table;
                spec.cost = CostParams::uniform(3, 0.0, 1.0, 0.0);
                spec.aggregate_weights = w.normalized();
                const auto res = run(inst.problem, start, spec);
                double sum = 0.0;
                for (const auto& st : res.steps) {
                    sum += st.aggregate;
                    worst_increase = std::max(worst_increase, st.report.f_after - st.report.f_before);
                    if (st.report.f_after > st.report.f_before + 1e-10) monotone = false;
                }
                lhs += sum / static_cast<double>(k_total) / 20.0;
            }
            const double rhs = w.smooth_rate_bound(delta0, static_cast<double>(k_total));
            r.metrics["K=" + std::to_string(k_total)] = {{"averaged_weighted_sq_dual_grad", lhs}, {"bound", rhs}};
            if (!(lhs <= rhs)) rate_ok = false;
            detail += " K=" + std::to_string(k_total) + ": " + format_number(lhs) + " <= " + format_number(rhs) + ";";
        }
        r.metrics["largest_f_increase"] = worst_increase;
        r.passed = monotone && rate_ok;
        r.detail = std::string(monotone ? "monotone" : "NOT monotone") + " (largest step change " +
                   format_number(worst_increase) + ");" + detail;
    });
}

// ---------------------------------------------------------------------------
// 4. Smooth optimal probabilities against the simplex grid.

inline CheckResult criterion_optimal_probs(std::uint64_t seed = 4) {
    return timed_check("criterion-4", "recursion vs simplex grid, full-network condition, cost invariance", 120.0,
                       [&](CheckResult& r) {
        Rng rng(seed);
        std::size_t grid_failures = 0, verdict_mismatches = 0, cost_dependence = 0, verdict_true = 0;
        double worst_gap = -INFINITY;
        const std::size_t tables = 500;
        for (std::size_t t = 0; t < tables; ++t) {
            const std::size_t b = 2 + t % 3;
            auto rows = detail::random_nested_rows(rng, b);
            if (t % 8 == 3) rows[0][0] = detail::max_later_full(rows);  // exact tie
            else if (t % 4 == 1) rows[0][0] = detail::max_later_full(rows) * detail::uniform(rng, 1.0, 1.5);
            const auto table = SmoothnessTable::rpt(rows);
            const auto cp = detail::random_cost(rng, b);
            const RptObjective f(table, cp, CostRegime::Smooth);
            const auto rec = optimal_rpt_probs_smooth(table, cp);
            const double v = f(rec.p);
            const auto grid = brute_force_optimal_probs(std::cref(f), b, 100);
            worst_gap = std::max(worst_gap, v - grid.value);
            if (!(v <= grid.value + 1e-9)) ++grid_failures;

            std::vector<double> e1(b, 0.0);
            e1[0] = 1.0;
            const bool verdict = full_network_optimal_smooth(table);
            verdict_true += verdict;
            if (verdict != (rec.p == e1)) ++verdict_mismatches;

            for (int d = 0; d < 10; ++d)
                if (optimal_rpt_probs_smooth(table, detail::random_cost(rng, b)).p != rec.p) ++cost_dependence;
        }
        r.metrics = {{"tables", tables},
                     {"grid_failures", grid_failures},
                     {"largest_recursion_minus_grid", worst_gap},
                     {"verdict_mismatches", verdict_mismatches},
                     {"full_network_optimal_tables", verdict_true},
                     {"cost_dependent_outputs", cost_dependence}};
        r.passed = grid_failures == 0 && verdict_mismatches == 0 && cost_dependence == 0;
        r.detail = "grid failures " + std::to_string(grid_failures) + " (largest excess " + format_number(worst_gap) +
                   "), verdict mismatches " + std::to_string(verdict_mismatches) + " (" + std::to_string(verdict_true) +
                   " full-network tables), cost-dependent outputs " + std::to_string(cost_dependence);
    });
}

// ---------------------------------------------------------------------------
// 5. (L0, L1) full-network condition.

inline CheckResult criterion_l0l1_condition(std::uint64_t seed = 5) {
    return timed_check("criterion-5", "(L0,L1) solver leaves e1 exactly when L1 of layer 1 is not maximal", 120.0,
                       [&](CheckResult& r) {
        Rng rng(seed);
        std::size_t wrong_nonmax = 0, wrong_max = 0;
        for (std::size_t t = 0; t < 200; ++t) {
            const std::size_t b = 2 + t % 2;
            const bool nonmax = t < 100;
            auto l0 = detail::random_nested_rows(rng, b);
            auto l1 = detail::random_nested_rows(rng, b);
            const double m = detail::max_later_full(l1);
            l1[0][0] = m * (nonmax ? detail::uniform(rng, 0.5, 0.99) : detail::uniform(rng, 1.1, 3.0));
            const auto table = SmoothnessTable::rpt(l0, l1);
            const auto cp = detail::random_cost(rng, b);
            const auto sol = optimal_rpt_probs_l0l1(table, cp, CostRegime::L0L1Eps);
            std::vector<double> e1(b, 0.0);
            e1[0] = 1.0;
            if (nonmax && sol.p == e1) ++wrong_nonmax;
            if (!nonmax && sol.p != e1) ++wrong_max;
        }
        r.metrics = {{"nonmax_tables", 100}, {"nonmax_returned_e1", wrong_nonmax},
                     {"max_tables", 100},    {"max_returned_other", wrong_max}};
        r.passed = wrong_nonmax == 0 && wrong_max == 0;
        r.detail = "non-maximal tables returning e1: " + std::to_string(wrong_nonmax) +
                   "/100; maximal tables not returning e1: " + std::to_string(wrong_max) + "/100";
    });
}

// ---------------------------------------------------------------------------
// 6. Stochastic trend.

struct StochasticTrend {
    double k16 = 0.0;
    double k256 = 0.0;
};

inline StochasticTrend stochastic_trend(std::size_t seeds = 20) {
    const std::vector<Shape> shapes = {{4, 3}, {3, 3}, {3, 2}};
    const std::vector<double> a = {2.0, 1.0, 3.0};
    auto problem = SeparableQuadratic::make(shapes, a, {}, 0.3, 0.0, 6);
    const std::vector<NormKind> norms(3, NormKind::Spectral);
    const Rpt scheme{{0.5, 0.3, 0.2}};
    const std::vector<double> eta(3, 1.0);
    const auto w = theory_weights(scheme, nullptr, WeightRegime::Stochastic, eta).normalized();
    const LayerModel start{problem.initial_point(), norms};
    StochasticTrend out;
    for (std::size_t k_total : {16, 256}) {
        double avg = 0.0;
        for (std::uint64_t seed = 0; seed < seeds; ++seed) {
            RunSpec spec;
            spec.scheme = scheme;
            spec.policy = Theorem4Schedule{k_total, eta};
            spec.iterations = k_total;
            spec.seed = seed;
            spec.cost = CostParams::uniform(3, 0.0, 1.0, 0.0);
            spec.noise.sigma.assign(3, 0.1);
            spec.aggregate_weights = w;
            spec.aggregate_power = 1.0;
            const auto res = run(problem, start, spec);
            double best = dual_grad_aggregate(res.final_model, value_and_grad(problem, res.final_model.layers).grads, w, 1.0);
            for (const auto& st : res.steps) best = std::min(best, st.aggregate);
            avg += best / static_cast<double>(seeds);
        }
        (k_total == 16 ? out.k16 : out.k256) = avg;
    }
    return out;
}

inline CheckResult criterion_stochastic_trend() {
    return timed_check("criterion-6", "running-min weighted dual gradient shrinks by >= 1.5x from K=16 to K=256", 60.0,
                       [&](CheckResult& r) {
        const auto t = stochastic_trend();
        const double factor = t.k16 / t.k256;
        r.metrics = {{"K16", t.k16}, {"K256", t.k256}, {"factor", factor}};
        r.passed = factor >= 1.5;
        r.detail = "K=16: " + format_number(t.k16) + ", K=256: " + format_number(t.k256) +
                   ", factor " + format_number(factor) + " (need >= 1.5)";
    });
}

// ---------------------------------------------------------------------------
// 7. Cost ratio on a constructed instance where layer 1 has the smallest constant.

struct CostRatioOutcome {
    double predicted = 0.0;
    double observed = 0.0;  // arithmetic mean over seeds of full_units / rpt_units
    double observed_geometric = 0.0;
    std::vector<double> rpt_probabilities;
    std::size_t seeds_reached = 0;
    std::size_t seeds = 0;
};

inline CostRatioOutcome cost_ratio_experiment(std::size_t seeds = 20) {
    const std::size_t b = 4;
    const std::vector<Shape> shapes(b, Shape{3, 3});
    const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> floor(b, 0.05);
    auto problem = SeparableQuadratic::make(shapes, a, floor, 1.0, 0.0, 7);
    const std::vector<NormKind> norms(b, NormKind::Euclidean);
    const auto table = smoothness_constants(problem, FullNetwork{b}, norms);
    const auto cp = CostParams::uniform(b, 0.5, 1.0, 0.5);
    const Rpt rpt{optimal_rpt_probs_smooth(table, cp).p};
    const FullNetwork full{b};

    CostRatioOutcome out;
    out.rpt_probabilities = rpt.p;
    out.seeds = seeds;
    out.predicted = total_cost(full, cp, table, 1.0, CostRegime::Smooth, 1.0, false).total /
                    total_cost(rpt, cp, table, 1.0, CostRegime::Smooth, 1.0, false).total;

    const LayerModel start{problem.initial_point(), norms};
    const double delta0 = value(problem, start.layers);
    const double target = 1e-10 * delta0;
    const std::size_t horizon = 20000;
    auto units_to_target = [&](const SamplingScheme& scheme, std::uint64_t seed) -> double {
        // Stepped by hand so the run stops at the target; streams match run().
        LayerModel m = start;
        double units = 0.0;
        for (std::size_t k = 0; k < horizon; ++k) {
            Rng rng = Rng::stream(seed, 0, k);
            const auto active = sample(scheme, rng);
            const auto rep = det_step(m, problem, active, SmoothInverse{}, table);
            units += iteration_cost(active, cp);
            if (rep.f_after <= target) return units;
        }
        return INFINITY;
    };
    std::vector<double> ratios;
    const double full_units = units_to_target(full, 0);
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        const double u = units_to_target(rpt, seed);
        if (std::isfinite(u) && std::isfinite(full_units)) ratios.push_back(full_units / u);
    }
    out.seeds_reached = ratios.size();
    double sum = 0.0, logs = 0.0;
    for (double x : ratios) {
        sum += x;
        logs += std::log(x);
    }
    if (!ratios.empty()) {
        out.observed = sum / static_cast<double>(ratios.size());
        out.observed_geometric = std::exp(logs / static_cast<double>(ratios.size()));
    }
    return out;
}

inline CheckResult criterion_cost_ratio() {
    return timed_check("criterion-7", "full-network vs optimal RPT cost to target, ratio >= 1.1 and within 15% of prediction",
                       60.0, [&](CheckResult& r) {
        const auto o = cost_ratio_experiment();
        const double rel = std::abs(o.observed / o.predicted - 1.0);
        r.metrics = {{"predicted_ratio", o.predicted},         {"observed_ratio_arithmetic", o.observed},
                     {"observed_ratio_geometric", o.observed_geometric}, {"relative_deviation", rel},
                     {"rpt_probabilities", o.rpt_probabilities}, {"seeds_reached", o.seeds_reached}};
        r.passed = o.seeds_reached == o.seeds && o.observed >= 1.1 && rel <= 0.15;
        r.detail = "observed " + format_number(o.observed) + " (geometric " + format_number(o.observed_geometric) +
                   "), predicted " + format_number(o.predicted) + ", deviation " + format_number(rel) +
                   ", seeds reaching target " + std::to_string(o.seeds_reached) + "/" + std::to_string(o.seeds) +
                   ", p = " + detail::vec_str(o.rpt_probabilities);
    });
}

// ---------------------------------------------------------------------------
// 8. MLP truncated backward and cached forward.

inline CheckResult criterion_mlp() {
    return timed_check("criterion-8", "MLP truncated backward matches full pass; cached forward saves work", 30.0,
                       [&](CheckResult& r) {
        const auto mlp = TinyMlp::synthetic({6, 10, 10, 10, 4}, Activation::Tanh, 64, 2.0, 8);
        auto w = mlp.initial_point();
        const std::size_t b = w.size();
        const auto full = value_and_grad(mlp, w);
        double worst = 0.0;
        for (std::size_t s = 0; s < b; ++s) {
            const auto part = mlp.evaluate(w, s, nullptr, 0);
            for (std::size_t i = s; i < b; ++i) worst = std::max(worst, (part.grads[i] - full.grads[i]).cwiseAbs().maxCoeff());
        }
        bool cache_ok = true;
        std::string cache_detail;
        Rng rng(8);
        for (std::size_t s = 1; s < b; ++s) {
            MlpForwardCache cache;
            mlp.forward_with_cache(w, cache, 0);
            auto w2 = w;
            for (std::size_t i = s; i < b; ++i) w2[i] += 0.01 * dropmuon::detail::gaussian_matrix(w2[i].rows(), w2[i].cols(), 1.0, rng);
            const auto cached = mlp.forward_with_cache(w2, cache, s);
            const auto plain = mlp.forward(w2);
            const bool same = cached.loss == plain.loss && !cached.cache_invalid;
            const bool fewer = cached.macs < plain.macs;
            cache_ok = cache_ok && same && fewer;
            cache_detail += " prefix " + std::to_string(s) + ": " + std::to_string(cached.macs) + " vs " +
                            std::to_string(plain.macs) + " MACs" + (same ? "" : " (loss differs)") + ";";
        }
        r.metrics = {{"max_gradient_difference", worst}};
        r.passed = worst <= 1e-12 && cache_ok;
        r.detail = "max truncated-vs-full gradient difference " + format_number(worst) + " (tol 1e-12);" + cache_detail;
    });
}

inline std::vector<std::function<CheckResult()>> acceptance_criteria() {
    return {[] { return criterion_geometry(); },      [] { return criterion_marginals(); },
            [] { return criterion_descent_rate(); },  [] { return criterion_optimal_probs(); },
            [] { return criterion_l0l1_condition(); }, [] { return criterion_stochastic_trend(); },
            [] { return criterion_cost_ratio(); },    [] { return criterion_mlp(); }};
}

}  // namespace dropmuon::harness

#endif  // DROPMUON_HARNESS_CRITERIA_HPP
