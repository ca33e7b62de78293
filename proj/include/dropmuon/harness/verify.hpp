// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_HARNESS_VERIFY_HPP
#define DROPMUON_HARNESS_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "../dropmuon.hpp"
#include "criteria.hpp"

namespace dropmuon::harness {

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"geometry", "sampling", "descent", "rates",
                                                   "cost",     "stochastic", "mlp",   "all"};
    return names;
}

// ---------------------------------------------------------------------------
// Checks beyond the acceptance criteria.

inline CheckResult check_newton_schulz_contract(std::uint64_t seed = 11) {
    return timed_check("newton-schulz-contract",
                       "banded Newton-Schulz keeps singular values in [0.7, 1.3] (rank <= 8, condition <= 100)", 0.0,
                       [&](CheckResult& r) {
        Rng rng(seed);
        double lo = INFINITY, hi = 0.0, default_lo = INFINITY, default_hi = 0.0;
        for (int n = 0; n < 300; ++n) {
            const auto rows = static_cast<Eigen::Index>(1 + rng.index(8));
            const auto cols = static_cast<Eigen::Index>(1 + rng.index(8));
            const auto k = std::min(rows, cols);
            // M = U diag(s) V^T with s log-spaced over a ratio of up to 100.
            Eigen::HouseholderQR<Matrix> qu(dropmuon::detail::gaussian_matrix(rows, rows, 1.0, rng));
            Eigen::HouseholderQR<Matrix> qv(dropmuon::detail::gaussian_matrix(cols, cols, 1.0, rng));
            const Matrix u = qu.householderQ() * Matrix::Identity(rows, k);
            const Matrix v = qv.householderQ() * Matrix::Identity(cols, k);
            const double ratio = detail::log_uniform(rng, 1.0, 100.0);
            Eigen::VectorXd s(k);
            for (Eigen::Index i = 0; i < k; ++i)
                s(i) = k == 1 ? 1.0 : std::pow(ratio, -static_cast<double>(i) / static_cast<double>(k - 1));
            const Matrix m = detail::log_uniform(rng, 1e-3, 1e3) * u * s.asDiagonal() * v.transpose();
            for (int iters : {5, 6, 8, 12}) {
                const auto sv = dropmuon::detail::singular_values(newton_schulz(m, NewtonSchulzConfig::banded(iters)));
                lo = std::min(lo, sv.minCoeff());
                hi = std::max(hi, sv.maxCoeff());
                const auto dv = dropmuon::detail::singular_values(newton_schulz(m, NewtonSchulzConfig{iters}));
                default_lo = std::min(default_lo, dv.minCoeff());
                default_hi = std::max(default_hi, dv.maxCoeff());
            }
        }
        r.metrics = {{"min_singular_value", lo},
                     {"max_singular_value", hi},
                     {"default_min_singular_value", default_lo},
                     {"default_max_singular_value", default_hi}};
        r.passed = lo >= 0.7 && hi <= 1.3;
        r.detail = "banded: [" + format_number(lo) + ", " + format_number(hi) + "]; default coefficients: [" +
                   format_number(default_lo) + ", " + format_number(default_hi) + "]";
    });
}

inline CheckResult check_sampling_support() {
    return timed_check("sampling-support", "support probabilities sum to one and reproduce the closed-form marginals", 0.0,
                       [&](CheckResult& r) {
        Rng rng(12);
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            const std::size_t b = 1 + rng.index(7);
            const std::size_t tau = 1 + rng.index(b);
            std::vector<SamplingScheme> schemes = {Rpt{detail::random_simplex(rng, b)}, TauNice{b, tau},
                                                   TauSubmodel{b, tau, detail::random_simplex(rng, b - tau + 1)},
                                                   FullNetwork{b}};
            for (const auto& sc : schemes) {
                const auto m = marginals(sc);
                std::vector<double> f(b, 0.0), q(b, 0.0);
                double total = 0.0;
                for (const auto& ws : support_with_probabilities(sc)) {
                    total += ws.probability;
                    for (std::size_t i = ws.set.min_index(); i < b; ++i) f[i] += ws.probability;
                    for (std::size_t i : ws.set.indices) q[i] += ws.probability;
                }
                worst = std::max(worst, std::abs(total - 1.0));
                for (std::size_t i = 0; i < b; ++i)
                    worst = std::max({worst, std::abs(f[i] - m.F[i]), std::abs(q[i] - m.Q[i])});
            }
        }
        r.metrics = {{"max_abs_error", worst}};
        r.passed = worst <= 1e-12;
        r.detail = "max abs error " + format_number(worst);
    });
}

inline CheckResult check_epoch_shift() {
    return timed_check("epoch-shift", "epoch-shift probabilities are distributions moving deeper with progress", 0.0,
                       [&](CheckResult& r) {
        bool ok = true;
        for (std::size_t b : {1, 2, 5, 12})
            for (double alpha : {0.0, 0.5, 2.0, 40.0}) {
                double prev_mean = -1.0;
                for (int step = 0; step <= 10; ++step) {
                    const auto p = epoch_shift_probs({b, alpha, step / 10.0});
                    double total = 0.0, mean = 0.0;
                    for (std::size_t i = 0; i < b; ++i) {
                        ok = ok && p[i] >= 0.0 && std::isfinite(p[i]);
                        total += p[i];
                        mean += static_cast<double>(i) * p[i];
                    }
                    ok = ok && std::abs(total - 1.0) <= 1e-12 && mean >= prev_mean - 1e-12;
                    prev_mean = mean;
                }
            }
        r.passed = ok;
        r.detail = ok ? "all distributions valid and monotone in progress" : "invalid epoch-shift distribution";
    });
}

inline CheckResult check_deterministic_descent() {
    return timed_check("deterministic-descent",
                       "monotone descent, frozen prefixes and the descent-lemma decrease on quadratics", 0.0,
                       [&](CheckResult& r) {
        const auto coupled = CoupledQuadratic::make(4, {3, 2}, {1.0, 0.5, 2.0, 1.5}, 0.8, {}, 1.0, 0.5, 21);
        const auto separable = SeparableQuadratic::make({{3, 4}, {2, 2}, {4, 1}, {3, 3}}, {1.0, 4.0, 2.0, 3.0},
                                                        {0.1, 0.2, 2.0, 0.3}, 1.0, 0.5, 22);
        std::size_t violations = 0, freeze_breaks = 0, steps = 0;
        double worst_shortfall = -INFINITY;
        for (const Problem* problem : {static_cast<const Problem*>(&coupled), static_cast<const Problem*>(&separable)}) {
            for (NormKind kind : {NormKind::Euclidean, NormKind::Spectral}) {
                const std::vector<NormKind> norms(4, kind);
                const std::vector<SamplingScheme> schemes = {
                    Rpt{{0.1, 0.2, 0.3, 0.4}}, FullNetwork{4},
                    PartitionedSubmodel{{{0, 2}, {1}, {3}}, {0.5, 0.25, 0.25}}};
                for (const auto& scheme : schemes) {
                    const auto table = smoothness_constants(*problem, scheme, norms);
                    LayerModel m{problem->initial_point(), norms};
                    for (std::size_t k = 0; k < 60; ++k) {
                        Rng rng = Rng::stream(5, 0, k);
                        const auto active = sample(scheme, rng);
                        const auto before = m.layers;
                        const auto rep = det_step(m, *problem, active, SmoothInverse{}, table);
                        ++steps;
                        if (rep.f_after > rep.f_before + 1e-10) ++violations;
                        worst_shortfall = std::max(worst_shortfall, rep.predicted_decrease - (rep.f_before - rep.f_after));
                        for (std::size_t i = 0; i < 4; ++i)
                            if (!active.contains(i) && !(m.layers[i].array() == before[i].array()).all()) ++freeze_breaks;
                    }
                }
            }
        }
        r.metrics = {{"steps", steps}, {"monotone_violations", violations}, {"frozen_layer_changes", freeze_breaks},
                     {"largest_decrease_shortfall", worst_shortfall}};
        r.passed = violations == 0 && freeze_breaks == 0 && worst_shortfall <= 1e-10;
        r.detail = std::to_string(steps) + " steps, " + std::to_string(violations) + " increases, " +
                   std::to_string(freeze_breaks) + " frozen-layer changes, largest shortfall against predicted decrease " +
                   format_number(worst_shortfall);
    });
}

inline CheckResult check_partition_optimum(std::uint64_t seed = 13) {
    return timed_check("partition-optimum", "partitioned closed form matches the simplex grid", 0.0,
                       [&](CheckResult& r) {
        Rng rng(seed);
        std::size_t failures = 0;
        for (int t = 0; t < 100; ++t) {
            const std::size_t b = 2 + rng.index(4);
            std::vector<std::vector<std::size_t>> blocks;
            std::vector<std::size_t> order(b);
            for (std::size_t i = 0; i < b; ++i) order[i] = i;
            for (std::size_t i = b; i-- > 1;) std::swap(order[i], order[rng.index(i + 1)]);
            const std::size_t m = 1 + rng.index(std::min<std::size_t>(b, 3));
            blocks.resize(m);
            for (std::size_t i = 0; i < b; ++i) blocks[i < m ? i : rng.index(m)].push_back(order[i]);
            for (auto& blk : blocks) std::sort(blk.begin(), blk.end());
            std::vector<double> l0(b);
            for (auto& v : l0) v = detail::log_uniform(rng, 0.1, 10.0);
            const auto table = SmoothnessTable::partition(blocks, l0);
            const auto cp = detail::random_cost(rng, b);
            const auto opt = optimal_partition_probs(blocks, table, CostRegime::Smooth, cp);
            auto cost_of = [&](const std::vector<double>& p) {
                const PartitionedSubmodel s{blocks, p};
                double min_w = INFINITY;
                const auto mom = sampling_moments(s, &table, false);
                for (double w : mom.inv_l0) min_w = std::min(min_w, w);
                return min_w > 0.0 ? expected_iteration_cost(s, cp) / min_w : INFINITY;
            };
            const double v = cost_of(opt.p);
            const auto grid = brute_force_optimal_probs(cost_of, m, 60);
            if (!(v <= grid.value * (1.0 + 1e-12)) || std::abs(v - opt.minimal_cost) > 1e-9 * v) ++failures;
        }
        r.metrics = {{"failures", failures}};
        r.passed = failures == 0;
        r.detail = std::to_string(failures) + " of 100 instances disagree with the grid or the reported minimum";
    });
}

inline CheckResult check_stochastic_descent_bound() {
    return timed_check("stochastic-descent-bound", "stochastic steps stay below the descent-lemma bound", 0.0,
                       [&](CheckResult& r) {
        const auto problem = CoupledQuadratic::make(3, {3, 3}, {1.0, 2.0, 0.5}, 0.5, {}, 1.0, 0.0, 31);
        const std::vector<NormKind> norms(3, NormKind::Spectral);
        RunSpec spec;
        spec.scheme = Rpt{{0.4, 0.4, 0.2}};
        spec.policy = Theorem4Schedule{200, {}};
        spec.iterations = 200;
        spec.table = smoothness_constants(problem, FullNetwork{3}, norms);
        spec.cost = CostParams::uniform(3, 0.0, 1.0, 0.0);
        spec.noise.sigma.assign(3, 0.3);
        std::size_t violations = 0, checked = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            spec.seed = seed;
            const auto res = run(problem, LayerModel{problem.initial_point(), norms}, spec);
            for (const auto& st : res.steps) {
                if (!st.report.descent_bound) continue;
                ++checked;
                if (st.report.f_after > *st.report.descent_bound + 1e-10) ++violations;
            }
        }
        r.metrics = {{"checked", checked}, {"violations", violations}};
        r.passed = checked > 0 && violations == 0;
        r.detail = std::to_string(violations) + " violations over " + std::to_string(checked) + " steps";
    });
}

// ---------------------------------------------------------------------------

inline std::vector<CheckResult> run_suite(const std::string& name) {
    const auto& names = suite_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown suite '" + name + "' (expected one of: " + list + ")");
    }
    std::vector<CheckResult> out;
    const bool all = name == "all";
    if (all || name == "geometry") {
        out.push_back(criterion_geometry());
        out.push_back(check_newton_schulz_contract());
    }
    if (all || name == "sampling") {
        out.push_back(criterion_marginals());
        out.push_back(check_sampling_support());
        out.push_back(check_epoch_shift());
    }
    if (all || name == "descent") out.push_back(check_deterministic_descent());
    if (all || name == "rates") out.push_back(criterion_descent_rate());
    if (all || name == "cost") {
        out.push_back(criterion_optimal_probs());
        out.push_back(criterion_l0l1_condition());
        out.push_back(criterion_cost_ratio());
        out.push_back(check_partition_optimum());
    }
    if (all || name == "stochastic") {
        out.push_back(criterion_stochastic_trend());
        out.push_back(check_stochastic_descent_bound());
    }
    if (all || name == "mlp") out.push_back(criterion_mlp());
    return out;
}

inline json suite_report(const std::string& name, const std::vector<CheckResult>& results) {
    json checks = json::array();
    bool ok = true;
    for (const auto& r : results) {
        checks.push_back(to_json(r));
        ok = ok && r.passed;
    }
    return json{{"schema_version", kSchemaVersion}, {"suite", name}, {"passed", ok}, {"checks", checks}};
}

}  // namespace dropmuon::harness

#endif  // DROPMUON_HARNESS_VERIFY_HPP
