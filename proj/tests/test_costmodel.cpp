// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#include <cmath>

#include <gtest/gtest.h>

#include <dropmuon/costmodel.hpp>
#include <dropmuon/rng.hpp>

using namespace dropmuon;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (double& v : p) total += (v = -std::log(1.0 - rng.uniform()));
    for (double& v : p) v /= total;
    return p;
}

// Random nested cutoff table: L_{i,s} non-increasing in s.
SmoothnessTable random_nested_table(Rng& rng, std::size_t b) {
    std::vector<std::vector<double>> l0(b);
    for (std::size_t i = 0; i < b; ++i) {
        double v = std::exp(3.0 * rng.uniform() - 1.5);
        for (std::size_t s = 0; s <= i; ++s) {
            l0[i].push_back(v);
            v *= 0.5 + 0.5 * rng.uniform();
        }
    }
    return SmoothnessTable::rpt(l0);
}

CostParams random_cost(Rng& rng, std::size_t b) {
    CostParams cp;
    cp.c_ov = rng.uniform();
    for (std::size_t i = 0; i < b; ++i) {
        cp.c.push_back(0.1 + rng.uniform());
        cp.c_sharp.push_back(rng.uniform());
    }
    return cp;
}

}  // namespace

TEST(IterationCost, Examples) {
    const CostParams cp{1.0, {1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}};
    EXPECT_NEAR(iteration_cost(ActiveSet{{1, 2}}, cp), 6.5, 1e-15);
    EXPECT_NEAR(iteration_cost(ActiveSet::suffix(0, 3), cp), 1.0 + 6.0 + 0.6, 1e-15);
    EXPECT_NEAR(iteration_cost(ActiveSet{{2}}, cp), 1.0 + 3.0 + 0.3, 1e-15);
}

TEST(ExpectedCost, FullNetworkEqualsFullIteration) {
    const CostParams cp{1.0, {1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}};
    EXPECT_NEAR(expected_iteration_cost(FullNetwork{3}, cp), iteration_cost(ActiveSet::suffix(0, 3), cp), 1e-15);
}

TEST(ExpectedCost, TwoOutcomeRpt) {
    EXPECT_NEAR(expected_iteration_cost(Rpt{{0.5, 0.5}}, CostParams::uniform(2, 0.0, 1.0, 0.0)), 1.5, 1e-15);
}

TEST(ExpectedCost, TauNiceUpdateTerm) {
    // Propagation costs must be positive, so read the update term alone.
    const auto t = expected_cost_terms(TauNice{4, 2}, CostParams::uniform(4, 0.0, 1e-3, 1.0));
    EXPECT_NEAR(t.update, 2.0, 1e-15);
}

TEST(ExpectedCost, MatchesMonteCarlo) {
    Rng rng(21);
    const std::size_t b = 5;
    const CostParams cp = random_cost(rng, b);
    const std::vector<SamplingScheme> schemes{Rpt{random_simplex(rng, b)}, TauNice{b, 2},
                                              TauSubmodel{b, 3, random_simplex(rng, 3)},
                                              PartitionedSubmodel{{{0, 3}, {1, 2}, {4}}, random_simplex(rng, 3)},
                                              FullNetwork{b}};
    for (const auto& s : schemes) {
        const int n = 100000;
        double sum = 0.0, sq = 0.0;
        for (int t = 0; t < n; ++t) {
            const double c = iteration_cost(sample(s, rng), cp);
            sum += c;
            sq += c * c;
        }
        const double mean = sum / n, var = std::max(sq / n - mean * mean, 0.0);
        EXPECT_NEAR(expected_iteration_cost(s, cp), mean, 3.0 * std::sqrt(var / n) + 1e-12 * mean) << scheme_name(s);
    }
}

TEST(CostParams, Validation) {
    EXPECT_THROW(CostParams::uniform(2, 0.0, 0.0, 0.0).validate(2), std::invalid_argument);
    EXPECT_THROW(CostParams::uniform(2, -1.0, 1.0, 0.0).validate(2), std::invalid_argument);
    EXPECT_THROW(CostParams::uniform(2, 0.0, 1.0, 0.0).validate(3), std::invalid_argument);
    EXPECT_EQ(cost_regime_from_string("l0l1-eps2"), CostRegime::L0L1Eps2);
    EXPECT_THROW(cost_regime_from_string("fast"), std::invalid_argument);
}

TEST(TotalCost, FullNetworkSmooth) {
    // K = 2 L delta0 / eps with equal constants; total = K * full iteration cost.
    const double l = 3.0, eps = 0.1;
    const auto t = SmoothnessTable::rpt_uniform({l, l, l});
    const CostParams cp{0.5, {1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}};
    const auto c = total_cost(FullNetwork{3}, cp, t, eps, CostRegime::Smooth, 1.0, false);
    EXPECT_NEAR(c.k, 2.0 * l / eps, 1e-9);
    EXPECT_NEAR(c.total, 2.0 * l / eps * (0.5 + 6.0 + 0.6), 1e-9);
    EXPECT_NEAR(c.total, c.k * c.iteration_cost, 1e-9 * c.total);
}

TEST(TotalCost, HalvingEpsDoublesK) {
    const auto t = SmoothnessTable::rpt({{1.0}, {2.0, 1.0}});
    const auto cp = CostParams::uniform(2, 0.0, 1.0, 0.5);
    const auto a = total_cost(Rpt{{0.5, 0.5}}, cp, t, 0.2, CostRegime::Smooth, 1.0, false);
    const auto b = total_cost(Rpt{{0.5, 0.5}}, cp, t, 0.1, CostRegime::Smooth, 1.0, false);
    EXPECT_NEAR(b.k, 2.0 * a.k, 1e-12 * b.k);
    EXPECT_NEAR(b.total, 2.0 * a.total, 1e-12 * b.total);
    const auto ceiled = total_cost(Rpt{{0.5, 0.5}}, cp, t, 0.3, CostRegime::Smooth);
    EXPECT_EQ(ceiled.k, std::ceil(ceiled.k_unrounded));
}

TEST(TotalCost, RptAtFirstCutoffEqualsFullNetwork) {
    const auto t = SmoothnessTable::rpt({{1.0}, {2.0, 1.0}, {0.5, 0.4, 0.3}}, {{1.0}, {1.5, 1.0}, {2.0, 1.0, 1.0}});
    const auto cp = CostParams::uniform(3, 0.2, 1.0, 0.5);
    for (CostRegime r : {CostRegime::Smooth, CostRegime::L0L1Eps, CostRegime::L0L1Eps2}) {
        const auto a = total_cost(Rpt{{1.0, 0.0, 0.0}}, cp, t, 0.1, r);
        const auto b = total_cost(FullNetwork{3}, cp, t, 0.1, r);
        EXPECT_EQ(a.k, b.k);
        EXPECT_EQ(a.total, b.total);
    }
}

TEST(TotalCost, NeverUpdatedLayer) {
    const auto t = SmoothnessTable::rpt({{1.0}, {2.0, 1.0}});
    EXPECT_THROW(total_cost(Rpt{{0.0, 1.0}}, CostParams::uniform(2, 0, 1, 0), t, 0.1, CostRegime::Smooth),
                 LayerNeverUpdated);
}

TEST(OptimalRptSmooth, HandRecursion) {
    const auto r = optimal_rpt_probs_smooth(SmoothnessTable::rpt({{1.0}, {2.0, 1.0}}));
    EXPECT_NEAR(r.q[0], 2.0, 1e-15);
    EXPECT_NEAR(r.q[1], 1.0, 1e-15);
    EXPECT_NEAR(r.p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.p[1], 1.0 / 3.0, 1e-15);
}

TEST(OptimalRptSmooth, FirstLayerIsMax) {
    const auto r = optimal_rpt_probs_smooth(SmoothnessTable::rpt({{2.0}, {1.0, 1.0}}));
    EXPECT_EQ(r.p, (std::vector<double>{1.0, 0.0}));
}

TEST(OptimalRptSmooth, SingleLayer) {
    EXPECT_EQ(optimal_rpt_probs_smooth(SmoothnessTable::rpt({{5.0}})).p, std::vector<double>{1.0});
}

TEST(OptimalRptSmooth, ZeroConstantRejected) {
    EXPECT_THROW(optimal_rpt_probs_smooth(SmoothnessTable::rpt({{1.0}, {0.0, 1.0}})), std::invalid_argument);
}

TEST(OptimalRptSmooth, HandCaseAgreesWithGrid) {
    const auto t = SmoothnessTable::rpt({{1.0}, {2.0, 1.0}});
    const auto cp = CostParams::uniform(2, 0.0, 1.0, 0.0);
    const RptObjective f(t, cp, CostRegime::Smooth);
    const auto g = brute_force_optimal_probs(std::cref(f), 2, 300);
    EXPECT_NEAR(g.p[0], 2.0 / 3.0, 1.0 / 300);
}

TEST(OptimalRptSmooth, BeatsEveryGridPoint) {
    Rng rng(22);
    for (int t = 0; t < 60; ++t) {
        const std::size_t b = 2 + rng.index(3);
        const auto table = random_nested_table(rng, b);
        const auto cp = random_cost(rng, b);
        const RptObjective f(table, cp, CostRegime::Smooth);
        const double best = f(optimal_rpt_probs_smooth(table, cp).p);
        const auto g = brute_force_optimal_probs(std::cref(f), b, b == 4 ? 40 : 100);
        EXPECT_LE(best, g.value * (1.0 + 1e-9));
    }
}

TEST(OptimalRptSmooth, ExchangeTightness) {
    Rng rng(23);
    for (int t = 0; t < 200; ++t) {
        const std::size_t b = 2 + rng.index(5);
        const auto table = random_nested_table(rng, b);
        const auto r = optimal_rpt_probs_smooth(table);
        for (std::size_t i = 0; i < b; ++i) {
            if (r.p[i] <= 0.0) continue;
            double lhs = 0.0;
            for (std::size_t s = 0; s <= i; ++s) lhs += r.q[s] / (2.0 * table.l0(i, s));
            EXPECT_NEAR(lhs, 1.0, 1e-9);
        }
    }
}

TEST(OptimalRptSmooth, IndependentOfCosts) {
    Rng rng(24);
    const auto table = random_nested_table(rng, 5);
    const auto ref = optimal_rpt_probs_smooth(table).p;
    for (int t = 0; t < 10; ++t) EXPECT_EQ(optimal_rpt_probs_smooth(table, random_cost(rng, 5)).p, ref);
}

TEST(OptimalRptSmooth, FullNetworkEquivalence) {
    EXPECT_TRUE(full_network_optimal_smooth(SmoothnessTable::rpt_uniform({3.0, 1.0, 2.0})));
    EXPECT_FALSE(full_network_optimal_smooth(SmoothnessTable::rpt_uniform({1.0, 3.0, 2.0})));
    Rng rng(25);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t b = 2 + rng.index(5);
        const auto table = random_nested_table(rng, b);
        const auto p = optimal_rpt_probs_smooth(table).p;
        bool is_e1 = p[0] == 1.0;
        for (std::size_t i = 1; i < b; ++i) is_e1 = is_e1 && p[i] == 0.0;
        EXPECT_EQ(full_network_optimal_smooth(table), is_e1);
    }
}

TEST(OptimalPartition, ProportionalToBlockMax) {
    const auto t = SmoothnessTable::partition({{0, 1}, {2}}, {4.0, 2.0, 1.0});
    const auto cp = CostParams::uniform(3, 0.0, 1.0, 0.0);
    const auto r = optimal_partition_probs({{0, 1}, {2}}, t, CostRegime::Smooth, cp);
    EXPECT_NEAR(r.p[0], 0.8, 1e-15);
    EXPECT_NEAR(r.p[1], 0.2, 1e-15);
    EXPECT_EQ(r.argmax, (std::vector<std::size_t>{0, 2}));
}

TEST(OptimalPartition, EqualSingletonsAreUniform) {
    const auto t = SmoothnessTable::partition({{0}, {1}, {2}, {3}}, {2.0, 2.0, 2.0, 2.0});
    const auto r = optimal_partition_probs({{0}, {1}, {2}, {3}}, t, CostRegime::Smooth, CostParams::uniform(4, 1, 1, 1));
    for (double v : r.p) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(OptimalPartition, DualCertificateMatchesPrimal) {
    // Primal: min sum d_k p_k / min_i w_i; the LP dual value sum_i lambda_i equals the primal optimum.
    Rng rng(26);
    const std::vector<std::vector<std::size_t>> blocks{{0, 3}, {1}, {2, 4}};
    std::vector<double> l0(5);
    for (double& v : l0) v = 0.5 + 2.0 * rng.uniform();
    const auto t = SmoothnessTable::partition(blocks, l0);
    const auto cp = random_cost(rng, 5);
    const auto r = optimal_partition_probs(blocks, t, CostRegime::Smooth, cp);
    double dual = 0.0;
    for (double v : r.dual) dual += v;
    EXPECT_NEAR(dual, r.minimal_cost, 1e-12 * r.minimal_cost);
    const PartitionedSubmodel scheme{blocks, r.p};
    const auto c = total_cost(scheme, cp, t, 1.0, CostRegime::Smooth, 1.0, false);
    EXPECT_NEAR(c.total, r.minimal_cost, 1e-9 * r.minimal_cost);
    EXPECT_THROW(optimal_partition_probs({{0}, {}}, t, CostRegime::Smooth, cp), std::invalid_argument);
}

TEST(OptimalL0L1, FirstLayerMaxKeepsFullNetwork) {
    const auto t = SmoothnessTable::rpt({{1.0}, {1.0, 0.5}}, {{3.0}, {1.0, 0.8}});
    const auto cp = CostParams::uniform(2, 0.0, 1.0, 0.1);
    for (CostRegime r : {CostRegime::L0L1Eps, CostRegime::L0L1Eps2}) {
        const auto s = optimal_rpt_probs_l0l1(t, cp, r);
        EXPECT_TRUE(s.full_network_condition);
        EXPECT_EQ(s.p, (std::vector<double>{1.0, 0.0}));
        const RptObjective f(t, cp, r);
        EXPECT_LE(s.objective, brute_force_optimal_probs(std::cref(f), 2, 1000).value * (1 + 1e-12));
    }
}

TEST(OptimalL0L1, LaterLayerMaxMovesAway) {
    const auto t = SmoothnessTable::rpt({{1.0}, {1.0, 0.5}}, {{1.0}, {3.0, 2.0}});
    const auto cp = CostParams::uniform(2, 0.0, 1.0, 0.1);
    const auto s = optimal_rpt_probs_l0l1(t, cp, CostRegime::L0L1Eps);
    EXPECT_FALSE(s.full_network_condition);
    EXPECT_TRUE(s.beat_full_network);
    EXPECT_GT(s.p[1], 0.0);
    EXPECT_LT(s.objective, s.full_network_objective);
}

TEST(OptimalL0L1, InvariantUnderL1Scaling) {
    // Scaling every L1 by the same factor scales the eps objective by the same factor, so the argmin is unchanged.
    const std::vector<std::vector<double>> l0{{1.0}, {1.0, 0.5}, {1.0, 0.7, 0.4}};
    const std::vector<std::vector<double>> l1{{1.0}, {2.0, 1.5}, {3.0, 1.0, 0.6}};
    auto scaled = l1;
    for (auto& row : scaled)
        for (double& v : row) v *= 4.0;
    const auto cp = CostParams::uniform(3, 0.1, 1.0, 0.2);
    const auto a = optimal_rpt_probs_l0l1(SmoothnessTable::rpt(l0, l1), cp, CostRegime::L0L1Eps);
    const auto b = optimal_rpt_probs_l0l1(SmoothnessTable::rpt(l0, scaled), cp, CostRegime::L0L1Eps);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.p[i], b.p[i], 1e-9);
    EXPECT_NEAR(b.objective, 4.0 * a.objective, 1e-9 * b.objective);
}

TEST(OptimalL0L1, RejectsOversizedOrMissing) {
    const auto big = SmoothnessTable::rpt_uniform(std::vector<double>(9, 1.0), std::vector<double>(9, 1.0));
    try {
        optimal_rpt_probs_l0l1(big, CostParams::uniform(9, 0, 1, 0), CostRegime::L0L1Eps);
        FAIL() << "expected an exception";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("partitioned"), std::string::npos);
    }
    EXPECT_THROW(optimal_rpt_probs_l0l1(SmoothnessTable::rpt({{1.0}}), CostParams::uniform(1, 0, 1, 0),
                                       CostRegime::L0L1Eps),
                 MissingConstant);
}

TEST(BruteForce, ConstantObjectiveTieBreak) {
    const auto g = brute_force_optimal_probs([](const std::vector<double>&) { return 1.0; }, 3, 10);
    EXPECT_EQ(g.p, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(BruteForce, QuadraticToy) {
    const std::vector<double> target{0.234, 0.456, 0.31};
    auto f = [&](const std::vector<double>& p) {
        double v = 0.0;
        for (std::size_t i = 0; i < 3; ++i) v += (p[i] - target[i]) * (p[i] - target[i]);
        return v;
    };
    const auto g = brute_force_optimal_probs(f, 3, 100);
    EXPECT_NEAR(g.p[0], 0.23, 1e-12);
    EXPECT_NEAR(g.p[1], 0.46, 1e-12);
    EXPECT_NEAR(g.p[2], 0.31, 1e-12);
}

TEST(BruteForce, GridVisitsEveryPointOnce) {
    std::size_t count = 0;
    for_each_simplex_point(4, 7, [&](const std::vector<double>& p) {
        double total = 0.0;
        for (double v : p) total += v;
        EXPECT_NEAR(total, 1.0, 1e-12);
        ++count;
    });
    EXPECT_EQ(static_cast<double>(count), simplex_grid_size(4, 7));
}

TEST(TauScan, ConstantSmoothnessPicksFullBatch) {
    const auto s = tau_nice_cost_scan(CostParams::uniform(6, 0.5, 1.0, 0.3), [](std::size_t, std::size_t) { return 2.0; });
    EXPECT_EQ(s.best_tau, 6u);
    EXPECT_TRUE(s.b_strictly_decreasing);
}

TEST(TauScan, LinearSmoothnessPicksOne) {
    const auto s = tau_nice_cost_scan(CostParams::uniform(6, 0.5, 1.0, 0.3),
                                      [](std::size_t, std::size_t tau) { return static_cast<double>(tau); });
    EXPECT_EQ(s.best_tau, 1u);
    EXPECT_TRUE(s.b_strictly_decreasing);
    ASSERT_EQ(s.rows.size(), 6u);
    for (const auto& r : s.rows) EXPECT_NEAR(r.product, r.a * r.b, 1e-12);
}
