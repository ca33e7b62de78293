// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_THEORY_HPP
#define DROPMUON_THEORY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sampling.hpp"
#include "smoothness.hpp"

namespace dropmuon {

class LayerNeverUpdated : public std::runtime_error {
public:
    explicit LayerNeverUpdated(std::size_t i)
        : std::runtime_error("layer " + std::to_string(i + 1) + " never updated"), layer(i) {}
    std::size_t layer;
};

enum class WeightRegime { Smooth, L0L1, Stochastic };

// Per-layer moments of the sampling distribution against the smoothness table:
// prob[i] = P(i in S), inv_l0[i] = E[1{i in S} / (2 L0_{i,S})],
// l0[i] = E[L0_{i,S} 1{i in S}], l1[i] = E[L1_{i,S} 1{i in S}].
struct SamplingMoments {
    std::vector<double> prob, inv_l0, l0, l1;
};

inline SamplingMoments sampling_moments(const SamplingScheme& scheme, const SmoothnessTable* table,
                                        bool need_l1) {
    const std::size_t b = layer_count(scheme);
    SamplingMoments m{std::vector<double>(b, 0.0), std::vector<double>(b, 0.0), std::vector<double>(b, 0.0),
                      std::vector<double>(b, 0.0)};
    for (const auto& ws : support_with_probabilities(scheme)) {
        std::size_t key = 0;
        if (table) key = table->key_for(ws.set);
        for (std::size_t i : ws.set.indices) {
            m.prob[i] += ws.probability;
            if (!table) continue;
            const double a = table->l0(i, key);
            m.l0[i] += ws.probability * a;
            m.inv_l0[i] += a > 0.0 ? ws.probability / (2.0 * a) : INFINITY;
            if (need_l1) m.l1[i] += ws.probability * table->l1(i, key);
        }
    }
    return m;
}

struct TheoryWeights {
    std::vector<double> w;
    double mean = 0.0;
    double min = 0.0;

    // Right-hand side of the smooth-regime rate: delta0 / (K mean(w)).
    double smooth_rate_bound(double delta0, double k) const { return delta0 / (k * mean); }

    // Normalized weights w_i / mean(w).
    std::vector<double> normalized() const {
        std::vector<double> out(w);
        for (double& v : out) v /= mean;
        return out;
    }
};

// Smooth: w_i = E[1{i in S}/(2 L0_{i,S})].
// L0L1: w_i = P(i in S)^2 / E[L1_{i,S} 1{i in S}].
// Stochastic: w_i = P(i in S) eta_i.
inline TheoryWeights theory_weights(const SamplingScheme& scheme, const SmoothnessTable* table, WeightRegime regime,
                                    const std::vector<double>& eta = {}) {
    validate(scheme);
    const std::size_t b = layer_count(scheme);
    if (regime != WeightRegime::Stochastic && !table)
        throw std::invalid_argument("theory_weights: regime requires a smoothness table");
    if (regime == WeightRegime::L0L1 && !table->has_l1())
        throw MissingConstant("theory_weights: l0l1 regime requires L1 constants");
    if (regime == WeightRegime::Stochastic && !eta.empty() && eta.size() != b)
        throw std::invalid_argument("theory_weights: eta needs one entry per layer");
    const auto m = sampling_moments(scheme, regime == WeightRegime::Stochastic ? nullptr : table,
                                    regime == WeightRegime::L0L1);
    TheoryWeights out;
    out.w.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        switch (regime) {
            case WeightRegime::Smooth: out.w[i] = m.inv_l0[i]; break;
            case WeightRegime::L0L1:
                if (m.prob[i] > 0.0 && m.l1[i] <= 0.0)
                    throw std::invalid_argument("theory_weights: L1 of layer " + std::to_string(i + 1) +
                                                " must be positive");
                out.w[i] = m.prob[i] > 0.0 ? m.prob[i] * m.prob[i] / m.l1[i] : 0.0;
                break;
            case WeightRegime::Stochastic: out.w[i] = m.prob[i] * (eta.empty() ? 1.0 : eta[i]); break;
        }
        if (!(out.w[i] > 0.0)) throw LayerNeverUpdated(i);
    }
    out.mean = std::accumulate(out.w.begin(), out.w.end(), 0.0) / static_cast<double>(b);
    out.min = *std::min_element(out.w.begin(), out.w.end());
    return out;
}

// The two additive terms of the (L0, L1) iteration bound, with a given normalizer
// (mean(w) for the rate statement, min(w) for the cost analysis):
// eps2 = 2 delta0 sum_i P_i^2 E[L0 1] / E[L1 1]^2 / (eps^2 norm^2), eps = 2 delta0 / (eps norm).
struct L0L1IterationTerms {
    double eps2_term = 0.0;
    double eps_term = 0.0;
    double total() const { return eps2_term + eps_term; }
};

inline double l0l1_curvature_sum(const SamplingScheme& scheme, const SmoothnessTable& table) {
    const auto m = sampling_moments(scheme, &table, true);
    double sum = 0.0;
    for (std::size_t i = 0; i < m.prob.size(); ++i) {
        if (m.prob[i] <= 0.0) throw LayerNeverUpdated(i);
        sum += m.prob[i] * m.prob[i] * m.l0[i] / (m.l1[i] * m.l1[i]);
    }
    return sum;
}

inline L0L1IterationTerms l0l1_iteration_terms(double curvature_sum, double normalizer, double eps, double delta0) {
    return {2.0 * delta0 * curvature_sum / (eps * eps * normalizer * normalizer), 2.0 * delta0 / (eps * normalizer)};
}

// Iteration count guaranteeing min_k weighted E||grad||_* <= eps in the (L0, L1) regime.
inline double l0l1_iterations(const SamplingScheme& scheme, const SmoothnessTable& table, double eps,
                              double delta0) {
    const auto w = theory_weights(scheme, &table, WeightRegime::L0L1);
    return std::ceil(l0l1_iteration_terms(l0l1_curvature_sum(scheme, table), w.mean, eps, delta0).total());
}

}  // namespace dropmuon

#endif  // DROPMUON_THEORY_HPP
