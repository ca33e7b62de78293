// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_COSTMODEL_HPP
#define DROPMUON_COSTMODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sampling.hpp"
#include "smoothness.hpp"
#include "theory.hpp"

namespace dropmuon {

struct CostParams {
    double c_ov = 0.0;
    std::vector<double> c;
    std::vector<double> c_sharp;

    std::size_t layers() const { return c.size(); }

    void validate(std::size_t b) const {
        if (c.size() != b || c_sharp.size() != b)
            throw std::invalid_argument("cost params: c and c_sharp need " + std::to_string(b) + " entries");
        if (!(c_ov >= 0.0) || !std::isfinite(c_ov)) throw std::invalid_argument("cost params: c_ov must be >= 0");
        for (std::size_t i = 0; i < b; ++i) {
            if (!(c[i] > 0.0) || !std::isfinite(c[i]))
                throw std::invalid_argument("cost params: c_" + std::to_string(i + 1) + " must be > 0");
            if (!(c_sharp[i] >= 0.0) || !std::isfinite(c_sharp[i]))
                throw std::invalid_argument("cost params: c_sharp_" + std::to_string(i + 1) + " must be >= 0");
        }
    }

    static CostParams uniform(std::size_t b, double c_ov, double c, double c_sharp) {
        return {c_ov, std::vector<double>(b, c), std::vector<double>(b, c_sharp)};
    }
};

enum class CostRegime { Smooth, L0L1Eps2, L0L1Eps };

inline CostRegime cost_regime_from_string(std::string_view name) {
    if (name == "smooth") return CostRegime::Smooth;
    if (name == "l0l1-eps" || name == "l0l1_eps") return CostRegime::L0L1Eps;
    if (name == "l0l1-eps2" || name == "l0l1_eps2") return CostRegime::L0L1Eps2;
    throw std::invalid_argument("unknown regime '" + std::string(name) + "' (expected smooth, l0l1-eps, l0l1-eps2)");
}

inline std::string_view to_string(CostRegime r) {
    switch (r) {
        case CostRegime::Smooth: return "smooth";
        case CostRegime::L0L1Eps2: return "l0l1-eps2";
        case CostRegime::L0L1Eps: return "l0l1-eps";
    }
    return "smooth";
}

// c_ov + sum_{i >= min S} c_i + sum_{i in S} c_sharp_i
inline double iteration_cost(const ActiveSet& s, const CostParams& cp) {
    double total = cp.c_ov;
    for (std::size_t i = s.min_index(); i < cp.c.size(); ++i) total += cp.c[i];
    for (std::size_t i : s.indices) total += cp.c_sharp[i];
    return total;
}

struct ExpectedCostTerms {
    double overhead = 0.0;
    double propagation = 0.0;  // sum c_i F_i
    double update = 0.0;       // sum c_sharp_i Q_i
    double total() const { return overhead + propagation + update; }
};

inline ExpectedCostTerms expected_cost_terms(const SamplingScheme& scheme, const CostParams& cp) {
    validate(scheme);
    const std::size_t b = layer_count(scheme);
    cp.validate(b);
    const auto m = marginals(scheme);
    ExpectedCostTerms t;
    t.overhead = cp.c_ov;
    for (std::size_t i = 0; i < b; ++i) {
        t.propagation += cp.c[i] * m.F[i];
        t.update += cp.c_sharp[i] * m.Q[i];
    }
    return t;
}

inline double expected_iteration_cost(const SamplingScheme& scheme, const CostParams& cp) {
    return expected_cost_terms(scheme, cp).total();
}

struct CostBreakdown {
    double iteration_cost = 0.0;  // expected cost of one iteration
    ExpectedCostTerms terms;
    double min_weight = 0.0;
    double k_unrounded = 0.0;
    double k = 0.0;
    double eps2_term = 0.0;  // (L0, L1) regimes only
    double eps_term = 0.0;
    double total = 0.0;
};

// Expected cost of reaching accuracy eps: K from the iteration bound with min_i w_i as the
// normalizer, times the expected per-iteration cost.
inline CostBreakdown total_cost(const SamplingScheme& scheme, const CostParams& cp, const SmoothnessTable& table,
                                double eps, CostRegime regime, double delta0 = 1.0, bool apply_ceiling = true) {
    if (!(eps > 0.0)) throw std::invalid_argument("total_cost: eps must be positive");
    if (!(delta0 >= 0.0)) throw std::invalid_argument("total_cost: delta0 must be non-negative");
    CostBreakdown out;
    out.terms = expected_cost_terms(scheme, cp);
    out.iteration_cost = out.terms.total();
    if (regime == CostRegime::Smooth) {
        const auto w = theory_weights(scheme, &table, WeightRegime::Smooth);
        out.min_weight = w.min;
        out.k_unrounded = delta0 / (eps * w.min);
    } else {
        const auto w = theory_weights(scheme, &table, WeightRegime::L0L1);
        out.min_weight = w.min;
        const auto terms = l0l1_iteration_terms(l0l1_curvature_sum(scheme, table), w.min, eps, delta0);
        out.eps2_term = terms.eps2_term;
        out.eps_term = terms.eps_term;
        out.k_unrounded = regime == CostRegime::L0L1Eps2 ? terms.eps2_term : terms.eps_term;
    }
    out.k = apply_ceiling ? std::ceil(out.k_unrounded) : out.k_unrounded;
    out.total = out.k * out.iteration_cost;
    return out;
}

// ---------------------------------------------------------------------------
// RPT objectives over the cutoff distribution p.

// d_j = c_ov + sum_{i >= j} (c_i + c_sharp_i); expected RPT cost is sum_j d_j p_j.
inline std::vector<double> rpt_cost_coefficients(const CostParams& cp) {
    const std::size_t b = cp.c.size();
    std::vector<double> d(b);
    double tail = 0.0;
    for (std::size_t j = b; j-- > 0;) {
        tail += cp.c[j] + cp.c_sharp[j];
        d[j] = cp.c_ov + tail;
    }
    return d;
}

// Dense lower-triangular view of an RptCutoff table for fast objective evaluation.
class RptObjective {
public:
    RptObjective(const SmoothnessTable& table, const CostParams& cp, CostRegime regime)
        : b_(table.layers()), regime_(regime), d_(rpt_cost_coefficients(cp)) {
        if (table.mode() != SmoothnessTable::Mode::RptCutoff)
            throw std::invalid_argument("rpt objective: table must be in cutoff mode");
        cp.validate(b_);
        l0_.assign(b_ * b_, 0.0);
        l1_.assign(b_ * b_, 0.0);
        for (std::size_t i = 0; i < b_; ++i)
            for (std::size_t s = 0; s <= i; ++s) {
                if (regime != CostRegime::L0L1Eps) l0_[i * b_ + s] = table.l0(i, s);
                if (regime != CostRegime::Smooth) l1_[i * b_ + s] = table.l1(i, s);
            }
    }

    std::size_t layers() const { return b_; }
    const std::vector<double>& cost_coefficients() const { return d_; }

    double operator()(const std::vector<double>& p) const {
        double cost = 0.0;
        for (std::size_t j = 0; j < b_; ++j) cost += d_[j] * p[j];
        double min_w = std::numeric_limits<double>::infinity();
        double curvature = 0.0;
        double f = 0.0;
        for (std::size_t i = 0; i < b_; ++i) {
            f += p[i];
            double w = 0.0;
            if (regime_ == CostRegime::Smooth) {
                for (std::size_t s = 0; s <= i; ++s)
                    if (p[s] > 0.0) w += p[s] / (2.0 * l0_[i * b_ + s]);
            } else {
                double e1 = 0.0, e0 = 0.0;
                for (std::size_t s = 0; s <= i; ++s) {
                    e1 += p[s] * l1_[i * b_ + s];
                    e0 += p[s] * l0_[i * b_ + s];
                }
                if (f <= 0.0) return std::numeric_limits<double>::infinity();
                w = e1 > 0.0 ? f * f / e1 : std::numeric_limits<double>::infinity();
                if (regime_ == CostRegime::L0L1Eps2 && e1 > 0.0) curvature += f * f * e0 / (e1 * e1);
            }
            min_w = std::min(min_w, w);
        }
        if (!(min_w > 0.0)) return std::numeric_limits<double>::infinity();
        if (regime_ == CostRegime::L0L1Eps2) return curvature / (min_w * min_w) * cost;
        return cost / min_w;
    }

private:
    std::size_t b_;
    CostRegime regime_;
    std::vector<double> d_;
    std::vector<double> l0_, l1_;
};

// ---------------------------------------------------------------------------
// Simplex grid.

// Visits every p = k / n with k_1 + ... + k_b = n in ascending lexicographic order of k,
// starting at (0, ..., 0, n) and ending at (n, 0, ..., 0).
template <class Fn>
void for_each_simplex_point(std::size_t b, std::size_t n, Fn&& fn) {
    std::vector<std::size_t> k(b, 0);
    std::vector<double> p(b, 0.0);
    const double inv = 1.0 / static_cast<double>(n);
    k[b - 1] = n;
    while (true) {
        for (std::size_t j = 0; j < b; ++j) p[j] = static_cast<double>(k[j]) * inv;
        fn(static_cast<const std::vector<double>&>(p));
        if (b == 1) return;
        if (k[b - 1] > 0) {
            ++k[b - 2];
            --k[b - 1];
            continue;
        }
        std::size_t j = b - 2;
        while (k[j] == 0) --j;
        if (j == 0) return;
        ++k[j - 1];
        k[b - 1] = k[j] - 1;
        k[j] = 0;
    }
}

inline double simplex_grid_size(std::size_t b, std::size_t n) {
    return detail::binomial(n + b - 1, b - 1);
}

struct GridResult {
    std::vector<double> p;
    double value = std::numeric_limits<double>::infinity();
};

// Exhaustive minimizer over the simplex grid of resolution 1/n. Ties keep the first point visited.
inline GridResult brute_force_optimal_probs(const std::function<double(const std::vector<double>&)>& objective,
                                            std::size_t b, std::size_t n = 200) {
    if (b < 1 || n < 1) throw std::invalid_argument("brute force: need b >= 1 and n >= 1");
    if (simplex_grid_size(b, n) > 5e7) throw std::invalid_argument("brute force: grid too large");
    GridResult best;
    for_each_simplex_point(b, n, [&](const std::vector<double>& p) {
        const double v = objective(p);
        if (best.p.empty() || v < best.value) {
            best.value = v;
            best.p = p;
        }
    });
    return best;
}

// ---------------------------------------------------------------------------
// Smooth RPT optimum.

struct RecursionResult {
    std::vector<double> p;
    std::vector<double> q;
};

// q_1 = 2 L_{1,[b]}; r_i = 1 - sum_{s<i} q_s / (2 L_{i,{s..b}}); q_i = 2 [r_i]_+ L_{i,{i..b}}; p = q / sum q.
inline RecursionResult optimal_rpt_probs_smooth(const SmoothnessTable& table, const CostParams& cp = {}) {
    if (table.mode() != SmoothnessTable::Mode::RptCutoff)
        throw std::invalid_argument("optimal_rpt_probs_smooth: table must be in cutoff mode");
    const std::size_t b = table.layers();
    if (b < 1) throw std::invalid_argument("optimal_rpt_probs_smooth: empty table");
    if (!cp.c.empty()) cp.validate(b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t s = 0; s <= i; ++s)
            if (!(table.l0(i, s) > 0.0))
                throw std::invalid_argument("optimal_rpt_probs_smooth: zero constant L0 for layer " +
                                            std::to_string(i + 1) + ", cutoff " + std::to_string(s + 1));
    RecursionResult out;
    out.q.assign(b, 0.0);
    out.q[0] = 2.0 * table.l0(0, 0);
    for (std::size_t i = 1; i < b; ++i) {
        double r = 1.0;
        for (std::size_t s = 0; s < i; ++s) r -= out.q[s] / (2.0 * table.l0(i, s));
        out.q[i] = r > 0.0 ? 2.0 * r * table.l0(i, i) : 0.0;
    }
    const double total = std::accumulate(out.q.begin(), out.q.end(), 0.0);
    out.p.resize(b);
    for (std::size_t i = 0; i < b; ++i) out.p[i] = out.q[i] / total;
    return out;
}

// L0_{1,[b]} = max_i L0_{i,[b]} (ties count as optimal).
inline bool full_network_optimal_smooth(const SmoothnessTable& table) {
    const double first = table.l0(0, 0);
    for (std::size_t i = 1; i < table.layers(); ++i)
        if (table.l0(i, 0) > first) return false;
    return true;
}

inline bool full_network_optimal_l0l1(const SmoothnessTable& table) {
    const double first = table.l1(0, 0);
    for (std::size_t i = 1; i < table.layers(); ++i)
        if (table.l1(i, 0) > first) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Partitioned sampling optimum.

struct PartitionOptimum {
    std::vector<double> p;
    std::vector<double> block_max;      // max_{i in B_k} L_{i,B_k}
    std::vector<std::size_t> argmax;    // layer attaining the block max
    std::vector<double> d;              // per-block cost coefficient
    std::vector<double> dual;           // LP dual certificate, one entry per layer
    double minimal_cost = 0.0;
};

inline PartitionOptimum optimal_partition_probs(const std::vector<std::vector<std::size_t>>& blocks,
                                                const SmoothnessTable& table, CostRegime objective,
                                                const CostParams& cp) {
    if (objective == CostRegime::L0L1Eps2)
        throw std::invalid_argument("optimal_partition_probs: closed form covers smooth and l0l1-eps only");
    std::size_t b = 0;
    for (const auto& blk : blocks) {
        if (blk.empty()) throw std::invalid_argument("optimal_partition_probs: empty block");
        b += blk.size();
    }
    cp.validate(b);
    const bool smooth = objective == CostRegime::Smooth;
    PartitionOptimum out;
    const std::size_t m = blocks.size();
    out.p.resize(m);
    out.block_max.resize(m);
    out.argmax.resize(m);
    out.d.resize(m);
    out.dual.assign(b, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double best = -1.0;
        for (std::size_t i : blocks[k]) {
            const double v = smooth ? table.l0(i, k) : table.l1(i, k);
            if (v > best) {
                best = v;
                out.argmax[k] = i;
            }
        }
        if (!(best > 0.0))
            throw std::invalid_argument("optimal_partition_probs: block " + std::to_string(k + 1) +
                                        " needs a positive constant");
        out.block_max[k] = best;
        total += best;
        const std::size_t lo = *std::min_element(blocks[k].begin(), blocks[k].end());
        double d = cp.c_ov;
        for (std::size_t j = lo; j < b; ++j) d += cp.c[j];
        for (std::size_t j : blocks[k]) d += cp.c_sharp[j];
        out.d[k] = d;
    }
    const double scale = smooth ? 2.0 : 1.0;
    for (std::size_t k = 0; k < m; ++k) {
        out.p[k] = out.block_max[k] / total;
        out.minimal_cost += scale * out.d[k] * out.block_max[k];
        // delta_{i,k} = 1 / (scale L_{i,k}); dual lambda_{i_k} = d_k / delta_{i_k,k}.
        out.dual[out.argmax[k]] = out.d[k] * scale * out.block_max[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// (L0, L1) RPT optimum by grid search plus pairwise-transfer pattern search.

struct L0L1Solution {
    std::vector<double> p;
    double objective = 0.0;
    double full_network_objective = 0.0;
    bool beat_full_network = false;
    bool full_network_condition = false;  // L1_{1,[b]} = max_i L1_{i,[b]}
    std::size_t grid_resolution = 0;
};

inline constexpr std::size_t kL0L1MaxLayers = 8;

namespace detail {

inline std::size_t l0l1_grid_resolution(std::size_t b) {
    std::size_t n = 2000;
    while (n > 4 && simplex_grid_size(b, n) > 1e5) n = n * 9 / 10;
    return n;
}

inline void refine_pairwise(const RptObjective& f, std::vector<double>& p, double& value, double h) {
    const std::size_t b = p.size();
    std::vector<double> trial(b);
    while (h > 1e-15) {
        bool improved = false;
        for (std::size_t from = 0; from < b; ++from) {
            for (std::size_t to = 0; to < b; ++to) {
                if (from == to || p[from] <= 0.0) continue;
                const double move = std::min(h, p[from]);
                trial = p;
                trial[from] -= move;
                trial[to] += move;
                if (trial[from] < 1e-300) trial[from] = 0.0;
                const double v = f(trial);
                if (v < value) {
                    value = v;
                    p = trial;
                    improved = true;
                }
            }
        }
        if (!improved) h *= 0.5;
    }
}

}  // namespace detail

inline L0L1Solution optimal_rpt_probs_l0l1(const SmoothnessTable& table, const CostParams& cp, CostRegime regime) {
    if (regime == CostRegime::Smooth)
        throw std::invalid_argument("optimal_rpt_probs_l0l1: regime must be l0l1-eps or l0l1-eps2");
    const std::size_t b = table.layers();
    if (b > kL0L1MaxLayers)
        throw std::invalid_argument("optimal_rpt_probs_l0l1: b = " + std::to_string(b) + " exceeds the limit of " +
                                    std::to_string(kL0L1MaxLayers) + "; use partitioned sampling instead");
    if (!table.has_l1()) throw MissingConstant("optimal_rpt_probs_l0l1: table has no L1 constants");
    const RptObjective f(table, cp, regime);

    L0L1Solution out;
    out.full_network_condition = full_network_optimal_l0l1(table);
    std::vector<double> e1(b, 0.0);
    e1[0] = 1.0;
    out.full_network_objective = f(e1);
    out.grid_resolution = b == 1 ? 1 : detail::l0l1_grid_resolution(b);

    // Keep the best few grid points as refinement starts.
    constexpr std::size_t kStarts = 4;
    std::vector<GridResult> starts;
    for_each_simplex_point(b, out.grid_resolution, [&](const std::vector<double>& p) {
        const double v = f(p);
        if (!std::isfinite(v)) return;
        if (starts.size() < kStarts || v < starts.back().value) {
            GridResult g{p, v};
            auto it = std::upper_bound(starts.begin(), starts.end(), g,
                                       [](const GridResult& a, const GridResult& c) { return a.value < c.value; });
            starts.insert(it, g);
            if (starts.size() > kStarts) starts.pop_back();
        }
    });
    starts.push_back({e1, out.full_network_objective});

    std::vector<double> best_p = e1;
    double best = out.full_network_objective;
    const double h0 = 1.0 / static_cast<double>(out.grid_resolution);
    for (auto& s : starts) {
        detail::refine_pairwise(f, s.p, s.value, h0);
        if (s.value < best) {
            best = s.value;
            best_p = s.p;
        }
    }
    out.beat_full_network = best < out.full_network_objective * (1.0 - 1e-12);
    if (out.beat_full_network) {
        out.p = best_p;
        out.objective = best;
    } else {
        out.p = e1;
        out.objective = out.full_network_objective;
    }
    return out;
}

// ---------------------------------------------------------------------------
// tau-nice scan.

struct TauScanRow {
    std::size_t tau = 0;
    double a = 0.0;        // max_i L_{i,tau}
    double b = 0.0;        // expected cost scaled by b / tau
    double product = 0.0;  // A(tau) B(tau)
    double expected_iteration_cost = 0.0;
};

struct TauScan {
    std::vector<TauScanRow> rows;
    std::size_t best_tau = 0;
    bool b_strictly_decreasing = true;
};

inline TauScan tau_nice_cost_scan(const CostParams& cp, const std::function<double(std::size_t, std::size_t)>& l0) {
    const std::size_t b = cp.c.size();
    cp.validate(b);
    TauScan out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t tau = 1; tau <= b; ++tau) {
        TauScanRow row;
        row.tau = tau;
        for (std::size_t i = 0; i < b; ++i) row.a = std::max(row.a, l0(i, tau));
        row.expected_iteration_cost = expected_iteration_cost(TauNice{b, tau}, cp);
        row.b = static_cast<double>(b) / static_cast<double>(tau) * row.expected_iteration_cost;
        row.product = row.a * row.b;
        if (!out.rows.empty() && !(row.b < out.rows.back().b)) out.b_strictly_decreasing = false;
        if (row.product < best) {
            best = row.product;
            out.best_tau = tau;
        }
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace dropmuon

#endif  // DROPMUON_COSTMODEL_HPP
