// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_OPTIMIZER_HPP
#define DROPMUON_OPTIMIZER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "costmodel.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "problems.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "smoothness.hpp"
#include "theory.hpp"

namespace dropmuon {

struct SmoothInverse {};
struct GenSmoothInverse {};
struct FixedRadius {
    std::vector<double> t;
};
struct Theorem4Schedule {
    std::size_t horizon = 0;
    std::vector<double> eta;  // empty means eta_i = 1

    double radius(std::size_t i) const {
        const double e = eta.empty() ? 1.0 : eta.at(i);
        return e / std::pow(static_cast<double>(horizon) + 1.0, 0.75);
    }
    double beta() const { return 1.0 / std::sqrt(static_cast<double>(horizon) + 1.0); }
};

using StepPolicy = std::variant<SmoothInverse, GenSmoothInverse, FixedRadius, Theorem4Schedule>;

inline bool is_deterministic_policy(const StepPolicy& p) {
    return std::holds_alternative<SmoothInverse>(p) || std::holds_alternative<GenSmoothInverse>(p);
}

enum class Orthogonalization { ExactSvd, NewtonSchulz };

struct StepReport {
    ActiveSet active;
    double f_before = 0.0;
    double f_after = 0.0;
    std::vector<std::optional<double>> dual_grad_norm;  // exact ||grad_i f(X^k)||_*, active layers
    std::vector<std::optional<double>> applied;         // stepsize (deterministic) or radius (stochastic)
    std::vector<std::optional<double>> momentum_error;  // ||M_i - grad_i f(X^k)||_*, active layers
    std::vector<bool> degenerate;
    double predicted_decrease = 0.0;       // deterministic: sum_i ||g_i||_*^2 / (2 (L0 + L1 ||g_i||_*))
    std::optional<double> descent_bound;   // stochastic: upper bound on f(X^{k+1}) from the descent lemma
    std::uint64_t macs = 0;
    bool has_macs = false;
};

class StepError : public std::runtime_error {
public:
    StepError(std::size_t iteration, const std::string& what)
        : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration(iteration) {}
    std::size_t iteration;
};

// Evaluation state a run threads through its steps.
struct EvalContext {
    Workspace* workspace = nullptr;
    std::size_t unchanged_prefix = 0;
};

namespace detail {

inline StepReport make_report(const ActiveSet& active, std::size_t b) {
    StepReport r;
    r.active = active;
    r.dual_grad_norm.assign(b, std::nullopt);
    r.applied.assign(b, std::nullopt);
    r.momentum_error.assign(b, std::nullopt);
    r.degenerate.assign(b, false);
    return r;
}

inline void check_active(const ActiveSet& active, std::size_t b) {
    if (active.indices.empty()) throw std::invalid_argument("active set is empty");
    for (std::size_t t = 0; t < active.indices.size(); ++t) {
        if (active.indices[t] >= b) throw std::invalid_argument("active layer out of range");
        if (t > 0 && active.indices[t] <= active.indices[t - 1])
            throw std::invalid_argument("active set must be sorted without duplicates");
    }
}

}  // namespace detail

// X_i <- X_i - gamma_i sharp(grad_i f(X)) for i in the active set.
inline StepReport det_step(LayerModel& model, const Problem& problem, const ActiveSet& active,
                           const StepPolicy& policy, const SmoothnessTable& table, EvalContext* ctx = nullptr) {
    const std::size_t b = model.size();
    detail::check_active(active, b);
    const bool generalized = std::holds_alternative<GenSmoothInverse>(policy);
    if (!generalized && !std::holds_alternative<SmoothInverse>(policy))
        throw std::invalid_argument("det_step: policy must be SmoothInverse or GenSmoothInverse");
    const std::size_t key = table.key_for(active);
    const std::size_t s = active.min_index();

    EvalContext local;
    EvalContext& ec = ctx ? *ctx : local;
    const Evaluation ev = problem.evaluate(model.layers, s, ec.workspace, ec.unchanged_prefix);
    ec.unchanged_prefix = b;

    StepReport r = detail::make_report(active, b);
    r.f_before = ev.value;
    r.macs = ev.macs;
    r.has_macs = ev.has_macs;
    for (std::size_t i : active.indices) {
        const Matrix& g = ev.grads[i];
        const double dn = dual_norm(model.norms[i], g);
        const double l0 = table.l0(i, key);
        const double denom = generalized ? l0 + table.l1(i, key) * dn : l0;
        if (!(denom > 0.0))
            throw std::invalid_argument("det_step: non-positive smoothness constant for layer " + std::to_string(i + 1));
        const double gamma = 1.0 / denom;
        r.dual_grad_norm[i] = dn;
        r.applied[i] = gamma;
        r.predicted_decrease += dn * dn / (2.0 * denom);
        model.layers[i] -= gamma * sharp(model.norms[i], g);
    }
    ec.unchanged_prefix = s;
    r.f_after = problem.value(model.layers, nullptr, 0);
    return r;
}

struct StochStepOptions {
    NoiseSpec noise;
    Orthogonalization orthogonalization = Orthogonalization::ExactSvd;
    NewtonSchulzConfig newton_schulz;
    const SmoothnessTable* table = nullptr;  // enables the descent-lemma diagnostic
};

// M_i <- (1 - beta_i) M_i + beta_i g_i(X; xi), X_i <- X_i + lmo(M_i, t_i) for i in the active set.
inline StepReport stoch_step(LayerModel& model, const Problem& problem, MomentumState& momentum,
                             const ActiveSet& active, const std::vector<double>& radii, Rng& rng,
                             const StochStepOptions& opts = {}, EvalContext* ctx = nullptr) {
    const std::size_t b = model.size();
    detail::check_active(active, b);
    if (momentum.m.size() != b || momentum.beta.size() != b)
        throw std::invalid_argument("stoch_step: momentum state does not match the model");
    if (radii.size() != b) throw std::invalid_argument("stoch_step: one radius per layer required");
    for (std::size_t i : active.indices) {
        if (!(radii[i] > 0.0)) throw std::invalid_argument("stoch_step: radius must be positive for active layers");
        if (!(momentum.beta[i] >= 0.0 && momentum.beta[i] <= 1.0))
            throw std::invalid_argument("stoch_step: momentum beta must lie in [0, 1]");
    }
    const std::size_t s = active.min_index();

    EvalContext local;
    EvalContext& ec = ctx ? *ctx : local;
    const Evaluation ev = problem.evaluate(model.layers, s, ec.workspace, ec.unchanged_prefix);
    ec.unchanged_prefix = b;

    // Noise only for active layers, in ascending layer order.
    std::vector<Matrix> noisy(b);
    for (std::size_t i : active.indices) noisy[i] = ev.grads[i];
    add_gradient_noise(noisy, opts.noise, rng);

    StepReport r = detail::make_report(active, b);
    r.f_before = ev.value;
    r.macs = ev.macs;
    r.has_macs = ev.has_macs;
    double bound = ev.value;
    bool bound_valid = opts.table != nullptr && opts.orthogonalization == Orthogonalization::ExactSvd;
    const std::size_t key = bound_valid ? opts.table->key_for(active) : 0;
    for (std::size_t i : active.indices) {
        const NormKind kind = model.norms[i];
        const double beta = momentum.beta[i];
        momentum.m[i] = (1.0 - beta) * momentum.m[i] + beta * noisy[i];
        const double t = radii[i];
        const double gn = dual_norm(kind, ev.grads[i]);
        const double err = dual_norm(kind, momentum.m[i] - ev.grads[i]);
        r.dual_grad_norm[i] = gn;
        r.momentum_error[i] = err;
        r.applied[i] = t;
        const LmoResult dir = kind == NormKind::Spectral && opts.orthogonalization == Orthogonalization::NewtonSchulz
                                  ? lmo_newton_schulz(momentum.m[i], t, opts.newton_schulz)
                                  : lmo(kind, momentum.m[i], t);
        if (dir.degenerate) {
            r.degenerate[i] = true;
            continue;
        }
        model.layers[i] += dir.direction;
        if (bound_valid) {
            const double l1 = opts.table->has_l1() ? opts.table->l1(i, key) : 0.0;
            bound += 2.0 * t * err - t * gn + (opts.table->l0(i, key) + l1 * gn) / 2.0 * t * t;
        }
    }
    if (bound_valid) r.descent_bound = bound;
    ec.unchanged_prefix = s;
    r.f_after = problem.value(model.layers, nullptr, 0);
    return r;
}

// ---------------------------------------------------------------------------

enum class MomentumInit { Gradient, Zeros };

struct RunSpec {
    SamplingScheme scheme = FullNetwork{1};
    std::optional<double> epoch_shift_alpha;  // replaces the scheme by epoch-shift RPT, progress = k / K
    StepPolicy policy = SmoothInverse{};
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::optional<SmoothnessTable> table;
    CostParams cost;
    NoiseSpec noise;
    double beta = 1.0;  // momentum for FixedRadius; Theorem4Schedule sets its own
    MomentumInit momentum_init = MomentumInit::Gradient;
    Orthogonalization orthogonalization = Orthogonalization::ExactSvd;
    NewtonSchulzConfig newton_schulz;
    // Weights of the per-iteration dual-gradient aggregate sum_i w_i ||grad_i f(X^k)||_*^power.
    std::vector<double> aggregate_weights;
    double aggregate_power = 2.0;
};

struct RunStep {
    StepReport report;
    double units = 0.0;
    double cumulative_units = 0.0;
    std::uint64_t cumulative_macs = 0;
    double aggregate = 0.0;  // at X^k
};

struct RunResult {
    double initial_value = 0.0;
    std::vector<RunStep> steps;
    LayerModel final_model;
    std::vector<std::string> warnings;
};

inline double dual_grad_aggregate(const LayerModel& model, const std::vector<Matrix>& grads,
                                  const std::vector<double>& weights, double power) {
    double total = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        total += w * std::pow(dual_norm(model.norms[i], grads[i]), power);
    }
    return total;
}

inline RunResult run(const Problem& problem, LayerModel model, const RunSpec& spec) {
    model.validate();
    problem.check_shapes(model.layers);
    const std::size_t b = model.size();
    const std::size_t k_total = spec.iterations;
    if (!spec.epoch_shift_alpha) {
        validate(spec.scheme);
        if (layer_count(spec.scheme) != b) throw std::invalid_argument("run: scheme layer count mismatch");
    }
    spec.cost.validate(b);
    const bool deterministic = is_deterministic_policy(spec.policy);
    if (deterministic && !spec.table) throw std::invalid_argument("run: deterministic policies need a smoothness table");

    RunResult out;
    if (!spec.epoch_shift_alpha)
        for (auto& w : scheme_warnings(spec.scheme)) out.warnings.push_back(w);

    auto workspace = problem.make_workspace();
    EvalContext ctx{workspace.get(), 0};
    out.initial_value = problem.value(model.layers, nullptr, 0);

    std::vector<double> radii(b, 0.0);
    MomentumState momentum;
    StochStepOptions opts;
    if (!deterministic) {
        double beta = spec.beta;
        if (const auto* fr = std::get_if<FixedRadius>(&spec.policy)) {
            if (fr->t.size() != b) throw std::invalid_argument("run: fixed radius needs one entry per layer");
            radii = fr->t;
        } else {
            const auto& t4 = std::get<Theorem4Schedule>(spec.policy);
            if (!t4.eta.empty() && t4.eta.size() != b)
                throw std::invalid_argument("run: eta needs one entry per layer");
            for (std::size_t i = 0; i < b; ++i) radii[i] = t4.radius(i);
            beta = t4.beta();
        }
        momentum = MomentumState::zeros(model, beta);
        if (spec.momentum_init == MomentumInit::Gradient) {
            Rng init_rng = Rng::stream(spec.seed, spec.stream, std::numeric_limits<std::uint64_t>::max());
            momentum.m = stoch_grad(problem, model.layers, spec.noise, init_rng);
        }
        opts.noise = spec.noise;
        opts.orthogonalization = spec.orthogonalization;
        opts.newton_schulz = spec.newton_schulz;
        opts.table = spec.table ? &*spec.table : nullptr;
    }

    double cumulative = 0.0;
    std::uint64_t cumulative_macs = 0;
    out.steps.reserve(k_total);
    for (std::size_t k = 0; k < k_total; ++k) {
        try {
            Rng rng = Rng::stream(spec.seed, spec.stream, k);
            SamplingScheme scheme = spec.scheme;
            if (spec.epoch_shift_alpha)
                scheme = Rpt{epoch_shift_probs(
                    {b, *spec.epoch_shift_alpha, static_cast<double>(k) / static_cast<double>(k_total)})};
            const ActiveSet active = sample(scheme, rng);

            RunStep step;
            const auto full = value_and_grad(problem, model.layers);
            step.aggregate = dual_grad_aggregate(model, full.grads, spec.aggregate_weights, spec.aggregate_power);
            step.report = deterministic ? det_step(model, problem, active, spec.policy, *spec.table, &ctx)
                                        : stoch_step(model, problem, momentum, active, radii, rng, opts, &ctx);
            step.units = iteration_cost(active, spec.cost);
            cumulative += step.units;
            cumulative_macs += step.report.macs;
            step.cumulative_units = cumulative;
            step.cumulative_macs = cumulative_macs;
            out.steps.push_back(std::move(step));
        } catch (const StepError&) {
            throw;
        } catch (const std::exception& e) {
            throw StepError(k, e.what());
        }
    }
    out.final_model = std::move(model);
    return out;
}

}  // namespace dropmuon

#endif  // DROPMUON_OPTIMIZER_HPP
