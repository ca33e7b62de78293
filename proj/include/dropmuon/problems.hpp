// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_PROBLEMS_HPP
#define DROPMUON_PROBLEMS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geometry.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "smoothness.hpp"

namespace dropmuon {

using Shape = std::pair<Eigen::Index, Eigen::Index>;

struct Evaluation {
    double value = 0.0;
    // One entry per layer; layers below the requested first layer hold empty matrices.
    std::vector<Matrix> grads;
    std::uint64_t macs = 0;
    bool has_macs = false;
};

// Per-run mutable evaluation state (activation caches, counters).
struct Workspace {
    virtual ~Workspace() = default;
};

class Problem {
public:
    virtual ~Problem() = default;

    virtual std::string name() const = 0;
    virtual std::vector<Shape> shapes() const = 0;
    virtual std::vector<Matrix> initial_point() const = 0;
    virtual std::optional<double> optimal_value() const { return std::nullopt; }
    virtual bool counts_operations() const { return false; }
    virtual std::unique_ptr<Workspace> make_workspace() const { return nullptr; }

    // Exact value and gradients of layers first_layer..b-1. unchanged_prefix is the number of
    // leading layers known to be unchanged since the workspace's last evaluation.
    virtual Evaluation evaluate(const std::vector<Matrix>& x, std::size_t first_layer, Workspace* ws,
                                std::size_t unchanged_prefix) const = 0;
    virtual double value(const std::vector<Matrix>& x, Workspace* ws, std::size_t unchanged_prefix) const {
        return evaluate(x, x.size(), ws, unchanged_prefix).value;
    }

    std::size_t layers() const { return shapes().size(); }

    void check_shapes(const std::vector<Matrix>& x) const {
        const auto sh = shapes();
        if (x.size() != sh.size())
            throw std::invalid_argument(name() + ": expected " + std::to_string(sh.size()) + " layers, got " +
                                        std::to_string(x.size()));
        for (std::size_t i = 0; i < sh.size(); ++i)
            if (x[i].rows() != sh[i].first || x[i].cols() != sh[i].second)
                throw std::invalid_argument(name() + ": shape mismatch at layer " + std::to_string(i + 1));
    }
};

inline Evaluation value_and_grad(const Problem& problem, const std::vector<Matrix>& x) {
    return problem.evaluate(x, 0, nullptr, 0);
}

inline double value(const Problem& problem, const std::vector<Matrix>& x) { return problem.value(x, nullptr, 0); }

// ---------------------------------------------------------------------------

struct NoiseSpec {
    std::vector<double> sigma;  // per-layer Frobenius standard deviation

    bool deterministic() const {
        return std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 0.0; });
    }
};

// Adds i.i.d. N(0, sigma_i^2 / (m_i n_i)) to every entry of each computed gradient, so that
// E||noise_i||_F^2 = sigma_i^2.
inline void add_gradient_noise(std::vector<Matrix>& grads, const NoiseSpec& noise, Rng& rng) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const double s = i < noise.sigma.size() ? noise.sigma[i] : 0.0;
        if (s == 0.0 || grads[i].size() == 0) continue;
        const double scale = s / std::sqrt(static_cast<double>(grads[i].size()));
        for (Eigen::Index c = 0; c < grads[i].cols(); ++c)
            for (Eigen::Index r = 0; r < grads[i].rows(); ++r) grads[i](r, c) += scale * rng.normal();
    }
}

inline std::vector<Matrix> stoch_grad(const Problem& problem, const std::vector<Matrix>& x, const NoiseSpec& noise,
                                      Rng& rng) {
    auto grads = value_and_grad(problem, x).grads;
    add_gradient_noise(grads, noise, rng);
    return grads;
}

// ---------------------------------------------------------------------------

namespace detail {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
    return m;
}

inline double frobenius_to_spectral(const Shape& s) { return static_cast<double>(std::min(s.first, s.second)); }

}  // namespace detail

// f(X) = sum_i 1/2 <X_i - A_i, H_i o (X_i - A_i)>, H_i entrywise positive. Uniform H_i = a_i
// gives the isotropic a_i / 2 ||X_i - A_i||_F^2.
class SeparableQuadratic : public Problem {
public:
    SeparableQuadratic(std::vector<Matrix> targets, std::vector<Matrix> curvature, std::vector<Matrix> initial)
        : targets_(std::move(targets)), curvature_(std::move(curvature)), initial_(std::move(initial)) {
        if (targets_.empty()) throw std::invalid_argument("separable_quadratic: need at least one layer");
        if (curvature_.size() != targets_.size() || initial_.size() != targets_.size())
            throw std::invalid_argument("separable_quadratic: inconsistent layer counts");
        for (std::size_t i = 0; i < targets_.size(); ++i) {
            require_valid(targets_[i], "separable_quadratic target");
            if (curvature_[i].rows() != targets_[i].rows() || curvature_[i].cols() != targets_[i].cols() ||
                initial_[i].rows() != targets_[i].rows() || initial_[i].cols() != targets_[i].cols())
                throw std::invalid_argument("separable_quadratic: shape mismatch at layer " + std::to_string(i + 1));
            if (!(curvature_[i].minCoeff() > 0.0))
                throw std::invalid_argument("separable_quadratic: curvature must be positive");
        }
    }

    // Curvatures of layer i are spread linearly over [floor_i, a_i] across its entries
    // (column-major order); floor_i = a_i gives the isotropic problem.
    static SeparableQuadratic make(const std::vector<Shape>& shapes, const std::vector<double>& a,
                                   const std::vector<double>& floor, double target_scale, double init_scale,
                                   std::uint64_t seed) {
        if (a.size() != shapes.size()) throw std::invalid_argument("separable_quadratic: one curvature per layer");
        if (!floor.empty() && floor.size() != shapes.size())
            throw std::invalid_argument("separable_quadratic: one curvature floor per layer");
        Rng rng(splitmix64(seed ^ 0x5eedULL));
        std::vector<Matrix> targets, curv, init;
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            const auto [m, n] = shapes[i];
            if (m < 1 || n < 1) throw std::invalid_argument("separable_quadratic: shapes must be positive");
            targets.push_back(detail::gaussian_matrix(m, n, target_scale, rng));
            init.push_back(init_scale > 0.0 ? detail::gaussian_matrix(m, n, init_scale, rng) : Matrix::Zero(m, n));
            const double lo = floor.empty() ? a[i] : floor[i];
            if (!(lo > 0.0) || lo > a[i])
                throw std::invalid_argument("separable_quadratic: need 0 < floor <= curvature at layer " +
                                            std::to_string(i + 1));
            Matrix h(m, n);
            const Eigen::Index count = m * n;
            for (Eigen::Index e = 0; e < count; ++e) {
                const double t = count > 1 ? static_cast<double>(e) / static_cast<double>(count - 1) : 1.0;
                h.data()[e] = lo + (a[i] - lo) * t;
            }
            curv.push_back(h);
        }
        return SeparableQuadratic(std::move(targets), std::move(curv), std::move(init));
    }

    std::string name() const override { return "separable_quadratic"; }
    std::vector<Shape> shapes() const override {
        std::vector<Shape> out;
        for (const auto& t : targets_) out.emplace_back(t.rows(), t.cols());
        return out;
    }
    std::vector<Matrix> initial_point() const override { return initial_; }
    std::optional<double> optimal_value() const override { return 0.0; }

    Evaluation evaluate(const std::vector<Matrix>& x, std::size_t first_layer, Workspace*,
                        std::size_t) const override {
        check_shapes(x);
        Evaluation out;
        out.grads.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Matrix d = x[i] - targets_[i];
            out.value += 0.5 * curvature_[i].cwiseProduct(d.cwiseProduct(d)).sum();
            if (i >= first_layer) out.grads[i] = curvature_[i].cwiseProduct(d);
        }
        return out;
    }

    const std::vector<Matrix>& targets() const { return targets_; }

    // Largest curvature of layer i; the Euclidean smoothness constant for every set containing i.
    double curvature_max(std::size_t i) const { return curvature_[i].maxCoeff(); }

private:
    std::vector<Matrix> targets_;
    std::vector<Matrix> curvature_;
    std::vector<Matrix> initial_;
};

// f(X) = sum_i a_i/2 ||X_i - A_i||_F^2 + lambda/2 sum_{i<b} kappa_i ||X_{i+1} - X_i||_F^2 with all
// layers of one shape. The Hessian is H (x) I with H the b x b tridiagonal matrix below.
class CoupledQuadratic : public Problem {
public:
    CoupledQuadratic(std::vector<double> a, double lambda, std::vector<double> kappa, std::vector<Matrix> targets,
                     std::vector<Matrix> initial)
        : a_(std::move(a)), lambda_(lambda), kappa_(std::move(kappa)), targets_(std::move(targets)),
          initial_(std::move(initial)) {
        const std::size_t b = a_.size();
        if (b == 0) throw std::invalid_argument("coupled_quadratic: need at least one layer");
        if (targets_.size() != b || initial_.size() != b)
            throw std::invalid_argument("coupled_quadratic: inconsistent layer counts");
        if (kappa_.empty()) kappa_.assign(b > 0 ? b - 1 : 0, 1.0);
        if (kappa_.size() + 1 != b) throw std::invalid_argument("coupled_quadratic: need b - 1 coupling weights");
        if (!(lambda_ >= 0.0)) throw std::invalid_argument("coupled_quadratic: lambda must be >= 0");
        for (double v : a_)
            if (!(v > 0.0)) throw std::invalid_argument("coupled_quadratic: curvatures must be positive");
        for (double v : kappa_)
            if (!(v >= 0.0)) throw std::invalid_argument("coupled_quadratic: coupling weights must be >= 0");
        for (std::size_t i = 0; i < b; ++i)
            if (targets_[i].rows() != targets_[0].rows() || targets_[i].cols() != targets_[0].cols() ||
                initial_[i].rows() != targets_[0].rows() || initial_[i].cols() != targets_[0].cols())
                throw std::invalid_argument("coupled_quadratic: all layers must share one shape");
        hessian_ = Matrix::Zero(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b));
        for (std::size_t i = 0; i < b; ++i) hessian_(i, i) = a_[i];
        for (std::size_t i = 0; i + 1 < b; ++i) {
            const double w = lambda_ * kappa_[i];
            hessian_(i, i) += w;
            hessian_(i + 1, i + 1) += w;
            hessian_(i, i + 1) -= w;
            hessian_(i + 1, i) -= w;
        }
        solve_minimizer();
    }

    static CoupledQuadratic make(std::size_t b, Shape shape, const std::vector<double>& a, double lambda,
                                 const std::vector<double>& kappa, double target_scale, double init_scale,
                                 std::uint64_t seed) {
        if (a.size() != b) throw std::invalid_argument("coupled_quadratic: one curvature per layer");
        Rng rng(splitmix64(seed ^ 0xc0u));
        std::vector<Matrix> targets, init;
        for (std::size_t i = 0; i < b; ++i) {
            targets.push_back(detail::gaussian_matrix(shape.first, shape.second, target_scale, rng));
            init.push_back(init_scale > 0.0 ? detail::gaussian_matrix(shape.first, shape.second, init_scale, rng)
                                            : Matrix::Zero(shape.first, shape.second));
        }
        return CoupledQuadratic(a, lambda, kappa, std::move(targets), std::move(init));
    }

    std::string name() const override { return "coupled_quadratic"; }
    std::vector<Shape> shapes() const override {
        return std::vector<Shape>(a_.size(), Shape{targets_[0].rows(), targets_[0].cols()});
    }
    std::vector<Matrix> initial_point() const override { return initial_; }
    std::optional<double> optimal_value() const override { return f_star_; }

    Evaluation evaluate(const std::vector<Matrix>& x, std::size_t first_layer, Workspace*,
                        std::size_t) const override {
        check_shapes(x);
        const std::size_t b = a_.size();
        Evaluation out;
        out.grads.resize(b);
        for (std::size_t i = 0; i < b; ++i) {
            const Matrix d = x[i] - targets_[i];
            out.value += 0.5 * a_[i] * d.squaredNorm();
            if (i >= first_layer) out.grads[i] = a_[i] * d;
        }
        for (std::size_t i = 0; i + 1 < b; ++i) {
            const double w = lambda_ * kappa_[i];
            if (w == 0.0) continue;
            const Matrix e = x[i + 1] - x[i];
            out.value += 0.5 * w * e.squaredNorm();
            if (i + 1 >= first_layer) out.grads[i + 1] += w * e;
            if (i >= first_layer) out.grads[i] -= w * e;
        }
        return out;
    }

    const Matrix& hessian() const { return hessian_; }
    const std::vector<Matrix>& minimizer() const { return minimizer_; }

    // Largest eigenvalue of the principal submatrix of H on the given layers.
    double restricted_hessian_norm(const std::vector<std::size_t>& set) const {
        const auto n = static_cast<Eigen::Index>(set.size());
        Matrix h(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) h(r, c) = hessian_(set[r], set[c]);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
        return eig.eigenvalues().maxCoeff();
    }

private:
    void solve_minimizer() {
        const std::size_t b = a_.size();
        const Eigen::Index entries = targets_[0].size();
        Matrix rhs(static_cast<Eigen::Index>(b), entries);
        for (std::size_t i = 0; i < b; ++i)
            rhs.row(static_cast<Eigen::Index>(i)) = a_[i] * targets_[i].reshaped().transpose();
        const Matrix sol = hessian_.ldlt().solve(rhs);
        minimizer_.clear();
        for (std::size_t i = 0; i < b; ++i) {
            Matrix m = sol.row(static_cast<Eigen::Index>(i)).transpose().reshaped(targets_[0].rows(), targets_[0].cols());
            minimizer_.push_back(std::move(m));
        }
        f_star_ = evaluate(minimizer_, b, nullptr, 0).value;
    }

    std::vector<double> a_;
    double lambda_;
    std::vector<double> kappa_;
    std::vector<Matrix> targets_;
    std::vector<Matrix> initial_;
    Matrix hessian_;
    std::vector<Matrix> minimizer_;
    double f_star_ = 0.0;
};

// ---------------------------------------------------------------------------

enum class Activation { Tanh, Relu };

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

// Activations of one forward pass over the full dataset. z[l] = W_l a[l], a[l+1] = act(z[l])
// for hidden layers; a[0] is the input batch.
struct MlpForwardCache : Workspace {
    std::vector<Matrix> a;
    std::vector<Matrix> z;
    std::vector<Matrix> weights;  // snapshot the activations were computed with
    std::uint64_t batch_id = 0;
    bool filled = false;
};

struct ForwardResult {
    double loss = 0.0;
    std::uint64_t macs = 0;
    std::size_t recomputed_from = 0;  // first layer recomputed in this pass
    bool cache_invalid = false;       // requested prefix could not be reused
    std::string warning;
};

// Fully connected network without biases, softmax cross-entropy loss, full-batch.
class TinyMlp : public Problem {
public:
    TinyMlp(std::vector<Matrix> weights, Activation act, Matrix inputs, std::vector<int> labels,
            std::uint64_t batch_id = 1)
        : init_(std::move(weights)), act_(act), inputs_(std::move(inputs)), labels_(std::move(labels)),
          batch_id_(batch_id) {
        if (init_.empty()) throw std::invalid_argument("tiny_mlp: need at least one layer");
        if (inputs_.cols() != static_cast<Eigen::Index>(labels_.size()) || labels_.empty())
            throw std::invalid_argument("tiny_mlp: one label per input column required");
        Eigen::Index width = inputs_.rows();
        for (std::size_t l = 0; l < init_.size(); ++l) {
            if (init_[l].cols() != width)
                throw std::invalid_argument("tiny_mlp: width mismatch at layer " + std::to_string(l + 1));
            width = init_[l].rows();
        }
        for (int y : labels_)
            if (y < 0 || y >= width) throw std::invalid_argument("tiny_mlp: label out of range");
    }

    // Gaussian clusters: one center per class drawn N(0, spread^2), samples N(center, 1),
    // labels assigned round-robin. Weights N(0, 1/fan_in).
    static TinyMlp synthetic(const std::vector<Eigen::Index>& widths, Activation act, std::size_t samples,
                             double spread, std::uint64_t seed) {
        if (widths.size() < 2) throw std::invalid_argument("tiny_mlp: need input and output widths");
        Rng rng(splitmix64(seed ^ 0xd47aULL));
        const Eigen::Index d0 = widths.front();
        const Eigen::Index classes = widths.back();
        const Matrix centers = detail::gaussian_matrix(d0, classes, spread, rng);
        Matrix x(d0, static_cast<Eigen::Index>(samples));
        std::vector<int> labels(samples);
        for (std::size_t n = 0; n < samples; ++n) {
            const int y = static_cast<int>(n % static_cast<std::size_t>(classes));
            labels[n] = y;
            for (Eigen::Index r = 0; r < d0; ++r) x(r, static_cast<Eigen::Index>(n)) = centers(r, y) + rng.normal();
        }
        std::vector<Matrix> w;
        for (std::size_t l = 1; l < widths.size(); ++l)
            w.push_back(detail::gaussian_matrix(widths[l], widths[l - 1],
                                                1.0 / std::sqrt(static_cast<double>(widths[l - 1])), rng));
        return TinyMlp(std::move(w), act, std::move(x), std::move(labels), splitmix64(seed) | 1ULL);
    }

    std::string name() const override { return "tiny_mlp"; }
    std::vector<Shape> shapes() const override {
        std::vector<Shape> out;
        for (const auto& w : init_) out.emplace_back(w.rows(), w.cols());
        return out;
    }
    std::vector<Matrix> initial_point() const override { return init_; }
    bool counts_operations() const override { return true; }
    std::unique_ptr<Workspace> make_workspace() const override { return std::make_unique<MlpForwardCache>(); }

    std::size_t samples() const { return labels_.size(); }
    std::uint64_t batch_id() const { return batch_id_; }

    // Recomputes layers frozen_prefix..b-1, reusing cached activations below when the cache was
    // built on this batch with identical weights for the frozen layers.
    ForwardResult forward_with_cache(const std::vector<Matrix>& w, MlpForwardCache& cache,
                                     std::size_t frozen_prefix) const {
        check_shapes(w);
        const std::size_t b = w.size();
        frozen_prefix = std::min(frozen_prefix, b);
        ForwardResult out;
        if (frozen_prefix > 0) {
            std::string why;
            if (!cache.filled || cache.batch_id != batch_id_ || cache.weights.size() != b)
                why = "no cached pass for this batch";
            else
                for (std::size_t l = 0; l < frozen_prefix && why.empty(); ++l)
                    if (cache.weights[l].rows() != w[l].rows() || cache.weights[l].cols() != w[l].cols() ||
                        cache.weights[l] != w[l])
                        why = "frozen layer " + std::to_string(l + 1) + " changed since the cached pass";
            if (!why.empty()) {
                out.cache_invalid = true;
                out.warning = "activation cache invalid (" + why + "); recomputing from layer 1";
                frozen_prefix = 0;
            }
        }
        if (frozen_prefix == 0) {
            cache.a.assign(b + 1, Matrix());
            cache.z.assign(b, Matrix());
            cache.weights.assign(b, Matrix());
            cache.a[0] = inputs_;
        }
        const auto n = static_cast<std::uint64_t>(inputs_.cols());
        for (std::size_t l = frozen_prefix; l < b; ++l) {
            cache.z[l].noalias() = w[l] * cache.a[l];
            out.macs += static_cast<std::uint64_t>(w[l].rows()) * static_cast<std::uint64_t>(w[l].cols()) * n;
            cache.a[l + 1] = l + 1 < b ? activate(cache.z[l]) : cache.z[l];
            cache.weights[l] = w[l];
        }
        cache.batch_id = batch_id_;
        cache.filled = true;
        out.recomputed_from = frozen_prefix;
        out.loss = loss_from_logits(cache.a[b]);
        return out;
    }

    ForwardResult forward(const std::vector<Matrix>& w) const {
        MlpForwardCache cache;
        return forward_with_cache(w, cache, 0);
    }

    // Backward pass stopping at first_layer; reads activations from a filled cache.
    std::vector<Matrix> backward(const std::vector<Matrix>& w, const MlpForwardCache& cache, std::size_t first_layer,
                                 std::uint64_t* macs = nullptr) const {
        const std::size_t b = w.size();
        std::vector<Matrix> grads(b);
        if (first_layer >= b) return grads;
        const auto n = static_cast<std::uint64_t>(inputs_.cols());
        Matrix dz = softmax_minus_onehot(cache.a[b]);
        for (std::size_t l = b; l-- > first_layer;) {
            grads[l].noalias() = dz * cache.a[l].transpose();
            const std::uint64_t layer_macs =
                static_cast<std::uint64_t>(w[l].rows()) * static_cast<std::uint64_t>(w[l].cols()) * n;
            if (macs) *macs += layer_macs;
            if (l == first_layer) break;
            Matrix da = w[l].transpose() * dz;
            if (macs) *macs += layer_macs;
            dz = da.cwiseProduct(activation_derivative(cache.z[l - 1], cache.a[l]));
        }
        return grads;
    }

    Evaluation evaluate(const std::vector<Matrix>& w, std::size_t first_layer, Workspace* ws,
                        std::size_t unchanged_prefix) const override {
        MlpForwardCache local;
        auto* cache = ws ? dynamic_cast<MlpForwardCache*>(ws) : nullptr;
        if (!cache) {
            cache = &local;
            unchanged_prefix = 0;
        }
        const auto fwd = forward_with_cache(w, *cache, unchanged_prefix);
        Evaluation out;
        out.value = fwd.loss;
        out.has_macs = true;
        out.macs = fwd.macs;
        out.grads = backward(w, *cache, first_layer, &out.macs);
        return out;
    }

private:
    Matrix activate(const Matrix& z) const {
        if (act_ == Activation::Tanh) return z.array().tanh().matrix();
        return z.cwiseMax(0.0);
    }
    Matrix activation_derivative(const Matrix& z, const Matrix& a) const {
        if (act_ == Activation::Tanh) return (1.0 - a.array().square()).matrix();
        return (z.array() > 0.0).cast<double>().matrix();
    }
    double loss_from_logits(const Matrix& logits) const {
        double total = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const double top = logits.col(c).maxCoeff();
            const double lse = top + std::log((logits.col(c).array() - top).exp().sum());
            total += lse - logits(labels_[static_cast<std::size_t>(c)], c);
        }
        return total / static_cast<double>(logits.cols());
    }
    Matrix softmax_minus_onehot(const Matrix& logits) const {
        Matrix g(logits.rows(), logits.cols());
        const double inv_n = 1.0 / static_cast<double>(logits.cols());
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const double top = logits.col(c).maxCoeff();
            Eigen::VectorXd e = (logits.col(c).array() - top).exp();
            e /= e.sum();
            e(labels_[static_cast<std::size_t>(c)]) -= 1.0;
            g.col(c) = e * inv_n;
        }
        return g;
    }

    std::vector<Matrix> init_;
    Activation act_;
    Matrix inputs_;
    std::vector<int> labels_;
    std::uint64_t batch_id_;
};

// ---------------------------------------------------------------------------

struct SecantOptions {
    std::size_t samples = 32;
    double radius = 0.1;  // relative to the layer's norm at the probe point (absolute if zero)
    double safety = 1.0;
    std::uint64_t seed = 0;
};

// Smoothness constants for the supported sets of a scheme. Cutoff-mode tables for RPT and full
// network, block-mode tables for partitioned sampling.
inline SmoothnessTable smoothness_constants(const Problem& problem, const SamplingScheme& scheme,
                                            const std::vector<NormKind>& norms, const SecantOptions& secant = {}) {
    const auto shapes = problem.shapes();
    const std::size_t b = shapes.size();
    if (norms.size() != b) throw std::invalid_argument("smoothness_constants: one norm kind per layer required");
    if (layer_count(scheme) != b) throw std::invalid_argument("smoothness_constants: scheme layer count mismatch");

    const auto* part = std::get_if<PartitionedSubmodel>(&scheme);
    if (!part && !std::holds_alternative<Rpt>(scheme) && !std::holds_alternative<FullNetwork>(scheme))
        throw std::invalid_argument("smoothness_constants: tables cover RPT, full-network and partitioned sampling");

    // The sets: suffixes {s..b} in cutoff mode, blocks in partition mode.
    std::vector<std::vector<std::size_t>> sets;
    SmoothnessTable table;
    if (part) {
        sets = part->blocks;
        for (auto& s : sets) std::sort(s.begin(), s.end());
        table = SmoothnessTable::partition(sets, std::vector<double>(b, 0.0));
    } else {
        table = SmoothnessTable(SmoothnessTable::Mode::RptCutoff, b);
        for (std::size_t s = 0; s < b; ++s) sets.push_back(ActiveSet::suffix(s, b).indices);
    }
    auto ratio = [&](std::size_t i) {
        return norms[i] == NormKind::Spectral ? detail::frobenius_to_spectral(shapes[i]) : 1.0;
    };

    if (const auto* sq = dynamic_cast<const SeparableQuadratic*>(&problem)) {
        for (std::size_t k = 0; k < sets.size(); ++k)
            for (std::size_t i : sets[k]) table.set_l0(i, k, sq->curvature_max(i) * ratio(i));
        return table;
    }
    if (const auto* cq = dynamic_cast<const CoupledQuadratic*>(&problem)) {
        for (std::size_t k = 0; k < sets.size(); ++k) {
            const double h = cq->restricted_hessian_norm(sets[k]);
            for (std::size_t i : sets[k]) table.set_l0(i, k, h * ratio(i));
        }
        return table;
    }

    // Sampled secants: max over probes of ||grad_i(X + G) - grad_i(X)||_* / ||G_i|| with G supported
    // on the set, then made monotone over nested suffixes.
    Rng rng(splitmix64(secant.seed ^ 0x5ec4ULL));
    const auto x0 = problem.initial_point();
    std::vector<std::vector<double>> est(b, std::vector<double>(sets.size(), 0.0));
    for (std::size_t k = 0; k < sets.size(); ++k) {
        for (std::size_t t = 0; t < secant.samples; ++t) {
            auto x = x0;
            for (std::size_t i = 0; i < b; ++i)
                x[i] += detail::gaussian_matrix(x[i].rows(), x[i].cols(), secant.radius, rng);
            auto y = x;
            std::vector<double> step(b, 0.0);
            for (std::size_t i : sets[k]) {
                Matrix g = detail::gaussian_matrix(x[i].rows(), x[i].cols(), 1.0, rng);
                const double scale = secant.radius * std::max(1.0, norm(norms[i], x[i])) / norm(norms[i], g);
                g *= scale;
                step[i] = norm(norms[i], g);
                y[i] += g;
            }
            const auto gx = value_and_grad(problem, x).grads;
            const auto gy = value_and_grad(problem, y).grads;
            for (std::size_t i : sets[k]) {
                double total_step = 0.0;
                for (std::size_t j : sets[k]) total_step = std::max(total_step, step[j]);
                est[i][k] = std::max(est[i][k], dual_norm(norms[i], gy[i] - gx[i]) / total_step);
            }
        }
    }
    for (std::size_t i = 0; i < b; ++i) {
        double running = 0.0;
        for (std::size_t k = sets.size(); k-- > 0;) {
            if (!std::binary_search(sets[k].begin(), sets[k].end(), i)) continue;
            running = part ? est[i][k] : std::max(running, est[i][k]);
            table.set_l0(i, k, std::max(running * secant.safety, 1e-12));
        }
    }
    table.approximate = true;
    return table;
}

}  // namespace dropmuon

#endif  // DROPMUON_PROBLEMS_HPP
