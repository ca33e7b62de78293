// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#include <cmath>

#include <gtest/gtest.h>

#include <dropmuon/problems.hpp>

using namespace dropmuon;

namespace {

std::vector<Matrix> perturbed(const Problem& p, double scale, Rng& rng) {
    auto x = p.initial_point();
    for (auto& m : x) m += detail::gaussian_matrix(m.rows(), m.cols(), scale, rng);
    return x;
}

// Central finite differences over every entry; returns ||g_fd - g||_F / ||g||_F over all layers.
double finite_difference_error(const Problem& p, const std::vector<Matrix>& x, double h) {
    const auto g = value_and_grad(p, x).grads;
    double err = 0.0, ref = 0.0;
    auto y = x;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (Eigen::Index e = 0; e < x[i].size(); ++e) {
            const double orig = y[i].data()[e];
            y[i].data()[e] = orig + h;
            const double up = value(p, y);
            y[i].data()[e] = orig - h;
            const double down = value(p, y);
            y[i].data()[e] = orig;
            const double fd = (up - down) / (2.0 * h);
            err += (fd - g[i].data()[e]) * (fd - g[i].data()[e]);
            ref += g[i].data()[e] * g[i].data()[e];
        }
    return std::sqrt(err / ref);
}

SeparableQuadratic small_separable(std::uint64_t seed = 1) {
    return SeparableQuadratic::make({{3, 2}, {2, 2}, {4, 3}}, {1.0, 2.0, 3.0}, {0.2, 0.5, 3.0}, 1.0, 1.0, seed);
}

}  // namespace

TEST(Separable, ZeroAtTargets) {
    const auto p = small_separable();
    const auto e = value_and_grad(p, p.targets());
    EXPECT_EQ(e.value, 0.0);
    for (const auto& g : e.grads) EXPECT_EQ(g.norm(), 0.0);
    EXPECT_EQ(p.optimal_value(), 0.0);
}

TEST(Separable, ShapeMismatchRejected) {
    const auto p = small_separable();
    auto x = p.initial_point();
    x[1] = Matrix::Zero(3, 3);
    EXPECT_THROW(value_and_grad(p, x), std::invalid_argument);
    x.pop_back();
    EXPECT_THROW(value_and_grad(p, x), std::invalid_argument);
}

TEST(FiniteDifferences, Quadratics) {
    Rng rng(31);
    const auto sep = small_separable();
    const auto cq = CoupledQuadratic::make(4, {2, 3}, {1.0, 2.0, 0.5, 3.0}, 0.7, {1.0, 2.0, 0.5}, 1.0, 1.0, 2);
    for (int t = 0; t < 20; ++t) {
        EXPECT_LE(finite_difference_error(sep, perturbed(sep, 1.0, rng), 1e-5), 1e-6);
        EXPECT_LE(finite_difference_error(cq, perturbed(cq, 1.0, rng), 1e-5), 1e-6);
    }
}

TEST(FiniteDifferences, TanhMlp) {
    Rng rng(32);
    const auto mlp = TinyMlp::synthetic({4, 5, 5, 3}, Activation::Tanh, 24, 2.0, 3);
    for (int t = 0; t < 20; ++t) EXPECT_LE(finite_difference_error(mlp, perturbed(mlp, 0.3, rng), 1e-5), 1e-4);
}

TEST(Coupled, ZeroLambdaMatchesSeparable) {
    const auto cq = CoupledQuadratic::make(3, {2, 2}, {1.0, 2.0, 3.0}, 0.0, {}, 1.0, 1.0, 4);
    std::vector<Matrix> curv;
    for (double a : {1.0, 2.0, 3.0}) curv.push_back(Matrix::Constant(2, 2, a));
    const SeparableQuadratic sep(cq.minimizer(), curv, cq.initial_point());
    Rng rng(33);
    for (int t = 0; t < 10; ++t) {
        const auto x = perturbed(cq, 1.0, rng);
        const auto a = value_and_grad(cq, x), b = value_and_grad(sep, x);
        EXPECT_NEAR(a.value, b.value, 1e-12 * (1.0 + b.value));
        for (std::size_t i = 0; i < 3; ++i) EXPECT_LE((a.grads[i] - b.grads[i]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Coupled, MinimizerHasZeroGradient) {
    const auto cq = CoupledQuadratic::make(4, {2, 3}, {1.0, 2.0, 0.5, 3.0}, 1.5, {}, 1.0, 1.0, 5);
    const auto e = value_and_grad(cq, cq.minimizer());
    for (const auto& g : e.grads) EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(e.value, *cq.optimal_value(), 1e-12);
    EXPECT_GE(value(cq, cq.initial_point()), *cq.optimal_value());
}

TEST(Noise, ZeroSigmaIsExact) {
    const auto p = small_separable();
    Rng rng(34);
    const auto x = p.initial_point();
    const auto g = stoch_grad(p, x, NoiseSpec{{0.0, 0.0, 0.0}}, rng);
    const auto exact = value_and_grad(p, x).grads;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[i], exact[i]);
}

TEST(Noise, UnbiasedWithPrescribedVariance) {
    const auto p = small_separable();
    const std::vector<double> sigma{0.5, 1.0, 2.0};
    const auto x = p.initial_point();
    const auto exact = value_and_grad(p, x).grads;
    Rng rng(35);
    const int n = 10000;
    std::vector<Matrix> mean(3);
    std::vector<double> sq(3, 0.0);
    for (std::size_t i = 0; i < 3; ++i) mean[i] = Matrix::Zero(exact[i].rows(), exact[i].cols());
    for (int t = 0; t < n; ++t) {
        const auto g = stoch_grad(p, x, NoiseSpec{sigma}, rng);
        for (std::size_t i = 0; i < 3; ++i) {
            mean[i] += g[i] / n;
            sq[i] += (g[i] - exact[i]).squaredNorm() / n;
        }
    }
    for (std::size_t i = 0; i < 3; ++i) {
        const double entry_sd = sigma[i] / std::sqrt(double(exact[i].size()));
        EXPECT_LE((mean[i] - exact[i]).cwiseAbs().maxCoeff(), 4.0 * entry_sd / std::sqrt(double(n)));
        EXPECT_NEAR(sq[i], sigma[i] * sigma[i], 0.05 * sigma[i] * sigma[i]);
    }
}

TEST(SmoothnessConstants, SeparableEuclideanIsSetIndependent) {
    const auto p = SeparableQuadratic::make({{2, 2}, {2, 2}}, {1.0, 2.0}, {}, 1.0, 1.0, 6);
    const auto t = smoothness_constants(p, FullNetwork{2}, {NormKind::Euclidean, NormKind::Euclidean});
    EXPECT_DOUBLE_EQ(t.l0(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(t.l0(1, 0), 2.0);
    EXPECT_DOUBLE_EQ(t.l0(1, 1), 2.0);
    EXPECT_FALSE(t.approximate);
}

TEST(SmoothnessConstants, SeparableSpectralUsesRank) {
    const auto p = SeparableQuadratic::make({{3, 2}}, {1.5}, {}, 1.0, 1.0, 7);
    const auto t = smoothness_constants(p, FullNetwork{1}, {NormKind::Spectral});
    EXPECT_DOUBLE_EQ(t.l0(0, 0), 3.0);
}

TEST(SmoothnessConstants, SpectralRatioIsAttained) {
    // ||G||_F^2 / ||G||_2^2 = min(m, n) for G with equal singular values.
    Rng rng(36);
    Eigen::HouseholderQR<Matrix> qr(detail::gaussian_matrix(3, 3, 1.0, rng));
    const Matrix g = Matrix(qr.householderQ()).leftCols(2);
    EXPECT_NEAR(g.squaredNorm() / std::pow(norm(NormKind::Spectral, g), 2), 2.0, 1e-12);
}

TEST(SmoothnessConstants, CoupledAreNestedMonotone) {
    const auto cq = CoupledQuadratic::make(4, {2, 2}, {1.0, 3.0, 0.5, 2.0}, 1.0, {2.0, 0.5, 1.0}, 1.0, 1.0, 8);
    const auto t = smoothness_constants(cq, Rpt{{0.25, 0.25, 0.25, 0.25}}, std::vector<NormKind>(4, NormKind::Euclidean));
    EXPECT_TRUE(t.monotonicity_violations(1e-12).empty());
    // Full-set constant is the top Hessian eigenvalue.
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(cq.hessian());
    EXPECT_NEAR(t.l0(0, 0), eig.eigenvalues().maxCoeff(), 1e-12);
}

TEST(SmoothnessConstants, QuadraticCertificate) {
    // f(X + G) - f(X) - <grad, G> <= sum_{i in S} L_{i,S} / 2 ||G_i||^2 for G supported on S.
    Rng rng(37);
    const auto sep = SeparableQuadratic::make({{3, 2}, {2, 4}, {3, 3}}, {1.0, 2.0, 3.0}, {0.1, 0.1, 0.1}, 1.0, 1.0, 9);
    const auto cq = CoupledQuadratic::make(3, {2, 3}, {1.0, 2.0, 0.5}, 0.8, {}, 1.0, 1.0, 10);
    const Problem* problems[] = {&sep, &cq};
    for (const Problem* p : problems) {
        for (NormKind kind : {NormKind::Euclidean, NormKind::Spectral}) {
            const std::vector<NormKind> norms(3, kind);
            const auto table = smoothness_constants(*p, Rpt{{0.4, 0.3, 0.3}}, norms);
            for (int t = 0; t < 100; ++t) {
                const std::size_t s = rng.index(3);
                const auto x = perturbed(*p, 1.0, rng);
                auto y = x;
                double bound = 0.0, lin = 0.0;
                const auto g = value_and_grad(*p, x).grads;
                for (std::size_t i = s; i < 3; ++i) {
                    const Matrix d = detail::gaussian_matrix(x[i].rows(), x[i].cols(), 0.5, rng);
                    y[i] += d;
                    lin += inner(g[i], d);
                    bound += 0.5 * table.l0(i, s) * std::pow(norm(kind, d), 2);
                }
                EXPECT_LE(value(*p, y) - value(*p, x) - lin, bound + 1e-9);
            }
        }
    }
}

TEST(SmoothnessConstants, MlpSecantIsFlagged) {
    const auto mlp = TinyMlp::synthetic({3, 4, 2}, Activation::Tanh, 16, 2.0, 11);
    const auto t = smoothness_constants(mlp, Rpt{{0.5, 0.5}}, {NormKind::Spectral, NormKind::Spectral}, {8, 0.1, 1.0, 1});
    EXPECT_TRUE(t.approximate);
    EXPECT_GT(t.l0(0, 0), 0.0);
    EXPECT_TRUE(t.monotonicity_violations().empty());
}

TEST(Mlp, ForwardCacheReuse) {
    const auto mlp = TinyMlp::synthetic({6, 10, 10, 10, 4}, Activation::Tanh, 32, 2.0, 12);
    const auto w = mlp.initial_point();
    const auto plain = mlp.forward(w);
    MlpForwardCache cache;
    const auto first = mlp.forward_with_cache(w, cache, 0);
    EXPECT_EQ(first.loss, plain.loss);
    EXPECT_EQ(first.macs, plain.macs);
    const auto reused = mlp.forward_with_cache(w, cache, 3);
    EXPECT_FALSE(reused.cache_invalid);
    EXPECT_EQ(reused.loss, plain.loss);
    EXPECT_LT(reused.macs, plain.macs);
    EXPECT_EQ(reused.recomputed_from, 3u);
}

TEST(Mlp, ChangedFrozenLayerInvalidatesCache) {
    const auto mlp = TinyMlp::synthetic({4, 6, 3}, Activation::Tanh, 16, 2.0, 13);
    auto w = mlp.initial_point();
    MlpForwardCache cache;
    mlp.forward_with_cache(w, cache, 0);
    w[0](0, 0) += 0.1;
    const auto r = mlp.forward_with_cache(w, cache, 1);
    EXPECT_TRUE(r.cache_invalid);
    EXPECT_FALSE(r.warning.empty());
    EXPECT_EQ(r.recomputed_from, 0u);
    EXPECT_EQ(r.loss, mlp.forward(w).loss);
}

TEST(Mlp, ColdCacheWithPrefixIsFlagged) {
    const auto mlp = TinyMlp::synthetic({4, 6, 3}, Activation::Tanh, 16, 2.0, 14);
    MlpForwardCache cache;
    EXPECT_TRUE(mlp.forward_with_cache(mlp.initial_point(), cache, 1).cache_invalid);
}

TEST(Mlp, TruncatedBackwardMatchesFullSlices) {
    const auto mlp = TinyMlp::synthetic({5, 7, 7, 7, 3}, Activation::Tanh, 20, 2.0, 15);
    const auto w = mlp.initial_point();
    MlpForwardCache cache;
    mlp.forward_with_cache(w, cache, 0);
    const auto full = mlp.backward(w, cache, 0);
    for (std::size_t s = 1; s < 4; ++s) {
        const auto part = mlp.backward(w, cache, s);
        for (std::size_t l = 0; l < s; ++l) EXPECT_EQ(part[l].size(), 0);
        for (std::size_t l = s; l < 4; ++l) EXPECT_LE((part[l] - full[l]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Mlp, ReluGradientMatchesAwayFromKinks) {
    Rng rng(38);
    const auto mlp = TinyMlp::synthetic({4, 6, 3}, Activation::Relu, 16, 2.0, 16);
    EXPECT_LE(finite_difference_error(mlp, perturbed(mlp, 0.1, rng), 1e-7), 1e-3);
}

TEST(Mlp, RejectsInconsistentData) {
    EXPECT_THROW(TinyMlp({Matrix::Zero(3, 2)}, Activation::Tanh, Matrix::Zero(4, 5), std::vector<int>(5, 0)),
                 std::invalid_argument);
    EXPECT_THROW(TinyMlp({Matrix::Zero(3, 4)}, Activation::Tanh, Matrix::Zero(4, 5), std::vector<int>(5, 3)),
                 std::invalid_argument);
    EXPECT_THROW(activation_from_string("sigmoid"), std::invalid_argument);
}
