// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#include <cmath>

#include <gtest/gtest.h>

#include <dropmuon/geometry.hpp>
#include <dropmuon/problems.hpp>
#include <dropmuon/rng.hpp>

using namespace dropmuon;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) { return detail::gaussian_matrix(r, c, 1.0, rng); }

// Largest singular value by power iteration on M^T M; independent of the SVD path.
double power_iteration_spectral(const Matrix& m) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m.cols());
    for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXd w = m.transpose() * (m * v);
        const double n = w.norm();
        if (n == 0.0) return 0.0;
        v = w / n;
    }
    return (m * v).norm();
}

Matrix diag21() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 2.0;
    m(1, 1) = 1.0;
    return m;
}

}  // namespace

TEST(Norm, EuclideanIsFrobenius) {
    Matrix m(1, 2);
    m << 3, 4;
    EXPECT_DOUBLE_EQ(norm(NormKind::Euclidean, m), 5.0);
}

TEST(Norm, SpectralOfDiagonal) { EXPECT_NEAR(norm(NormKind::Spectral, diag21()), 2.0, 1e-14); }

TEST(Norm, SpectralMatchesPowerIteration) {
    Rng rng(101);
    for (int t = 0; t < 50; ++t) {
        const Matrix m = random_matrix(2, 2, rng);
        EXPECT_NEAR(norm(NormKind::Spectral, m), power_iteration_spectral(m), 1e-9);
    }
}

TEST(DualNorm, EuclideanIsSelfDual) {
    Rng rng(102);
    const Matrix m = random_matrix(3, 4, rng);
    EXPECT_DOUBLE_EQ(dual_norm(NormKind::Euclidean, m), norm(NormKind::Euclidean, m));
}

TEST(DualNorm, NuclearOfDiagonal) { EXPECT_NEAR(dual_norm(NormKind::Spectral, diag21()), 3.0, 1e-14); }

TEST(DualNorm, ZeroMatrix) {
    EXPECT_EQ(dual_norm(NormKind::Spectral, Matrix::Zero(3, 2)), 0.0);
    EXPECT_EQ(norm(NormKind::Spectral, Matrix::Zero(3, 2)), 0.0);
}

TEST(DualNorm, NuclearIsSupOverSpectralBall) {
    // <M, Z> over random unit-spectral-norm Z never exceeds the nuclear norm.
    Rng rng(103);
    const Matrix m = random_matrix(3, 2, rng);
    const double nuc = dual_norm(NormKind::Spectral, m);
    for (int t = 0; t < 2000; ++t) {
        Matrix z = random_matrix(3, 2, rng);
        z /= norm(NormKind::Spectral, z);
        EXPECT_LE(inner(m, z), nuc + 1e-12);
    }
}

TEST(Lmo, SpectralDiagonal) {
    const auto r = lmo(NormKind::Spectral, diag21(), 0.5);
    EXPECT_FALSE(r.degenerate);
    EXPECT_TRUE(r.direction.isApprox(-0.5 * Matrix::Identity(2, 2), 1e-14));
}

TEST(Lmo, EuclideanRow) {
    Matrix m(1, 2);
    m << 3, 4;
    const auto r = lmo(NormKind::Euclidean, m, 1.0);
    EXPECT_NEAR(r.direction(0, 0), -0.6, 1e-15);
    EXPECT_NEAR(r.direction(0, 1), -0.8, 1e-15);
}

TEST(Lmo, SpectralInnerProductIdentity) {
    Rng rng(104);
    for (int t = 0; t < 20; ++t) {
        const Matrix m = random_matrix(3, 2, rng);
        const auto r = lmo(NormKind::Spectral, m, 1.0);
        EXPECT_NEAR(inner(m, r.direction), -dual_norm(NormKind::Spectral, m), 1e-10);
    }
}

TEST(Lmo, ZeroIsDegenerate) {
    for (NormKind k : {NormKind::Euclidean, NormKind::Spectral}) {
        const auto r = lmo(k, Matrix::Zero(2, 3), 1.0);
        EXPECT_TRUE(r.degenerate);
        EXPECT_EQ(r.direction.norm(), 0.0);
    }
}

TEST(Lmo, RejectsNonPositiveRadius) {
    EXPECT_THROW(lmo(NormKind::Spectral, diag21(), 0.0), std::invalid_argument);
}

TEST(Lmo, RankDeficientKeepsRank) {
    Rng rng(105);
    Eigen::VectorXd u(4), v(3);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const Matrix m = u * v.transpose();
    const auto r = lmo(NormKind::Spectral, m, 2.0);
    const auto sv = detail::singular_values(r.direction);
    EXPECT_NEAR(sv(0), 2.0, 1e-12);
    EXPECT_LT(sv(1), 1e-12);
}

TEST(Sharp, EuclideanIsIdentity) {
    Rng rng(106);
    const Matrix m = random_matrix(2, 5, rng);
    EXPECT_EQ(sharp(NormKind::Euclidean, m), m);
}

TEST(Sharp, SpectralDiagonal) {
    EXPECT_TRUE(sharp(NormKind::Spectral, diag21()).isApprox(3.0 * Matrix::Identity(2, 2), 1e-14));
}

TEST(Sharp, MaximizesRegularizedInnerProduct) {
    // Sampled oracle: no X beats sharp(M) on <M, X> - 1/2 ||X||^2.
    const Matrix m = diag21();
    auto objective = [&](const Matrix& x) {
        const double n = norm(NormKind::Spectral, x);
        return inner(m, x) - 0.5 * n * n;
    };
    const double best = objective(sharp(NormKind::Spectral, m));
    EXPECT_NEAR(best, 4.5, 1e-12);
    Rng rng(107);
    for (int t = 0; t < 20000; ++t) {
        const Matrix x = 3.0 * random_matrix(2, 2, rng);
        EXPECT_LE(objective(x), best + 1e-12);
    }
}

TEST(Sharp, ZeroInZeroOut) {
    for (NormKind k : {NormKind::Euclidean, NormKind::Spectral})
        EXPECT_EQ(sharp(k, Matrix::Zero(3, 3)).norm(), 0.0);
}

TEST(GeometryProperties, IdentitiesOnRandomMatrices) {
    Rng rng(108);
    for (NormKind k : {NormKind::Euclidean, NormKind::Spectral}) {
        for (int t = 0; t < 200; ++t) {
            const Matrix m = random_matrix(1 + rng.index(5), 1 + rng.index(5), rng);
            const Matrix b = random_matrix(m.rows(), m.cols(), rng);
            const double tt = 0.1 + 2.0 * rng.uniform();
            const auto d = lmo(k, m, tt);
            const Matrix s = sharp(k, m);
            EXPECT_NEAR(norm(k, d.direction), tt, 1e-9);
            EXPECT_NEAR(inner(m, d.direction), -tt * dual_norm(k, m), 1e-9);
            EXPECT_NEAR(inner(m, s), std::pow(norm(k, s), 2), 1e-9);
            EXPECT_NEAR(dual_norm(k, m), norm(k, s), 1e-9);
            // Generalized Cauchy-Schwarz.
            EXPECT_LE(std::abs(inner(m, b)), dual_norm(k, m) * norm(k, b) + 1e-12);
            // sharp(M) = -||M||_* lmo(M, 1).
            EXPECT_LE((s + dual_norm(k, m) * lmo(k, m, 1.0).direction).cwiseAbs().maxCoeff(), 1e-9);
        }
    }
}

TEST(NewtonSchulz, ZeroIterationsNormalizes) {
    Rng rng(109);
    const Matrix m = random_matrix(3, 4, rng);
    EXPECT_TRUE(newton_schulz(m, NewtonSchulzConfig{0, {3.4445, -4.7750, 2.0315}}).isApprox(m / m.norm(), 1e-15));
}

TEST(NewtonSchulz, ZeroMatrixThrows) {
    try {
        newton_schulz(Matrix::Zero(2, 2));
        FAIL() << "expected an exception";
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "cannot orthogonalize zero matrix");
    }
}

TEST(NewtonSchulz, OrthogonalInputIsNearFixedPointOfCubic) {
    // The cubic iteration fixes orthogonal matrices; starting from Q / ||Q||_F it converges back to Q.
    Rng rng(110);
    Eigen::HouseholderQR<Matrix> qr(random_matrix(4, 4, rng));
    const Matrix q = qr.householderQ();
    const Matrix out = newton_schulz(q, NewtonSchulzConfig::cubic(5));
    EXPECT_LE((out - q).norm(), 1e-2);
}

TEST(NewtonSchulz, QuinticOscillatesAroundOrthogonal) {
    // The quintic default trades exactness for speed: singular values stay in a band around one.
    Rng rng(111);
    Eigen::HouseholderQR<Matrix> qr(random_matrix(4, 4, rng));
    const Matrix q = qr.householderQ();
    const auto sv = detail::singular_values(newton_schulz(q));
    EXPECT_GE(sv.minCoeff(), 0.7);
    EXPECT_LE(sv.maxCoeff(), 1.3);
}

TEST(NewtonSchulz, DiagonalApproachesIdentity) {
    for (const auto& cfg : {NewtonSchulzConfig::banded(5), NewtonSchulzConfig::cubic(5)}) {
        const Matrix out = newton_schulz(diag21(), cfg);
        EXPECT_NEAR(out(0, 1), 0.0, 1e-14);
        EXPECT_NEAR(out(1, 0), 0.0, 1e-14);
        EXPECT_NEAR(out(0, 0), 1.0, 0.3);
        EXPECT_NEAR(out(1, 1), 1.0, 0.3);
    }
}

TEST(NewtonSchulz, DefaultCoefficientsOnDiagonal) {
    // The default quintic leaves the first entry at 0.6888 after 5 iterations, just outside 0.3 of one.
    const Matrix out = newton_schulz(diag21());
    EXPECT_NEAR(out(0, 0), 0.68876277105693, 1e-12);
    EXPECT_NEAR(out(1, 1), 1.11416400469168, 1e-12);
}

namespace {

// U diag(s) V^T with s log-spaced from 1 down to 1 / ratio.
Matrix conditioned(Eigen::Index r, Eigen::Index c, double ratio, Rng& rng) {
    const Eigen::Index k = std::min(r, c);
    Eigen::HouseholderQR<Matrix> qu(random_matrix(r, r, rng)), qv(random_matrix(c, c, rng));
    const Matrix u = Matrix(qu.householderQ()).leftCols(k);
    const Matrix v = Matrix(qv.householderQ()).leftCols(k);
    Eigen::VectorXd s(k);
    for (Eigen::Index i = 0; i < k; ++i) s(i) = k == 1 ? 1.0 : std::pow(ratio, -double(i) / double(k - 1));
    return u * s.asDiagonal() * v.transpose();
}

}  // namespace

TEST(NewtonSchulz, BandedContractOnConditionedInputs) {
    Rng rng(112);
    for (int t = 0; t < 200; ++t) {
        const Matrix m = conditioned(1 + rng.index(8), 1 + rng.index(8), t % 2 ? 100.0 : 1.0 + 99.0 * rng.uniform(), rng);
        for (int iters : {5, 6, 8, 20}) {
            const auto sv = detail::singular_values(newton_schulz(m, NewtonSchulzConfig::banded(iters)));
            EXPECT_GE(sv.minCoeff(), 0.7);
            EXPECT_LE(sv.maxCoeff(), 1.3);
        }
    }
}

TEST(NewtonSchulz, DefaultBand) {
    Rng rng(114);
    double lo = 1.0, hi = 1.0;
    for (int t = 0; t < 200; ++t) {
        const Matrix m = conditioned(1 + rng.index(8), 1 + rng.index(8), 100.0, rng);
        for (int iters : {5, 6, 8}) {
            const auto sv = detail::singular_values(newton_schulz(m, NewtonSchulzConfig{iters}));
            lo = std::min(lo, sv.minCoeff());
            hi = std::max(hi, sv.maxCoeff());
        }
    }
    EXPECT_GE(lo, 0.68);
    EXPECT_LE(hi, 1.21);
    EXPECT_LT(lo, 0.7);
}

TEST(NewtonSchulz, TallInputKeepsShape) {
    Rng rng(113);
    const Matrix m = random_matrix(5, 2, rng);
    const Matrix out = newton_schulz(m);
    EXPECT_EQ(out.rows(), 5);
    EXPECT_EQ(out.cols(), 2);
    const auto r = lmo_newton_schulz(m, 0.5);
    EXPECT_FALSE(r.degenerate);
    EXPECT_NEAR(norm(NormKind::Spectral, r.direction), 0.5, 0.15);
}

TEST(Geometry, RejectsNonFinite) {
    Matrix m = diag21();
    m(0, 1) = std::nan("");
    EXPECT_THROW(require_valid(m, "input"), std::invalid_argument);
}

TEST(Geometry, NormKindNames) {
    EXPECT_EQ(norm_kind_from_string("spectral"), NormKind::Spectral);
    EXPECT_EQ(norm_kind_from_string("euclidean"), NormKind::Euclidean);
    EXPECT_EQ(to_string(NormKind::Spectral), "spectral");
    EXPECT_THROW(norm_kind_from_string("l1"), std::invalid_argument);
}
