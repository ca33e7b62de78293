// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_GEOMETRY_HPP
#define DROPMUON_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace dropmuon {

using Matrix = Eigen::MatrixXd;

enum class NormKind { Euclidean, Spectral };

inline std::string_view to_string(NormKind kind) {
    return kind == NormKind::Euclidean ? "euclidean" : "spectral";
}

inline NormKind norm_kind_from_string(std::string_view name) {
    if (name == "euclidean" || name == "frobenius") return NormKind::Euclidean;
    if (name == "spectral") return NormKind::Spectral;
    throw std::invalid_argument("unknown norm kind '" + std::string(name) + "'");
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_valid(const Matrix& m, const char* what) {
    if (m.rows() < 1 || m.cols() < 1)
        throw std::invalid_argument(std::string(what) + ": empty matrix");
    if (!m.allFinite())
        throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

// Trace inner product <A, B> = tr(A^T B).
inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

namespace detail {

// Compact SVD with singular values below rel_tol * sigma_max dropped.
struct CompactSvd {
    Matrix u;
    Eigen::VectorXd s;
    Matrix v;
};

inline Eigen::VectorXd singular_values(const Matrix& m) {
    return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

inline CompactSvd compact_svd(const Matrix& m, double rel_tol = 1e-12) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    CompactSvd out;
    if (s.size() == 0 || s(0) == 0.0) return out;
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > rel_tol * s(0)) ++rank;
    out.u = svd.matrixU().leftCols(rank);
    out.s = s.head(rank);
    out.v = svd.matrixV().leftCols(rank);
    return out;
}

}  // namespace detail

inline double norm(NormKind kind, const Matrix& m) {
    if (kind == NormKind::Euclidean) return m.norm();
    const auto s = detail::singular_values(m);
    return s.size() ? s(0) : 0.0;
}

inline double dual_norm(NormKind kind, const Matrix& m) {
    if (kind == NormKind::Euclidean) return m.norm();
    return detail::singular_values(m).sum();
}

struct LmoResult {
    Matrix direction;
    bool degenerate = false;
};

// argmin_{||Z|| <= t} <M, Z>. For M = 0 the zero matrix is returned and flagged.
inline LmoResult lmo(NormKind kind, const Matrix& m, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("lmo: radius must be positive");
    LmoResult out;
    if (kind == NormKind::Euclidean) {
        const double n = m.norm();
        if (n == 0.0) {
            out.direction = Matrix::Zero(m.rows(), m.cols());
            out.degenerate = true;
        } else {
            out.direction = (-t / n) * m;
        }
        return out;
    }
    const auto svd = detail::compact_svd(m);
    if (svd.s.size() == 0) {
        out.direction = Matrix::Zero(m.rows(), m.cols());
        out.degenerate = true;
        return out;
    }
    out.direction = -t * (svd.u * svd.v.transpose());
    return out;
}

inline Matrix sharp(NormKind kind, const Matrix& m) {
    if (kind == NormKind::Euclidean) return m;
    const auto svd = detail::compact_svd(m);
    if (svd.s.size() == 0) return Matrix::Zero(m.rows(), m.cols());
    return svd.s.sum() * (svd.u * svd.v.transpose());
}

struct NewtonSchulzConfig {
    int iterations = 5;
    std::array<double, 3> coefficients{3.4445, -4.7750, 2.0315};

    static NewtonSchulzConfig cubic(int iterations = 5) { return {iterations, {1.5, -0.5, 0.0}}; }

    // Slower-growing quintic whose fixed band is [0.84, 1.11]: for rank <= 8 and condition
    // number <= 100, every output singular value lies in [0.7, 1.3] after 5 or more iterations.
    // The default settles into [0.68, 1.21] instead.
    static NewtonSchulzConfig banded(int iterations = 5) { return {iterations, {3.0833, -4.1570, 1.9493}}; }
};

// Odd polynomial iteration X <- aX + b(XX^T)X + c(XX^T)^2 X on the Frobenius-normalized input.
inline Matrix newton_schulz(const Matrix& m, const NewtonSchulzConfig& cfg = {}) {
    if (cfg.iterations < 0) throw std::invalid_argument("newton_schulz: negative iteration count");
    const double fro = m.norm();
    if (fro == 0.0) throw std::invalid_argument("cannot orthogonalize zero matrix");
    const bool transposed = m.rows() > m.cols();
    Matrix x = transposed ? Matrix(m.transpose() / fro) : Matrix(m / fro);
    const auto [a, b, c] = cfg.coefficients;
    for (int it = 0; it < cfg.iterations; ++it) {
        const Matrix g = x * x.transpose();
        const Matrix poly = b * g + c * (g * g);
        x = a * x + poly * x;
    }
    return transposed ? Matrix(x.transpose()) : x;
}

// LMO with the spectral polar factor replaced by the Newton-Schulz approximation.
inline LmoResult lmo_newton_schulz(const Matrix& m, double t, const NewtonSchulzConfig& cfg = {}) {
    if (!(t > 0.0)) throw std::invalid_argument("lmo: radius must be positive");
    if (m.norm() == 0.0) return {Matrix::Zero(m.rows(), m.cols()), true};
    return {-t * newton_schulz(m, cfg), false};
}

}  // namespace dropmuon

#endif  // DROPMUON_GEOMETRY_HPP
