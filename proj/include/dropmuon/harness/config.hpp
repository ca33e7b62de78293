// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_HARNESS_CONFIG_HPP
#define DROPMUON_HARNESS_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "../optimizer.hpp"
#include "../problems.hpp"
#include "io.hpp"

namespace dropmuon::harness {

// How a variant chooses its active sets.
enum class SchemeKind { Fixed, RptOptimal, EpochShift };

struct VariantConfig {
    std::string name;
    SchemeKind kind = SchemeKind::Fixed;
    SamplingScheme scheme = FullNetwork{1};
    CostRegime optimal_regime = CostRegime::Smooth;  // RptOptimal only
    double alpha = 0.0;                              // EpochShift only
    StepPolicy policy = SmoothInverse{};
    std::optional<SmoothnessTable> table;
    std::string path;  // JSON path, for error messages
};

struct VerifyToggles {
    bool monotone = true;       // deterministic runs: f(X^{k+1}) <= f(X^k) + slack
    bool descent_bound = true;  // stochastic runs with exact SVD: f(X^{k+1}) <= descent-lemma bound + slack
    double slack = 1e-10;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::shared_ptr<const Problem> problem;
    std::vector<NormKind> norms;
    std::size_t iterations = 0;
    std::vector<std::uint64_t> seeds;
    CostParams cost;
    NoiseSpec noise;
    double beta = 1.0;
    MomentumInit momentum_init = MomentumInit::Gradient;
    Orthogonalization orthogonalization = Orthogonalization::ExactSvd;
    NewtonSchulzConfig newton_schulz;
    std::optional<SmoothnessTable> table;  // shared by variants without their own
    SecantOptions secant;
    std::vector<double> targets;  // f-gap thresholds
    std::vector<VariantConfig> variants;
    std::size_t baseline = 0;
    std::string output = "out";
    std::size_t workers = 0;  // 0: hardware concurrency
    VerifyToggles verify;

    std::size_t layers() const { return norms.size(); }
};

inline std::shared_ptr<const Problem> problem_from_json(const json& j, const std::string& path) {
    const std::string type = as_string(require(j, "type", path), join_path(path, "type"));
    auto num = [&](const char* key, double fallback) {
        return j.contains(key) ? as_number(j.at(key), join_path(path, key)) : fallback;
    };
    auto seed = j.contains("seed") ? static_cast<std::uint64_t>(as_count(j.at("seed"), join_path(path, "seed"))) : 0;
    try {
        if (type == "separable_quadratic") {
            const auto& shapes_j = require(j, "shapes", path);
            if (!shapes_j.is_array() || shapes_j.empty())
                throw ConfigError(join_path(path, "shapes"), "expected a non-empty array of [rows, cols]");
            std::vector<Shape> shapes;
            for (std::size_t i = 0; i < shapes_j.size(); ++i) {
                const auto p = join_path(join_path(path, "shapes"), i);
                if (!shapes_j[i].is_array() || shapes_j[i].size() != 2) throw ConfigError(p, "expected [rows, cols]");
                shapes.emplace_back(static_cast<Eigen::Index>(as_count(shapes_j[i][0], join_path(p, 0))),
                                    static_cast<Eigen::Index>(as_count(shapes_j[i][1], join_path(p, 1))));
            }
            const std::size_t b = shapes.size();
            auto a = as_layer_values(require(j, "curvature", path), b, join_path(path, "curvature"));
            std::vector<double> floor;
            if (j.contains("curvature_floor"))
                floor = as_layer_values(j.at("curvature_floor"), b, join_path(path, "curvature_floor"));
            return std::make_shared<SeparableQuadratic>(
                SeparableQuadratic::make(shapes, a, floor, num("target_scale", 1.0), num("init_scale", 0.0), seed));
        }
        if (type == "coupled_quadratic") {
            const std::size_t b = as_count(require(j, "layers", path), join_path(path, "layers"));
            if (b < 1) throw ConfigError(join_path(path, "layers"), "need at least one layer");
            const auto& sh = require(j, "shape", path);
            if (!sh.is_array() || sh.size() != 2) throw ConfigError(join_path(path, "shape"), "expected [rows, cols]");
            const Shape shape{static_cast<Eigen::Index>(as_count(sh[0], join_path(path, "shape[0]"))),
                              static_cast<Eigen::Index>(as_count(sh[1], join_path(path, "shape[1]")))};
            auto a = as_layer_values(require(j, "curvature", path), b, join_path(path, "curvature"));
            std::vector<double> kappa;
            if (j.contains("coupling_weights"))
                kappa = as_layer_values(j.at("coupling_weights"), b - 1, join_path(path, "coupling_weights"));
            return std::make_shared<CoupledQuadratic>(CoupledQuadratic::make(
                b, shape, a, num("lambda", 1.0), kappa, num("target_scale", 1.0), num("init_scale", 0.0), seed));
        }
        if (type == "tiny_mlp") {
            const auto& w = require(j, "widths", path);
            if (!w.is_array() || w.size() < 2)
                throw ConfigError(join_path(path, "widths"), "expected at least input and output widths");
            std::vector<Eigen::Index> widths;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const auto v = as_count(w[i], join_path(join_path(path, "widths"), i));
                if (v < 1) throw ConfigError(join_path(join_path(path, "widths"), i), "widths must be positive");
                widths.push_back(static_cast<Eigen::Index>(v));
            }
            const auto act = j.contains("activation") ? as_string(j.at("activation"), join_path(path, "activation"))
                                                      : std::string("tanh");
            const std::size_t samples =
                j.contains("samples") ? as_count(j.at("samples"), join_path(path, "samples")) : 64;
            return std::make_shared<TinyMlp>(
                TinyMlp::synthetic(widths, activation_from_string(act), samples, num("spread", 2.0), seed));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(join_path(path, "type"), "unknown problem type '" + type + "'");
}

inline StepPolicy policy_from_json(const json& j, std::size_t b, std::size_t horizon, const std::string& path) {
    const std::string type = as_string(require(j, "type", path), join_path(path, "type"));
    if (type == "smooth_inverse") return SmoothInverse{};
    if (type == "gen_smooth_inverse") return GenSmoothInverse{};
    if (type == "fixed_radius") {
        auto t = as_layer_values(require(j, "radius", path), b, join_path(path, "radius"));
        for (double v : t)
            if (!(v > 0.0)) throw ConfigError(join_path(path, "radius"), "radii must be positive");
        return FixedRadius{t};
    }
    if (type == "theorem4") {
        Theorem4Schedule s;
        s.horizon = horizon;
        if (j.contains("eta")) {
            s.eta = as_layer_values(j.at("eta"), b, join_path(path, "eta"));
            for (double v : s.eta)
                if (!(v > 0.0)) throw ConfigError(join_path(path, "eta"), "eta must be positive");
        }
        return s;
    }
    throw ConfigError(join_path(path, "type"), "unknown policy type '" + type + "'");
}

inline VariantConfig variant_from_json(const json& j, std::size_t b, std::size_t horizon, const std::string& path) {
    VariantConfig v;
    v.path = path;
    v.name = as_string(require(j, "name", path), join_path(path, "name"));
    if (v.name.empty() || v.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                              std::string::npos)
        throw ConfigError(join_path(path, "name"), "variant names may only use letters, digits, '_' and '-'");
    const auto sp = join_path(path, "scheme");
    const auto& sj = require(j, "scheme", path);
    const std::string type = as_string(require(sj, "type", sp), join_path(sp, "type"));
    if (type == "rpt_optimal") {
        v.kind = SchemeKind::RptOptimal;
        if (sj.contains("regime")) {
            try {
                v.optimal_regime = cost_regime_from_string(as_string(sj.at("regime"), join_path(sp, "regime")));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError(join_path(sp, "regime"), e.what());
            }
        }
        v.scheme = FullNetwork{b};
    } else if (type == "epoch_shift") {
        v.kind = SchemeKind::EpochShift;
        v.alpha = as_number(require(sj, "alpha", sp), join_path(sp, "alpha"));
        if (!(v.alpha >= 0.0)) throw ConfigError(join_path(sp, "alpha"), "alpha must be >= 0");
        v.scheme = FullNetwork{b};
    } else {
        v.scheme = scheme_from_json(sj, b, sp);
    }
    v.policy = j.contains("policy") ? policy_from_json(j.at("policy"), b, horizon, join_path(path, "policy"))
                                    : StepPolicy{SmoothInverse{}};
    if (j.contains("smoothness")) v.table = table_from_json(j.at("smoothness"), join_path(path, "smoothness"));
    return v;
}

// Parses and validates a full experiment document.
inline ExperimentConfig config_from_json(const json& j) {
    const std::string root = "$";
    if (!j.is_object()) throw ConfigError(root, "expected a JSON object");
    ExperimentConfig c;
    if (j.contains("name")) c.name = as_string(j.at("name"), join_path(root, "name"));
    c.problem = problem_from_json(require(j, "problem", root), join_path(root, "problem"));
    const std::size_t b = c.problem->shapes().size();

    if (j.contains("norms")) {
        const auto& nj = j.at("norms");
        const auto np = join_path(root, "norms");
        try {
            if (nj.is_string()) {
                c.norms.assign(b, norm_kind_from_string(nj.get<std::string>()));
            } else if (nj.is_array() && nj.size() == b) {
                for (std::size_t i = 0; i < b; ++i) c.norms.push_back(norm_kind_from_string(as_string(nj[i], join_path(np, i))));
            } else {
                throw ConfigError(np, "expected a norm name or an array of " + std::to_string(b) + " names");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(np, e.what());
        }
    } else {
        c.norms.assign(b, NormKind::Spectral);
    }

    c.iterations = as_count(require(j, "iterations", root), join_path(root, "iterations"));
    const auto& seeds = require(j, "seeds", root);
    if (!seeds.is_array() || seeds.empty()) throw ConfigError(join_path(root, "seeds"), "expected a non-empty array");
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto s = static_cast<std::uint64_t>(as_count(seeds[i], join_path(join_path(root, "seeds"), i)));
        if (!seen.insert(s).second) throw ConfigError(join_path(join_path(root, "seeds"), i), "duplicate seed");
        c.seeds.push_back(s);
    }

    c.cost = j.contains("cost") ? cost_from_json(j.at("cost"), b, join_path(root, "cost"))
                                : CostParams::uniform(b, 0.0, 1.0, 0.0);
    c.noise.sigma.assign(b, 0.0);
    if (j.contains("noise")) {
        const auto np = join_path(root, "noise");
        c.noise.sigma = as_layer_values(require(j.at("noise"), "sigma", np), b, join_path(np, "sigma"));
        for (double s : c.noise.sigma)
            if (!(s >= 0.0)) throw ConfigError(join_path(np, "sigma"), "noise levels must be >= 0");
    }
    if (j.contains("momentum")) {
        const auto& mj = j.at("momentum");
        const auto mp = join_path(root, "momentum");
        if (mj.contains("beta")) c.beta = as_number(mj.at("beta"), join_path(mp, "beta"));
        if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw ConfigError(join_path(mp, "beta"), "beta must lie in [0, 1]");
        if (mj.contains("init")) {
            const auto init = as_string(mj.at("init"), join_path(mp, "init"));
            if (init == "gradient") c.momentum_init = MomentumInit::Gradient;
            else if (init == "zeros") c.momentum_init = MomentumInit::Zeros;
            else throw ConfigError(join_path(mp, "init"), "expected 'gradient' or 'zeros'");
        }
    }
    if (j.contains("orthogonalization")) {
        const auto op = join_path(root, "orthogonalization");
        const auto o = as_string(j.at("orthogonalization"), op);
        if (o == "svd") c.orthogonalization = Orthogonalization::ExactSvd;
        else if (o == "newton_schulz") c.orthogonalization = Orthogonalization::NewtonSchulz;
        else throw ConfigError(op, "expected 'svd' or 'newton_schulz'");
    }
    if (j.contains("newton_schulz")) {
        const auto& nj = j.at("newton_schulz");
        const auto np = join_path(root, "newton_schulz");
        if (nj.contains("iterations"))
            c.newton_schulz.iterations = static_cast<int>(as_count(nj.at("iterations"), join_path(np, "iterations")));
        if (nj.contains("coefficients") && nj.at("coefficients").is_string()) {
            const auto cp = join_path(np, "coefficients");
            const auto name = as_string(nj.at("coefficients"), cp);
            if (name == "default") c.newton_schulz.coefficients = NewtonSchulzConfig{}.coefficients;
            else if (name == "banded") c.newton_schulz.coefficients = NewtonSchulzConfig::banded().coefficients;
            else if (name == "cubic") c.newton_schulz.coefficients = NewtonSchulzConfig::cubic().coefficients;
            else throw ConfigError(cp, "expected 'default', 'banded', 'cubic' or three numbers");
        } else if (nj.contains("coefficients")) {
            auto co = as_numbers(nj.at("coefficients"), join_path(np, "coefficients"));
            if (co.size() != 3) throw ConfigError(join_path(np, "coefficients"), "expected three coefficients");
            c.newton_schulz.coefficients = {co[0], co[1], co[2]};
        }
    }
    if (j.contains("smoothness")) c.table = table_from_json(j.at("smoothness"), join_path(root, "smoothness"));
    if (j.contains("secant")) {
        const auto& sj = j.at("secant");
        const auto sp = join_path(root, "secant");
        if (sj.contains("samples")) c.secant.samples = as_count(sj.at("samples"), join_path(sp, "samples"));
        if (sj.contains("radius")) c.secant.radius = as_number(sj.at("radius"), join_path(sp, "radius"));
        if (sj.contains("safety")) c.secant.safety = as_number(sj.at("safety"), join_path(sp, "safety"));
        if (sj.contains("seed")) c.secant.seed = as_count(sj.at("seed"), join_path(sp, "seed"));
    }
    if (j.contains("targets")) {
        c.targets = as_numbers(j.at("targets"), join_path(root, "targets"));
        for (std::size_t i = 0; i < c.targets.size(); ++i)
            if (!(c.targets[i] >= 0.0)) throw ConfigError(join_path(join_path(root, "targets"), i), "thresholds must be >= 0");
    }
    if (j.contains("output")) c.output = as_string(j.at("output"), join_path(root, "output"));
    if (j.contains("workers")) c.workers = as_count(j.at("workers"), join_path(root, "workers"));
    if (j.contains("verify")) {
        const auto& vj = j.at("verify");
        const auto vp = join_path(root, "verify");
        auto flag = [&](const char* key, bool& dst) {
            if (!vj.contains(key)) return;
            if (!vj.at(key).is_boolean()) throw ConfigError(join_path(vp, key), "expected true or false");
            dst = vj.at(key).get<bool>();
        };
        flag("monotone", c.verify.monotone);
        flag("descent_bound", c.verify.descent_bound);
        if (vj.contains("slack")) c.verify.slack = as_number(vj.at("slack"), join_path(vp, "slack"));
    }

    const auto& variants = require(j, "variants", root);
    if (!variants.is_array() || variants.empty())
        throw ConfigError(join_path(root, "variants"), "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        auto v = variant_from_json(variants[i], b, c.iterations, join_path(join_path(root, "variants"), i));
        if (!names.insert(v.name).second) throw ConfigError(join_path(v.path, "name"), "duplicate variant name");
        c.variants.push_back(std::move(v));
    }
    if (j.contains("baseline")) {
        const auto name = as_string(j.at("baseline"), join_path(root, "baseline"));
        bool found = false;
        for (std::size_t i = 0; i < c.variants.size(); ++i)
            if (c.variants[i].name == name) {
                c.baseline = i;
                found = true;
            }
        if (!found) throw ConfigError(join_path(root, "baseline"), "no variant named '" + name + "'");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace dropmuon::harness

#endif  // DROPMUON_HARNESS_CONFIG_HPP
