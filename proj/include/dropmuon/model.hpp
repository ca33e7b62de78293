// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_MODEL_HPP
#define DROPMUON_MODEL_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace dropmuon {

struct LayerModel {
    std::vector<Matrix> layers;
    std::vector<NormKind> norms;

    std::size_t size() const { return layers.size(); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("layer model: need at least one layer");
        if (norms.size() != layers.size())
            throw std::invalid_argument("layer model: one norm kind per layer required");
        for (std::size_t i = 0; i < layers.size(); ++i)
            require_valid(layers[i], ("layer " + std::to_string(i + 1)).c_str());
    }
};

struct MomentumState {
    std::vector<Matrix> m;
    std::vector<double> beta;

    static MomentumState zeros(const LayerModel& model, double beta) {
        MomentumState s;
        for (const auto& x : model.layers) s.m.push_back(Matrix::Zero(x.rows(), x.cols()));
        s.beta.assign(model.size(), beta);
        return s;
    }
};

}  // namespace dropmuon

#endif  // DROPMUON_MODEL_HPP
