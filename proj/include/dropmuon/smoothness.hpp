// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_SMOOTHNESS_HPP
#define DROPMUON_SMOOTHNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sampling.hpp"

namespace dropmuon {

class MissingConstant : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Per-(layer, set) smoothness constants. In RptCutoff mode the set key is the
// cutoff s of {s, ..., b}; in Partition mode it is the block id.
class SmoothnessTable {
public:
    enum class Mode { RptCutoff, Partition };
    using Key = std::pair<std::size_t, std::size_t>;  // (layer, set key)

    SmoothnessTable() = default;
    SmoothnessTable(Mode mode, std::size_t b) : mode_(mode), b_(b) {}

    // l0[i][s] for s <= i; l1 optional with the same shape.
    static SmoothnessTable rpt(const std::vector<std::vector<double>>& l0,
                               const std::vector<std::vector<double>>& l1 = {}) {
        SmoothnessTable t(Mode::RptCutoff, l0.size());
        for (std::size_t i = 0; i < l0.size(); ++i) {
            if (l0[i].size() != i + 1)
                throw std::invalid_argument("rpt table: row " + std::to_string(i + 1) + " needs " +
                                            std::to_string(i + 1) + " entries");
            for (std::size_t s = 0; s <= i; ++s) t.set_l0(i, s, l0[i][s]);
        }
        if (!l1.empty()) {
            if (l1.size() != l0.size()) throw std::invalid_argument("rpt table: L1 shape differs from L0");
            for (std::size_t i = 0; i < l1.size(); ++i) {
                if (l1[i].size() != i + 1) throw std::invalid_argument("rpt table: L1 shape differs from L0");
                for (std::size_t s = 0; s <= i; ++s) t.set_l1(i, s, l1[i][s]);
            }
        }
        return t;
    }

    // Table whose constants do not depend on the set: every cutoff s <= i maps to values[i].
    static SmoothnessTable rpt_uniform(const std::vector<double>& l0, const std::vector<double>& l1 = {}) {
        std::vector<std::vector<double>> a(l0.size()), c;
        for (std::size_t i = 0; i < l0.size(); ++i) a[i].assign(i + 1, l0[i]);
        if (!l1.empty()) {
            c.resize(l1.size());
            for (std::size_t i = 0; i < l1.size(); ++i) c[i].assign(i + 1, l1[i]);
        }
        return rpt(a, c);
    }

    // values[i] is the constant of layer i within its own block.
    static SmoothnessTable partition(const std::vector<std::vector<std::size_t>>& blocks,
                                     const std::vector<double>& l0, const std::vector<double>& l1 = {}) {
        std::size_t b = 0;
        for (const auto& blk : blocks) b += blk.size();
        SmoothnessTable t(Mode::Partition, b);
        t.blocks_ = blocks;
        for (auto& blk : t.blocks_) std::sort(blk.begin(), blk.end());
        if (l0.size() != b) throw std::invalid_argument("partition table: one L0 per layer required");
        if (!l1.empty() && l1.size() != b) throw std::invalid_argument("partition table: one L1 per layer required");
        for (std::size_t k = 0; k < t.blocks_.size(); ++k)
            for (std::size_t i : t.blocks_[k]) {
                if (i >= b) throw std::invalid_argument("partition table: layer index out of range");
                t.set_l0(i, k, l0[i]);
                if (!l1.empty()) t.set_l1(i, k, l1[i]);
            }
        return t;
    }

    Mode mode() const { return mode_; }
    std::size_t layers() const { return b_; }
    const std::vector<std::vector<std::size_t>>& blocks() const { return blocks_; }
    bool has_l1() const { return !l1_.empty(); }

    // Set when the constants are sampled estimates rather than certified bounds.
    bool approximate = false;

    void set_l0(std::size_t i, std::size_t key, double v) { set(l0_, i, key, v, "L0"); }
    void set_l1(std::size_t i, std::size_t key, double v) { set(l1_, i, key, v, "L1"); }

    bool contains(std::size_t i, std::size_t key) const { return l0_.count({i, key}) > 0; }

    double l0(std::size_t i, std::size_t key) const { return get(l0_, i, key, "L0"); }
    double l1(std::size_t i, std::size_t key) const { return get(l1_, i, key, "L1"); }

    // Key of an active set: its cutoff for suffix sets, its block id for partitions.
    std::size_t key_for(const ActiveSet& set) const {
        if (mode_ == Mode::RptCutoff) {
            const std::size_t s = set.min_index();
            if (set.indices.back() + 1 != b_ || set.size() != b_ - s)
                throw MissingConstant("no smoothness constants for non-suffix active set starting at layer " +
                                      std::to_string(s + 1));
            return s;
        }
        for (std::size_t k = 0; k < blocks_.size(); ++k)
            if (blocks_[k] == set.indices) return k;
        throw MissingConstant("no smoothness constants for active set starting at layer " +
                              std::to_string(set.min_index() + 1) + ": not a block of the partition");
    }

    double l0(std::size_t i, const ActiveSet& set) const { return l0(i, key_for(set)); }
    double l1(std::size_t i, const ActiveSet& set) const { return l1(i, key_for(set)); }

    // Pairs (i, s1 < s2) with L_{i,{s2..b}} > L_{i,{s1..b}}.
    std::vector<std::pair<std::size_t, std::size_t>> monotonicity_violations(double tol = 0.0) const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        if (mode_ != Mode::RptCutoff) return out;
        for (std::size_t i = 0; i < b_; ++i)
            for (std::size_t s = 1; s <= i; ++s)
                if (contains(i, s) && contains(i, s - 1) && l0(i, s) > l0(i, s - 1) + tol) out.emplace_back(i, s);
        return out;
    }

    const std::map<Key, double>& l0_map() const { return l0_; }
    const std::map<Key, double>& l1_map() const { return l1_; }

private:
    std::string describe(std::size_t i, std::size_t key) const {
        return "layer " + std::to_string(i + 1) + ", " + (mode_ == Mode::RptCutoff ? "cutoff " : "block ") +
               std::to_string(key + 1);
    }
    void set(std::map<Key, double>& m, std::size_t i, std::size_t key, double v, const char* what) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(what) + " constant must be finite and non-negative (" +
                                        describe(i, key) + ")");
        if (i >= b_) throw std::invalid_argument("layer index out of range (" + describe(i, key) + ")");
        if (mode_ == Mode::RptCutoff && key > i)
            throw std::invalid_argument("cutoff exceeds layer (" + describe(i, key) + ")");
        m[{i, key}] = v;
    }
    double get(const std::map<Key, double>& m, std::size_t i, std::size_t key, const char* what) const {
        const auto it = m.find({i, key});
        if (it == m.end())
            throw MissingConstant(std::string("missing smoothness constant ") + what + " for " + describe(i, key));
        return it->second;
    }

    Mode mode_ = Mode::RptCutoff;
    std::size_t b_ = 0;
    std::vector<std::vector<std::size_t>> blocks_;
    std::map<Key, double> l0_;
    std::map<Key, double> l1_;
};

}  // namespace dropmuon

#endif  // DROPMUON_SMOOTHNESS_HPP
