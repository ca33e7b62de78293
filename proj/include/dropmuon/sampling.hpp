// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_SAMPLING_HPP
#define DROPMUON_SAMPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rng.hpp"

namespace dropmuon {

// Layer indices are 0-based throughout the library.
struct ActiveSet {
    std::vector<std::size_t> indices;  // sorted, non-empty

    std::size_t min_index() const { return indices.front(); }
    std::size_t size() const { return indices.size(); }
    bool contains(std::size_t i) const { return std::binary_search(indices.begin(), indices.end(), i); }
    bool operator==(const ActiveSet&) const = default;

    static ActiveSet suffix(std::size_t s, std::size_t b) {
        ActiveSet out;
        for (std::size_t i = s; i < b; ++i) out.indices.push_back(i);
        return out;
    }
};

struct Rpt {
    std::vector<double> p;  // p[s] = probability of cutoff s
};
struct TauNice {
    std::size_t b = 1;
    std::size_t tau = 1;
};
struct TauSubmodel {
    std::size_t b = 1;
    std::size_t tau = 1;
    std::vector<double> p;  // over starts 0..b-tau
};
struct PartitionedSubmodel {
    std::vector<std::vector<std::size_t>> blocks;
    std::vector<double> p;
};
struct FullNetwork {
    std::size_t b = 1;
};

using SamplingScheme = std::variant<Rpt, TauNice, TauSubmodel, PartitionedSubmodel, FullNetwork>;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

inline constexpr double kProbabilityTolerance = 1e-12;

namespace detail {

inline void check_probabilities(const std::vector<double>& p, const char* what) {
    if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty probability vector");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": probabilities must be finite and non-negative");
        total += v;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance)
        throw std::invalid_argument(std::string(what) + ": probabilities must sum to 1");
}

inline std::size_t draw_categorical(const std::vector<double>& p, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] <= 0.0) continue;
        last_positive = j;
        acc += p[j];
        if (u < acc) return j;
    }
    return last_positive;
}

// C(n - k_off, tau) / C(b, tau) with the convention C(n, k) = 0 for n < k.
inline double binomial_ratio(std::size_t top, std::size_t b, std::size_t tau) {
    double r = 1.0;
    for (std::size_t j = 0; j < tau; ++j) {
        if (top < j + 1) return 0.0;
        r *= static_cast<double>(top - j) / static_cast<double>(b - j);
    }
    return r;
}

inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (std::size_t j = 1; j <= k; ++j) r = r * static_cast<double>(n - k + j) / static_cast<double>(j);
    return std::round(r);
}

}  // namespace detail

inline std::size_t layer_count(const SamplingScheme& scheme) {
    return std::visit(Overloaded{
                          [](const Rpt& s) { return s.p.size(); },
                          [](const TauNice& s) { return s.b; },
                          [](const TauSubmodel& s) { return s.b; },
                          [](const PartitionedSubmodel& s) {
                              std::size_t b = 0;
                              for (const auto& blk : s.blocks) b += blk.size();
                              return b;
                          },
                          [](const FullNetwork& s) { return s.b; },
                      },
                      scheme);
}

inline std::string scheme_name(const SamplingScheme& scheme) {
    return std::visit(Overloaded{
                          [](const Rpt&) { return std::string("rpt"); },
                          [](const TauNice&) { return std::string("tau_nice"); },
                          [](const TauSubmodel&) { return std::string("tau_submodel"); },
                          [](const PartitionedSubmodel&) { return std::string("partitioned"); },
                          [](const FullNetwork&) { return std::string("full"); },
                      },
                      scheme);
}

// Throws on structurally invalid schemes.
inline void validate(const SamplingScheme& scheme) {
    std::visit(Overloaded{
                   [](const Rpt& s) { detail::check_probabilities(s.p, "rpt"); },
                   [](const TauNice& s) {
                       if (s.b < 1 || s.tau < 1 || s.tau > s.b)
                           throw std::invalid_argument("tau_nice: need 1 <= tau <= b");
                   },
                   [](const TauSubmodel& s) {
                       if (s.b < 1 || s.tau < 1 || s.tau > s.b)
                           throw std::invalid_argument("tau_submodel: need 1 <= tau <= b");
                       if (s.p.size() != s.b - s.tau + 1)
                           throw std::invalid_argument("tau_submodel: p must have b - tau + 1 entries");
                       detail::check_probabilities(s.p, "tau_submodel");
                   },
                   [](const PartitionedSubmodel& s) {
                       if (s.blocks.size() != s.p.size())
                           throw std::invalid_argument("partitioned: one probability per block required");
                       std::size_t b = 0;
                       for (const auto& blk : s.blocks) {
                           if (blk.empty()) throw std::invalid_argument("partitioned: empty block");
                           b += blk.size();
                       }
                       std::vector<int> seen(b, 0);
                       for (const auto& blk : s.blocks)
                           for (std::size_t i : blk) {
                               if (i >= b || seen[i]++)
                                   throw std::invalid_argument("partitioned: blocks must be disjoint and cover all layers");
                           }
                       detail::check_probabilities(s.p, "partitioned");
                   },
                   [](const FullNetwork& s) {
                       if (s.b < 1) throw std::invalid_argument("full: need b >= 1");
                   },
               },
               scheme);
}

// Non-fatal issues. RPT with p_1 = 0 never updates the first layer.
inline std::vector<std::string> scheme_warnings(const SamplingScheme& scheme) {
    std::vector<std::string> out;
    if (const auto* r = std::get_if<Rpt>(&scheme); r && !r->p.empty() && r->p[0] <= 0.0)
        out.emplace_back("rpt: p_1 = 0, layer 1 is never updated");
    return out;
}

inline Rpt as_rpt(const FullNetwork& f) {
    Rpt r;
    r.p.assign(f.b, 0.0);
    r.p[0] = 1.0;
    return r;
}

inline ActiveSet sample(const SamplingScheme& scheme, Rng& rng) {
    return std::visit(Overloaded{
                          [&](const Rpt& s) {
                              return ActiveSet::suffix(detail::draw_categorical(s.p, rng), s.p.size());
                          },
                          [&](const TauNice& s) {
                              std::vector<std::size_t> perm(s.b);
                              std::iota(perm.begin(), perm.end(), std::size_t{0});
                              for (std::size_t j = 0; j < s.tau; ++j) {
                                  const std::size_t pick = j + rng.index(s.b - j);
                                  std::swap(perm[j], perm[pick]);
                              }
                              ActiveSet out{{perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s.tau)}};
                              std::sort(out.indices.begin(), out.indices.end());
                              return out;
                          },
                          [&](const TauSubmodel& s) {
                              const std::size_t start = detail::draw_categorical(s.p, rng);
                              ActiveSet out;
                              for (std::size_t i = start; i < start + s.tau; ++i) out.indices.push_back(i);
                              return out;
                          },
                          [&](const PartitionedSubmodel& s) {
                              ActiveSet out{s.blocks[detail::draw_categorical(s.p, rng)]};
                              std::sort(out.indices.begin(), out.indices.end());
                              return out;
                          },
                          [&](const FullNetwork& s) { return ActiveSet::suffix(0, s.b); },
                      },
                      scheme);
}

struct Marginals {
    std::vector<double> F;  // P(min S <= i)
    std::vector<double> Q;  // P(i in S)
};

inline Marginals marginals(const SamplingScheme& scheme) {
    const std::size_t b = layer_count(scheme);
    Marginals m{std::vector<double>(b, 0.0), std::vector<double>(b, 0.0)};
    std::visit(Overloaded{
                   [&](const Rpt& s) {
                       double acc = 0.0;
                       for (std::size_t i = 0; i < b; ++i) {
                           acc += s.p[i];
                           m.F[i] = m.Q[i] = acc;
                       }
                       // Exact 1 at the last cutoff removes summation round-off.
                       m.F[b - 1] = m.Q[b - 1] = 1.0;
                   },
                   [&](const TauNice& s) {
                       const double q = static_cast<double>(s.tau) / static_cast<double>(b);
                       for (std::size_t i = 0; i < b; ++i) {
                           m.F[i] = 1.0 - detail::binomial_ratio(b - 1 - i, b, s.tau);
                           m.Q[i] = q;
                       }
                   },
                   [&](const TauSubmodel& s) {
                       const std::size_t last_start = b - s.tau;
                       for (std::size_t i = 0; i < b; ++i) {
                           const std::size_t hi = std::min(i, last_start);
                           const std::size_t lo = i + 1 >= s.tau ? i + 1 - s.tau : 0;
                           for (std::size_t j = 0; j <= hi; ++j) {
                               m.F[i] += s.p[j];
                               if (j >= lo) m.Q[i] += s.p[j];
                           }
                       }
                   },
                   [&](const PartitionedSubmodel& s) {
                       for (std::size_t k = 0; k < s.blocks.size(); ++k) {
                           const std::size_t lo = *std::min_element(s.blocks[k].begin(), s.blocks[k].end());
                           for (std::size_t i = lo; i < b; ++i) m.F[i] += s.p[k];
                           for (std::size_t i : s.blocks[k]) m.Q[i] = s.p[k];
                       }
                   },
                   [&](const FullNetwork&) {
                       std::fill(m.F.begin(), m.F.end(), 1.0);
                       std::fill(m.Q.begin(), m.Q.end(), 1.0);
                   },
               },
               scheme);
    return m;
}

struct WeightedSet {
    ActiveSet set;
    double probability = 0.0;
};

// Exact support with probabilities. TauNice enumerates all C(b, tau) subsets.
inline std::vector<WeightedSet> support_with_probabilities(const SamplingScheme& scheme) {
    const std::size_t b = layer_count(scheme);
    std::vector<WeightedSet> out;
    std::visit(Overloaded{
                   [&](const Rpt& s) {
                       for (std::size_t j = 0; j < b; ++j)
                           if (s.p[j] > 0.0) out.push_back({ActiveSet::suffix(j, b), s.p[j]});
                   },
                   [&](const TauNice& s) {
                       if (detail::binomial(b, s.tau) > 1e6)
                           throw std::invalid_argument("tau_nice: support too large to enumerate");
                       const double prob = 1.0 / detail::binomial(b, s.tau);
                       std::vector<std::size_t> idx(s.tau);
                       std::iota(idx.begin(), idx.end(), std::size_t{0});
                       while (true) {
                           out.push_back({ActiveSet{idx}, prob});
                           std::size_t j = s.tau;
                           while (j > 0 && idx[j - 1] == b - s.tau + (j - 1)) --j;
                           if (j == 0) break;
                           ++idx[j - 1];
                           for (std::size_t t = j; t < s.tau; ++t) idx[t] = idx[t - 1] + 1;
                       }
                   },
                   [&](const TauSubmodel& s) {
                       for (std::size_t j = 0; j < s.p.size(); ++j) {
                           if (s.p[j] <= 0.0) continue;
                           ActiveSet a;
                           for (std::size_t i = j; i < j + s.tau; ++i) a.indices.push_back(i);
                           out.push_back({a, s.p[j]});
                       }
                   },
                   [&](const PartitionedSubmodel& s) {
                       for (std::size_t k = 0; k < s.blocks.size(); ++k) {
                           if (s.p[k] <= 0.0) continue;
                           ActiveSet a{s.blocks[k]};
                           std::sort(a.indices.begin(), a.indices.end());
                           out.push_back({a, s.p[k]});
                       }
                   },
                   [&](const FullNetwork&) { out.push_back({ActiveSet::suffix(0, b), 1.0}); },
               },
               scheme);
    return out;
}

inline std::vector<ActiveSet> support(const SamplingScheme& scheme) {
    std::vector<ActiveSet> out;
    for (auto& ws : support_with_probabilities(scheme)) out.push_back(std::move(ws.set));
    return out;
}

struct EpochShiftConfig {
    std::size_t b = 1;
    double alpha = 0.0;
    double progress = 0.0;
};

// Cutoff probabilities proportional to exp(alpha * ((1 - progress)(b - 1 - i) + progress * i)), i = 0..b-1.
inline std::vector<double> epoch_shift_probs(const EpochShiftConfig& cfg) {
    if (cfg.b < 1) throw std::invalid_argument("epoch_shift: need b >= 1");
    if (!(cfg.progress >= 0.0 && cfg.progress <= 1.0))
        throw std::invalid_argument("epoch_shift: progress must lie in [0, 1]");
    std::vector<double> e(cfg.b);
    const double last = static_cast<double>(cfg.b - 1);
    for (std::size_t i = 0; i < cfg.b; ++i) {
        const double x = static_cast<double>(i);
        e[i] = cfg.alpha * ((1.0 - cfg.progress) * (last - x) + cfg.progress * x);
    }
    const double top = *std::max_element(e.begin(), e.end());
    double total = 0.0;
    for (double& v : e) total += (v = std::exp(v - top));
    for (double& v : e) v /= total;
    return e;
}

}  // namespace dropmuon

#endif  // DROPMUON_SAMPLING_HPP
