// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_RNG_HPP
#define DROPMUON_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <random>

namespace dropmuon {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// mt19937_64 engine. Streams: seed_of(seed, run, iteration) =
// splitmix64(splitmix64(splitmix64(seed) ^ run) ^ iteration), so every
// (run, iteration) pair owns an independent, replayable generator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t run, std::uint64_t iteration) {
        return splitmix64(splitmix64(splitmix64(seed) ^ run) ^ iteration);
    }
    static Rng stream(std::uint64_t seed, std::uint64_t run, std::uint64_t iteration) {
        return Rng(stream_seed(seed, run, iteration));
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on {0, ..., n-1}.
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    double normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dropmuon

#endif  // DROPMUON_RNG_HPP
