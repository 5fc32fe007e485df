// Deterministic randomness: seed derivation and distribution helpers.
//
// std::mt19937_64 output is fully specified by the standard; the standard
// *distributions* are not, so the draws below are implemented directly to keep
// artifacts byte-identical across toolchains.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace tunecast::rng {

/// splitmix64 step; the fixed rule for deriving child seeds from a master
/// seed so parallel and serial execution draw identical streams.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    return Engine(split_seed(seed, stream));
}

/// Uniform in [0, 1) with 53-bit resolution.
inline double uniform(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound). Rejection-free modulo bias is negligible
/// for bound << 2^64 but we reject anyway for exactness.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    std::uint64_t threshold = -bound % bound;
    for (;;) {
        std::uint64_t r = eng();
        if (r >= threshold) return r % bound;
    }
}

inline std::int64_t uniform_int(Engine& eng, std::int64_t lo, std::int64_t hi_inclusive) {
    if (lo > hi_inclusive) throw std::invalid_argument("uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform_below(eng, span));
}

/// Standard normal via Box-Muller; deterministic, no cached spare.
inline double normal(Engine& eng) {
    double u1 = uniform(eng);
    double u2 = uniform(eng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline int poisson(Engine& eng, double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    if (mean == 0.0) return 0;
    // Knuth for small means; normal approximation above 30 is fine for the
    // generator's rate parameters.
    if (mean < 30.0) {
        double limit = std::exp(-mean);
        double prod = uniform(eng);
        int n = 0;
        while (prod > limit) {
            prod *= uniform(eng);
            ++n;
        }
        return n;
    }
    double draw = mean + std::sqrt(mean) * normal(eng);
    return draw < 0.0 ? 0 : static_cast<int>(std::lround(draw));
}

inline bool bernoulli(Engine& eng, double p) { return uniform(eng) < p; }

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(Engine& eng, std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(eng, i));
        std::swap(values[i - 1], values[j]);
    }
}

/// Sample `k` distinct positions from [0, n) in selection order.
inline std::vector<std::size_t> sample_without_replacement(Engine& eng, std::size_t n,
                                                           std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(uniform_below(eng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

/// Cumulative-weight sampler for fixed discrete distributions (Zipf ranks,
/// unigram^0.75 negative sampling, ...).
class DiscreteSampler {
  public:
    explicit DiscreteSampler(std::span<const double> weights) {
        cumulative_.reserve(weights.size());
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("DiscreteSampler: negative weight");
            total += w;
            cumulative_.push_back(total);
        }
        if (cumulative_.empty() || total <= 0.0)
            throw std::invalid_argument("DiscreteSampler: no positive weight");
    }

    std::size_t draw(Engine& eng) const {
        double target = uniform(eng) * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        if (it == cumulative_.end()) --it;
        return static_cast<std::size_t>(it - cumulative_.begin());
    }

  private:
    std::vector<double> cumulative_;
};

}  // namespace tunecast::rng
