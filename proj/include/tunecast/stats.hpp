// Descriptive statistics: empirical CDFs, binned engagement-probability
// curves with Wilson intervals, the two-sample Kolmogorov-Smirnov test,
// Pearson correlation and the shuffled-pair similarity baseline.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "tunecast/common.hpp"
#include "tunecast/embeddings.hpp"
#include "tunecast/rng.hpp"

namespace tunecast::stats {

/// z for the fixed 95% two-sided level used throughout.
constexpr double kZ95 = 1.959963984540054;

// ---------------------------------------------------------------------------
// Empirical CDF

class Ecdf {
  public:
    explicit Ecdf(std::vector<double> sample) : sorted_(std::move(sample)) {
        if (sorted_.empty()) throw std::invalid_argument("ecdf: empty sample");
        std::sort(sorted_.begin(), sorted_.end());
    }

    /// F(x) = fraction of sample values <= x. Right-continuous by construction.
    double operator()(double x) const {
        auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) /
               static_cast<double>(sorted_.size());
    }

    std::size_t size() const { return sorted_.size(); }
    const std::vector<double>& sorted_values() const { return sorted_; }

  private:
    std::vector<double> sorted_;
};

inline Ecdf ecdf(std::vector<double> sample) { return Ecdf(std::move(sample)); }

// ---------------------------------------------------------------------------
// Wilson score interval

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval; stays inside [0,1] and behaves near p in {0,1}.
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = kZ95) {
    if (n == 0) throw std::invalid_argument("wilson_interval: n must be positive");
    if (successes > n) throw std::invalid_argument("wilson_interval: successes > n");
    double nn = static_cast<double>(n);
    double p = static_cast<double>(successes) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
    // The algebraic bounds at the extremes are exactly 0 and 1; keep them so
    // despite rounding.
    if (successes == n) ci.hi = 1.0;
    if (successes == 0) ci.lo = 0.0;
    return ci;
}

// ---------------------------------------------------------------------------
// Binned probability curves

struct EqualWidthBins {
    std::size_t count = 10;
    // When lo >= hi the data range is used.
    double lo = 0.0;
    double hi = 0.0;
};

struct QuantileBins {
    std::size_t count = 10;
};

struct CustomBins {
    std::vector<double> edges;  // strictly increasing
};

struct BinSpec {
    std::variant<EqualWidthBins, QuantileBins, CustomBins> kind = EqualWidthBins{};
    /// Bins with fewer observations than this are masked (reported, no curve
    /// point). Mirrors the noise caveat at sparsely populated feature ranges.
    std::size_t min_count = 30;
};

struct Bin {
    double lo = 0.0;
    double hi = 0.0;  // half-open [lo, hi); the last bin is closed at hi
    std::size_t count = 0;
    std::size_t engaged = 0;
    bool masked = true;
    double p_hat = 0.0;
    Interval ci;
};

struct BinnedCurve {
    std::vector<Bin> bins;
    std::size_t total = 0;     // all input pairs, masked bins included
    std::size_t in_range = 0;  // pairs that landed in a bin
};

namespace detail {

inline std::vector<double> resolve_edges(const BinSpec& spec,
                                         std::span<const double> values) {
    std::vector<double> edges;
    if (const auto* ew = std::get_if<EqualWidthBins>(&spec.kind)) {
        if (ew->count == 0) throw std::invalid_argument("bin count must be positive");
        double lo = ew->lo, hi = ew->hi;
        if (!(lo < hi)) {
            lo = *std::min_element(values.begin(), values.end());
            hi = *std::max_element(values.begin(), values.end());
            if (lo == hi) hi = lo + 1.0;  // single-valued feature: one usable bin
        }
        edges.reserve(ew->count + 1);
        for (std::size_t i = 0; i <= ew->count; ++i)
            edges.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                     static_cast<double>(ew->count));
    } else if (const auto* qb = std::get_if<QuantileBins>(&spec.kind)) {
        if (qb->count == 0) throw std::invalid_argument("bin count must be positive");
        std::vector<double> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        edges.push_back(sorted.front());
        for (std::size_t i = 1; i < qb->count; ++i) {
            std::size_t idx = i * sorted.size() / qb->count;
            double e = sorted[std::min(idx, sorted.size() - 1)];
            if (e > edges.back()) edges.push_back(e);
        }
        if (sorted.back() > edges.back()) edges.push_back(sorted.back());
        if (edges.size() < 2) edges.push_back(edges.back() + 1.0);
    } else {
        edges = std::get<CustomBins>(spec.kind).edges;
        if (edges.size() < 2)
            throw std::invalid_argument("custom bins need at least two edges");
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (!(edges[i - 1] < edges[i]))
                throw std::invalid_argument("bin edges must be strictly increasing");
    }
    return edges;
}

inline std::ptrdiff_t bin_index(const std::vector<double>& edges, double v) {
    if (v < edges.front() || v > edges.back()) return -1;
    if (v == edges.back()) return static_cast<std::ptrdiff_t>(edges.size()) - 2;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    return (it - edges.begin()) - 1;
}

}  // namespace detail

/// Per-bin engagement probability with 95% Wilson intervals.
inline BinnedCurve binned_probability_curve(std::span<const double> values,
                                            const std::vector<bool>& engaged,
                                            const BinSpec& spec) {
    if (values.empty()) throw std::invalid_argument("binned curve: empty input");
    if (values.size() != engaged.size())
        throw std::invalid_argument("binned curve: length mismatch");

    std::vector<double> edges = detail::resolve_edges(spec, values);
    BinnedCurve curve;
    curve.total = values.size();
    curve.bins.resize(edges.size() - 1);
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        curve.bins[b].lo = edges[b];
        curve.bins[b].hi = edges[b + 1];
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::ptrdiff_t b = detail::bin_index(edges, values[i]);
        if (b < 0) continue;
        ++curve.in_range;
        ++curve.bins[static_cast<std::size_t>(b)].count;
        if (engaged[i]) ++curve.bins[static_cast<std::size_t>(b)].engaged;
    }
    for (Bin& bin : curve.bins) {
        if (bin.count == 0 || bin.count < spec.min_count) continue;
        bin.masked = false;
        bin.p_hat = static_cast<double>(bin.engaged) / static_cast<double>(bin.count);
        bin.ci = wilson_interval(bin.engaged, bin.count);
    }
    return curve;
}

/// One curve per stratum (reciprocal / app mode / popularity bin figures).
/// Bin edges are resolved over the pooled values so strata share an axis.
inline std::map<std::string, BinnedCurve> binned_probability_curve_by(
    std::span<const double> values, const std::vector<bool>& engaged,
    std::span<const std::string> strata, const BinSpec& spec) {
    if (values.empty()) throw std::invalid_argument("stratified curve: empty input");
    if (values.size() != engaged.size() || values.size() != strata.size())
        throw std::invalid_argument("stratified curve: length mismatch");

    BinSpec shared = spec;
    shared.kind = CustomBins{detail::resolve_edges(spec, values)};

    std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> groups;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto& g = groups[strata[i]];
        g.first.push_back(values[i]);
        g.second.push_back(engaged[i]);
    }
    std::map<std::string, BinnedCurve> out;
    for (auto& [key, g] : groups)
        out.emplace(key, binned_probability_curve(g.first, g.second, shared));
    return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

struct KsResult {
    double d = 0.0;
    double p_value = 1.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2), 100 terms.
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Exact D via a merged sweep over both sorted samples (integer arithmetic),
/// asymptotic p-value at effective size n_a*n_b/(n_a+n_b).
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    const std::uint64_t na = sa.size(), nb = sb.size();
    std::uint64_t best_num = 0;  // |i*nb - j*na|, exact
    std::size_t i = 0, j = 0;
    while (i < na || j < nb) {
        double x = (i < na && (j >= nb || sa[i] <= sb[j])) ? sa[i] : sb[j];
        while (i < na && sa[i] == x) ++i;
        while (j < nb && sb[j] == x) ++j;
        std::uint64_t lhs = static_cast<std::uint64_t>(i) * nb;
        std::uint64_t rhs = static_cast<std::uint64_t>(j) * na;
        std::uint64_t diff = lhs > rhs ? lhs - rhs : rhs - lhs;
        best_num = std::max(best_num, diff);
    }

    KsResult result;
    result.n_a = na;
    result.n_b = nb;
    result.d = static_cast<double>(best_num) / (static_cast<double>(na) * static_cast<double>(nb));
    if (result.d == 0.0) {
        result.p_value = 1.0;
    } else {
        double n_eff = static_cast<double>(na) * static_cast<double>(nb) /
                       static_cast<double>(na + nb);
        result.p_value = kolmogorov_q(std::sqrt(n_eff) * result.d);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Pearson correlation

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Product-moment correlation with a two-sided p-value from the t
/// approximation with n-2 degrees of freedom.
inline PearsonResult pearson_correlation(std::span<const double> x,
                                         std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");

    PearsonResult result;
    result.n = n;
    result.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    if (n == 2 || std::abs(result.r) == 1.0) {
        result.p_value = (std::abs(result.r) == 1.0 && n > 2) ? 0.0 : 1.0;
    } else {
        double df = static_cast<double>(n - 2);
        double t = result.r * std::sqrt(df / (1.0 - result.r * result.r));
        boost::math::students_t dist(df);
        result.p_value = 2.0 * boost::math::cdf(dist, -std::abs(t));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Shuffled-pair homophily baseline

struct PairedSamples {
    std::vector<double> observed;
    std::vector<double> shuffled;
};

/// Deterministic core with an explicit sender permutation (tests inject the
/// identity here).
template <typename VectorLookup>
PairedSamples permutation_baseline_with(
    std::span<const std::pair<UserId, UserId>> pairs, VectorLookup&& vector_of,
    std::span<const std::size_t> sender_perm) {
    if (sender_perm.size() != pairs.size())
        throw std::invalid_argument("permutation_baseline: permutation size mismatch");
    PairedSamples out;
    out.observed.reserve(pairs.size());
    out.shuffled.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::span<const float> sender_vec = vector_of(pairs[i].first);
        std::span<const float> receiver_vec = vector_of(pairs[i].second);
        out.observed.push_back(embed::cosine_similarity(sender_vec, receiver_vec));
        std::span<const float> shuffled_sender = vector_of(pairs[sender_perm[i]].first);
        out.shuffled.push_back(embed::cosine_similarity(shuffled_sender, receiver_vec));
    }
    return out;
}

/// Cosine similarity per original (sender, receiver) pair plus the same
/// pairs after a seeded uniform permutation of the senders.
/// `vector_of` must return the taste vector for every user that appears.
template <typename VectorLookup>
PairedSamples permutation_baseline(
    std::span<const std::pair<UserId, UserId>> pairs, VectorLookup&& vector_of,
    std::uint64_t seed) {
    std::vector<std::size_t> perm(pairs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng::Engine eng = rng::make_engine(seed, 0x70657261);
    rng::shuffle(eng, perm);
    return permutation_baseline_with(pairs, vector_of, std::span<const std::size_t>(perm));
}

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace tunecast::stats
