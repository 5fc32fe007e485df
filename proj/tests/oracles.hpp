// Independent brute-force oracles used to pin expected values. These must
// stay naive and must not share logic with the implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace oracles {

/// KS D as the sup over every observed threshold of |F_a - F_b|, both CDFs
/// recounted from scratch at each candidate point. O(n^2). Counts are kept
/// exact (|ca*nb - cb*na|) with a single final division so the comparison
/// with the implementation is bit-exact.
inline double ks_d_brute_force(std::span<const double> a, std::span<const double> b) {
    std::vector<double> points(a.begin(), a.end());
    points.insert(points.end(), b.begin(), b.end());
    std::uint64_t best = 0;
    const std::uint64_t na = a.size(), nb = b.size();
    for (double x : points) {
        std::uint64_t ca = 0, cb = 0;
        for (double v : a)
            if (v <= x) ++ca;
        for (double v : b)
            if (v <= x) ++cb;
        std::uint64_t lhs = ca * nb, rhs = cb * na;
        best = std::max(best, lhs > rhs ? lhs - rhs : rhs - lhs);
    }
    return static_cast<double>(best) /
           (static_cast<double>(na) * static_cast<double>(nb));
}

/// ROC-AUC by direct pairwise concordance counting, ties worth one half.
inline double auc_brute_force(std::span<const double> scores,
                              std::span<const std::uint8_t> labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

/// Average precision recomputed from scratch at each distinct threshold:
/// AP = sum over thresholds of P(t) * (R(t) - R(prev)).
inline double average_precision_brute_force(std::span<const double> scores,
                                            std::span<const std::uint8_t> labels) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
    std::size_t total_pos = 0;
    for (std::uint8_t y : labels) total_pos += y;

    double ap = 0.0;
    double prev_recall = 0.0;
    for (double t : thresholds) {
        std::size_t tp = 0, predicted = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                ++predicted;
                tp += labels[i];
            }
        }
        double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    return ap;
}

/// Local clustering coefficient from an explicit undirected adjacency map.
inline double clustering_brute_force(
    const std::map<std::uint64_t, std::set<std::uint64_t>>& adjacency,
    std::uint64_t node) {
    auto it = adjacency.find(node);
    if (it == adjacency.end() || it->second.size() < 2) return 0.0;
    std::vector<std::uint64_t> fs(it->second.begin(), it->second.end());
    std::size_t connected = 0, pairs = 0;
    for (std::size_t a = 0; a < fs.size(); ++a) {
        for (std::size_t b = a + 1; b < fs.size(); ++b) {
            ++pairs;
            auto fa = adjacency.find(fs[a]);
            if (fa != adjacency.end() && fa->second.count(fs[b]) > 0) ++connected;
        }
    }
    return static_cast<double>(connected) / static_cast<double>(pairs);
}

/// Jaccard overlap of neighbour sets with both endpoints removed.
inline double edge_overlap_brute_force(
    const std::map<std::uint64_t, std::set<std::uint64_t>>& adjacency,
    std::uint64_t i, std::uint64_t j) {
    std::set<std::uint64_t> fi, fj;
    if (auto it = adjacency.find(i); it != adjacency.end()) fi = it->second;
    if (auto it = adjacency.find(j); it != adjacency.end()) fj = it->second;
    fi.erase(i);
    fi.erase(j);
    fj.erase(i);
    fj.erase(j);
    std::set<std::uint64_t> inter, uni;
    std::set_intersection(fi.begin(), fi.end(), fj.begin(), fj.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(fi.begin(), fi.end(), fj.begin(), fj.end(),
                   std::inserter(uni, uni.begin()));
    if (uni.empty()) return 0.0;
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

/// Windowed engagement recomputed day by day from raw (day, track) listens
/// (already filtered to qualifying streams).
inline double engagement_brute_force(
    const std::vector<std::pair<std::int64_t, std::uint64_t>>& day_track_listens,
    std::int64_t day_lo, std::int64_t day_hi) {
    double sum = 0.0;
    for (std::int64_t day = day_lo; day < day_hi; ++day) {
        std::set<std::uint64_t> tracks;
        for (const auto& [d, t] : day_track_listens)
            if (d == day) tracks.insert(t);
        if (!tracks.empty()) sum += std::log10(static_cast<double>(tracks.size())) + 1.0;
    }
    return sum;
}

/// Spearman rank correlation with midranks; used for monotonicity checks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < v.size()) {
            std::size_t j = i;
            while (j < v.size() && v[idx[j]] == v[idx[i]]) ++j;
            double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
            for (std::size_t k = i; k < j; ++k) r[idx[k]] = mid;
            i = j;
        }
        return r;
    };
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(rx.size());
    my /= static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracles
