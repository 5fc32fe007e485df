// Random forest binary classifier built from scratch: Gini CART trees over
// midpoint thresholds, bootstrap resampling, per-split feature subsampling,
// MDI importances, stratified k-fold evaluation, randomized hyperparameter
// search, and the feature-set isolation table.
//
// Determinism contract: given the same data and master seed, serial and
// parallel training produce identical forests. Per-tree seeds derive from the
// master seed by a fixed splitting rule; within a tree, nodes are processed
// depth-first (left child first) and all draws come from the tree's engine.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/io.hpp"
#include "tunecast/rng.hpp"

namespace tunecast::forest {

using Columns = std::vector<std::vector<double>>;
using Labels = std::vector<std::uint8_t>;

struct Hyperparams {
    std::size_t n_estimators = 100;
    std::size_t max_depth = 16;  // 0 means a root-only tree
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    /// Candidate features per split: explicit count if > 0, else a fraction
    /// of the feature count if > 0, else round(sqrt(n_features)).
    std::size_t max_features_count = 0;
    double max_features_fraction = 0.0;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
        if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
        if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
        if (max_features_fraction < 0.0 || max_features_fraction > 1.0)
            throw ConfigError("max_features fraction must be in (0, 1]");
    }

    std::size_t resolved_max_features(std::size_t n_features) const {
        if (n_features == 0) throw ConfigError("no features");
        if (max_features_count > 0) return std::min(max_features_count, n_features);
        if (max_features_fraction > 0.0) {
            auto k = static_cast<std::size_t>(max_features_fraction *
                                              static_cast<double>(n_features));
            return std::clamp<std::size_t>(k, 1, n_features);
        }
        auto k = static_cast<std::size_t>(
            std::lround(std::sqrt(static_cast<double>(n_features))));
        return std::clamp<std::size_t>(k, 1, n_features);
    }
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x[feature] <= threshold routes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // positive fraction of training samples at the node
    std::uint32_t count = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        std::int32_t at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(at)];
            at = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                         : nd.right;
        }
        return nodes[static_cast<std::size_t>(at)].value;
    }
};

struct ForestModel {
    Hyperparams hp;
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;
    std::vector<std::string> feature_names;  // optional; sized n_features when set
    io::json metadata;

    double predict_proba(std::span<const double> x) const {
        if (x.size() != n_features)
            throw std::invalid_argument("predict_proba: feature dimension mismatch");
        double sum = 0.0;
        for (const DecisionTree& t : trees) sum += t.predict(x);
        return sum / static_cast<double>(trees.size());
    }
};

// ---------------------------------------------------------------------------
// Deterministic bootstrap

/// Multiplicity of each sample in tree `tree_index`'s bootstrap resample.
/// Exposed so tests can audit out-of-bag behaviour against the same draws.
inline std::vector<std::uint32_t> bootstrap_sample_counts(std::uint64_t master_seed,
                                                          std::size_t tree_index,
                                                          std::size_t n) {
    rng::Engine eng = rng::make_engine(master_seed, 0x626f6f74 + tree_index);
    std::vector<std::uint32_t> counts(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        ++counts[rng::uniform_below(eng, static_cast<std::uint64_t>(n))];
    return counts;
}

// ---------------------------------------------------------------------------
// Tree construction (presorted splitter)

namespace detail {

inline double gini_of(double pos, double n) {
    if (n <= 0.0) return 0.0;
    double p = pos / n;
    return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
    bool found = false;
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left_size = 0;
    std::size_t left_pos = 0;

    /// Strictly-better ordering: higher gain, then lower feature index, then
    /// lower threshold.
    bool better_than(const SplitChoice& other) const {
        if (!other.found) return found;
        if (!found) return false;
        if (gain != other.gain) return gain > other.gain;
        if (feature != other.feature) return feature < other.feature;
        return threshold < other.threshold;
    }
};

struct TreeBuilder {
    const Columns& columns;
    const Labels& labels;
    const Hyperparams& hp;
    std::size_t n_features;
    std::size_t max_features;

    // Per-feature sample ids sorted by feature value (bootstrap multiset).
    std::vector<std::vector<std::uint32_t>> order;
    std::vector<std::uint32_t> scratch;
    std::vector<std::size_t> feature_pool;
    rng::Engine eng;
    std::size_t total = 0;

    std::vector<double>* mdi = nullptr;  // accumulated raw importance

    TreeBuilder(const Columns& cols, const Labels& y, const Hyperparams& params,
                std::uint64_t tree_seed_stream, std::uint64_t master_seed)
        : columns(cols), labels(y), hp(params), n_features(cols.size()),
          max_features(params.resolved_max_features(cols.size())),
          eng(rng::make_engine(master_seed, tree_seed_stream)) {}

    /// Fills `order` from presorted full-data indices and a multiplicity
    /// vector; keeps each feature's order sorted by (value, original index).
    void init_order(const std::vector<std::vector<std::uint32_t>>& presorted,
                    const std::vector<std::uint32_t>& multiplicity, std::size_t n_drawn) {
        order.assign(n_features, {});
        for (std::size_t f = 0; f < n_features; ++f) {
            auto& dst = order[f];
            dst.reserve(n_drawn);
            for (std::uint32_t idx : presorted[f])
                for (std::uint32_t c = 0; c < multiplicity[idx]; ++c) dst.push_back(idx);
        }
        total = n_drawn;
        scratch.resize(n_drawn);
    }

    DecisionTree build() {
        DecisionTree tree;
        std::size_t root_pos = 0;
        for (std::uint32_t idx : order[0])
            root_pos += labels[idx];

        struct Frame {
            std::int32_t node;
            std::size_t lo, hi, pos, depth;
        };
        std::vector<Frame> stack;
        tree.nodes.push_back({});
        stack.push_back({0, 0, total, root_pos, 0});

        while (!stack.empty()) {
            Frame fr = stack.back();
            stack.pop_back();
            const std::size_t at = static_cast<std::size_t>(fr.node);
            std::size_t n = fr.hi - fr.lo;
            tree.nodes[at].count = static_cast<std::uint32_t>(n);
            tree.nodes[at].value =
                static_cast<double>(fr.pos) / static_cast<double>(n);

            bool splittable = fr.depth < hp.max_depth && n >= hp.min_samples_split &&
                              fr.pos != 0 && fr.pos != n;
            SplitChoice best;
            if (splittable) best = find_best_split(fr.lo, fr.hi, fr.pos);
            if (!best.found) {
                tree.nodes[at].feature = -1;
                continue;
            }

            if (mdi != nullptr)
                (*mdi)[best.feature] +=
                    static_cast<double>(n) / static_cast<double>(total) * best.gain;

            apply_partition(fr.lo, fr.hi, best);

            std::int32_t left_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.push_back({});
            std::int32_t right_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes[at].feature = static_cast<std::int32_t>(best.feature);
            tree.nodes[at].threshold = best.threshold;
            tree.nodes[at].left = left_id;
            tree.nodes[at].right = right_id;

            std::size_t mid = fr.lo + best.left_size;
            // Right pushed first so the left child is processed next (DFS
            // preorder fixes the RNG draw order).
            stack.push_back({right_id, mid, fr.hi, fr.pos - best.left_pos, fr.depth + 1});
            stack.push_back({left_id, fr.lo, mid, best.left_pos, fr.depth + 1});
        }
        return tree;
    }

  private:
    SplitChoice find_best_split(std::size_t lo, std::size_t hi, std::size_t pos) {
        std::size_t n = hi - lo;
        double nn = static_cast<double>(n);
        double parent_gini = gini_of(static_cast<double>(pos), nn);

        if (feature_pool.size() != n_features) {
            feature_pool.resize(n_features);
            std::iota(feature_pool.begin(), feature_pool.end(), 0);
        }
        // Partial Fisher-Yates; the pool is reused, which only permutes the
        // candidate order and never the candidate set distribution.
        for (std::size_t i = 0; i < max_features; ++i) {
            std::size_t j = i + static_cast<std::size_t>(
                                    rng::uniform_below(eng, n_features - i));
            std::swap(feature_pool[i], feature_pool[j]);
        }

        SplitChoice best;
        for (std::size_t c = 0; c < max_features; ++c) {
            std::size_t f = feature_pool[c];
            const std::vector<double>& col = columns[f];
            const std::vector<std::uint32_t>& ord = order[f];

            std::size_t left_n = 0, left_pos = 0;
            for (std::size_t i = lo; i + 1 < hi; ++i) {
                std::uint32_t idx = ord[i];
                ++left_n;
                left_pos += labels[idx];
                double v = col[idx];
                double next = col[ord[i + 1]];
                if (v == next) continue;
                if (left_n < hp.min_samples_leaf) continue;
                if (n - left_n < hp.min_samples_leaf) break;

                double right_n = nn - static_cast<double>(left_n);
                double weighted =
                    (static_cast<double>(left_n) *
                         gini_of(static_cast<double>(left_pos),
                                 static_cast<double>(left_n)) +
                     right_n * gini_of(static_cast<double>(pos - left_pos), right_n)) /
                    nn;
                double gain = parent_gini - weighted;
                if (gain <= 0.0) continue;

                double thr = v + (next - v) / 2.0;
                if (!(thr < next)) thr = v;  // guard against midpoint rounding up
                SplitChoice cand{true, gain, f, thr, left_n, left_pos};
                if (cand.better_than(best)) best = cand;
            }
        }
        return best;
    }

    void apply_partition(std::size_t lo, std::size_t hi, const SplitChoice& split) {
        const std::vector<double>& col = columns[split.feature];
        for (std::size_t f = 0; f < n_features; ++f) {
            auto& ord = order[f];
            std::size_t w_left = lo;
            std::size_t w_right = 0;
            for (std::size_t i = lo; i < hi; ++i) {
                std::uint32_t idx = ord[i];
                if (col[idx] <= split.threshold)
                    ord[w_left++] = idx;
                else
                    scratch[w_right++] = idx;
            }
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(w_right),
                      ord.begin() + static_cast<std::ptrdiff_t>(w_left));
        }
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Forest fitting

namespace detail {

inline std::vector<std::vector<std::uint32_t>> presort_columns(const Columns& columns,
                                                               std::size_t n_rows) {
    std::vector<std::vector<std::uint32_t>> presorted(columns.size());
    for (std::size_t f = 0; f < columns.size(); ++f) {
        auto& ord = presorted[f];
        ord.resize(n_rows);
        std::iota(ord.begin(), ord.end(), 0);
        const std::vector<double>& col = columns[f];
        std::sort(ord.begin(), ord.end(), [&col](std::uint32_t a, std::uint32_t b) {
            if (col[a] != col[b]) return col[a] < col[b];
            return a < b;
        });
    }
    return presorted;
}

}  // namespace detail

/// Trains `hp.n_estimators` CART trees. `threads` is an execution knob only;
/// results are identical for any thread count.
inline ForestModel fit_forest(const Columns& columns, const Labels& labels,
                              const Hyperparams& hp, std::size_t threads = 1,
                              std::vector<double>* mdi_out = nullptr) {
    hp.validate();
    if (columns.empty()) throw std::invalid_argument("fit_forest: no features");
    const std::size_t n = labels.size();
    if (n == 0) throw std::invalid_argument("fit_forest: empty data");
    for (const auto& col : columns)
        if (col.size() != n) throw std::invalid_argument("fit_forest: ragged columns");
    std::size_t pos = 0;
    for (std::uint8_t y : labels) {
        if (y > 1) throw std::invalid_argument("fit_forest: labels must be 0/1");
        pos += y;
    }
    if (pos == 0 || pos == n)
        throw std::invalid_argument("fit_forest: both classes must be present");

    const auto presorted = detail::presort_columns(columns, n);
    ForestModel model;
    model.hp = hp;
    model.n_features = columns.size();
    model.trees.resize(hp.n_estimators);

    std::vector<std::vector<double>> mdi_per_tree;
    if (mdi_out != nullptr)
        mdi_per_tree.assign(hp.n_estimators, std::vector<double>(columns.size(), 0.0));

    std::vector<std::uint32_t> all_ones(n, 1);
    auto build_range = [&](std::size_t first, std::size_t last) {
        for (std::size_t t = first; t < last; ++t) {
            detail::TreeBuilder builder(columns, labels, hp, 0x74726565 + t, hp.seed);
            if (mdi_out != nullptr) builder.mdi = &mdi_per_tree[t];
            if (hp.bootstrap) {
                auto counts = bootstrap_sample_counts(hp.seed, t, n);
                builder.init_order(presorted, counts, n);
            } else {
                builder.init_order(presorted, all_ones, n);
            }
            model.trees[t] = builder.build();
        }
    };

    threads = std::max<std::size_t>(1, threads);
    if (threads == 1 || hp.n_estimators < 2) {
        build_range(0, hp.n_estimators);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (hp.n_estimators + threads - 1) / threads;
        for (std::size_t w = 0; w < threads; ++w) {
            std::size_t first = w * chunk;
            std::size_t last = std::min<std::size_t>(hp.n_estimators, first + chunk);
            if (first >= last) break;
            pool.emplace_back(build_range, first, last);
        }
        for (std::thread& th : pool) th.join();
    }

    if (mdi_out != nullptr) {
        mdi_out->assign(columns.size(), 0.0);
        for (const auto& per_tree : mdi_per_tree)
            for (std::size_t f = 0; f < columns.size(); ++f)
                (*mdi_out)[f] += per_tree[f];
        double total = std::accumulate(mdi_out->begin(), mdi_out->end(), 0.0);
        if (total <= 0.0) throw std::runtime_error("mdi: no splits in forest");
        for (double& v : *mdi_out) v /= total;
    }
    return model;
}

/// MDI from a trained (possibly deserialized) model: per split, node-fraction
/// weighted Gini decrease credited to the split feature, averaged over trees
/// and normalized to sum to 1.
inline std::vector<double> mdi_importance(const ForestModel& model) {
    std::vector<double> importance(model.n_features, 0.0);
    bool any_split = false;
    for (const DecisionTree& tree : model.trees) {
        if (tree.nodes.empty()) continue;
        double root_n = static_cast<double>(tree.nodes[0].count);
        for (const TreeNode& nd : tree.nodes) {
            if (nd.feature < 0) continue;
            any_split = true;
            const TreeNode& l = tree.nodes[static_cast<std::size_t>(nd.left)];
            const TreeNode& r = tree.nodes[static_cast<std::size_t>(nd.right)];
            double nn = static_cast<double>(nd.count);
            double parent = detail::gini_of(nd.value * nn, nn);
            double wl = static_cast<double>(l.count);
            double wr = static_cast<double>(r.count);
            double child = (wl * detail::gini_of(l.value * wl, wl) +
                            wr * detail::gini_of(r.value * wr, wr)) /
                           nn;
            importance[static_cast<std::size_t>(nd.feature)] +=
                nn / root_n * (parent - child);
        }
    }
    if (!any_split) throw std::runtime_error("mdi: no splits in forest");
    double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    for (double& v : importance) v /= total;
    return importance;
}

// ---------------------------------------------------------------------------
// Evaluation metrics

struct PointMetrics {
    double roc_auc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double average_precision = 0.0;
};

/// ROC-AUC via midranks (equal to pairwise concordance with ties counted
/// 0.5), precision/recall at score > 0.5, and step-wise average precision
/// over the descending-score ranking.
inline PointMetrics evaluate(std::span<const double> scores,
                             std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("evaluate: length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (std::uint8_t y : labels) n_pos += y;
    if (n_pos == 0 || n_pos == n)
        throw std::invalid_argument("evaluate: both classes must be present");
    const std::size_t n_neg = n - n_pos;

    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] < scores[b];
    });

    // Midrank sum over positives.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) rank_sum += midrank;
        i = j;
    }
    double u = rank_sum - static_cast<double>(n_pos) *
                              (static_cast<double>(n_pos) + 1.0) / 2.0;

    PointMetrics out;
    out.roc_auc = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));

    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < n; ++k) {
        bool predicted = scores[k] > 0.5;
        if (predicted && labels[k] == 1) ++tp;
        if (predicted && labels[k] == 0) ++fp;
        if (!predicted && labels[k] == 1) ++fn;
    }
    out.precision = (tp + fp) == 0 ? 0.0
                                   : static_cast<double>(tp) /
                                         static_cast<double>(tp + fp);
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);

    // Average precision: descending scores, tie groups advance together.
    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t cum_tp = 0, cum_n = 0;
    std::size_t hi = n;
    while (hi > 0) {
        std::size_t lo = hi;
        while (lo > 0 && scores[idx[lo - 1]] == scores[idx[hi - 1]]) --lo;
        for (std::size_t k = lo; k < hi; ++k) {
            cum_tp += labels[idx[k]];
            ++cum_n;
        }
        double recall_k = static_cast<double>(cum_tp) / static_cast<double>(n_pos);
        double precision_k = static_cast<double>(cum_tp) / static_cast<double>(cum_n);
        ap += (recall_k - prev_recall) * precision_k;
        prev_recall = recall_k;
        hi = lo;
    }
    out.average_precision = ap;
    return out;
}

// ---------------------------------------------------------------------------
// Stratified cross-validation

/// Deterministic stratified fold assignment: indices of each class are
/// shuffled with the seed and dealt round-robin.
inline std::vector<int> stratified_folds(const Labels& labels, std::size_t k,
                                         std::uint64_t seed) {
    if (k < 2) throw ConfigError("cross-validation needs k >= 2");
    std::vector<int> fold(labels.size(), -1);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        rng::Engine eng = rng::make_engine(seed, 0x666f6c64 + static_cast<std::size_t>(cls));
        rng::shuffle(eng, members);
        for (std::size_t i = 0; i < members.size(); ++i)
            fold[members[i]] = static_cast<int>(i % k);
    }
    return fold;
}

struct MetricSummary {
    double mean = 0.0;
    double standard_error = 0.0;
    std::vector<double> folds;

    void finish() {
        if (folds.empty()) return;
        double s = 0.0;
        for (double v : folds) s += v;
        mean = s / static_cast<double>(folds.size());
        if (folds.size() > 1) {
            double ss = 0.0;
            for (double v : folds) ss += (v - mean) * (v - mean);
            double sd = std::sqrt(ss / static_cast<double>(folds.size() - 1));
            standard_error = sd / std::sqrt(static_cast<double>(folds.size()));
        }
    }
};

struct EvalReport {
    MetricSummary roc_auc;
    MetricSummary precision;
    MetricSummary recall;
    MetricSummary average_precision;
};

/// k-fold CV with stratified folds; returns per-fold metrics and their
/// mean +/- standard error.
inline EvalReport cross_validate(const Columns& columns, const Labels& labels,
                                 const Hyperparams& hp, std::size_t k,
                                 std::uint64_t cv_seed, std::size_t threads = 1) {
    std::vector<int> fold = stratified_folds(labels, k, cv_seed);
    EvalReport report;
    for (std::size_t f = 0; f < k; ++f) {
        Columns train_cols(columns.size());
        Labels train_y;
        std::vector<std::size_t> test_rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (fold[i] == static_cast<int>(f)) {
                test_rows.push_back(i);
            } else {
                train_y.push_back(labels[i]);
            }
        }
        for (std::size_t c = 0; c < columns.size(); ++c) {
            train_cols[c].reserve(train_y.size());
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (fold[i] != static_cast<int>(f)) train_cols[c].push_back(columns[c][i]);
        }

        Hyperparams fold_hp = hp;
        fold_hp.seed = rng::split_seed(hp.seed, 0x63760000 + f);
        ForestModel model = fit_forest(train_cols, train_y, fold_hp, threads);

        std::vector<double> scores(test_rows.size());
        std::vector<std::uint8_t> truth(test_rows.size());
        std::vector<double> x(columns.size());
        for (std::size_t t = 0; t < test_rows.size(); ++t) {
            for (std::size_t c = 0; c < columns.size(); ++c)
                x[c] = columns[c][test_rows[t]];
            scores[t] = model.predict_proba(x);
            truth[t] = labels[test_rows[t]];
        }
        PointMetrics m = evaluate(scores, truth);
        report.roc_auc.folds.push_back(m.roc_auc);
        report.precision.folds.push_back(m.precision);
        report.recall.folds.push_back(m.recall);
        report.average_precision.folds.push_back(m.average_precision);
    }
    report.roc_auc.finish();
    report.precision.finish();
    report.recall.finish();
    report.average_precision.finish();
    return report;
}

// ---------------------------------------------------------------------------
// Randomized hyperparameter search

struct SearchSpace {
    std::pair<std::size_t, std::size_t> n_estimators{50, 300};
    std::pair<std::size_t, std::size_t> max_depth{4, 60};
    std::pair<std::size_t, std::size_t> min_samples_split{2, 10};
    std::pair<std::size_t, std::size_t> min_samples_leaf{1, 20};
    std::pair<double, double> max_features_fraction{0.3, 1.0};
};

struct SearchDraw {
    Hyperparams hp;
    double mean_roc_auc = 0.0;
    bool skipped = false;
    EvalReport report;
};

struct SearchResult {
    Hyperparams best;
    EvalReport best_report;
    std::vector<SearchDraw> ledger;
};

/// `n_fits` seeded draws, each scored by mean ROC-AUC over k stratified
/// folds; ties go to the earliest draw.
inline SearchResult random_search_cv(const Columns& columns, const Labels& labels,
                                     const SearchSpace& space, std::size_t n_fits,
                                     std::size_t k, std::uint64_t seed,
                                     std::size_t threads = 1) {
    if (n_fits < 1) throw ConfigError("random search needs n_fits >= 1");
    // A degenerate fold (single-class) poisons every draw equally; detect once.
    std::vector<int> fold = stratified_folds(labels, k, seed);
    std::vector<std::size_t> fold_pos(k, 0), fold_n(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++fold_n[static_cast<std::size_t>(fold[i])];
        fold_pos[static_cast<std::size_t>(fold[i])] += labels[i];
    }
    bool degenerate = false;
    for (std::size_t f = 0; f < k; ++f)
        if (fold_n[f] == 0 || fold_pos[f] == 0 || fold_pos[f] == fold_n[f])
            degenerate = true;

    SearchResult result;
    result.ledger.reserve(n_fits);
    std::ptrdiff_t best_at = -1;
    for (std::size_t fit = 0; fit < n_fits; ++fit) {
        rng::Engine eng = rng::make_engine(seed, 0x73656172 + fit);
        SearchDraw draw;
        draw.hp.n_estimators = static_cast<std::size_t>(rng::uniform_int(
            eng, static_cast<std::int64_t>(space.n_estimators.first),
            static_cast<std::int64_t>(space.n_estimators.second)));
        draw.hp.max_depth = static_cast<std::size_t>(rng::uniform_int(
            eng, static_cast<std::int64_t>(space.max_depth.first),
            static_cast<std::int64_t>(space.max_depth.second)));
        draw.hp.min_samples_split = static_cast<std::size_t>(rng::uniform_int(
            eng, static_cast<std::int64_t>(space.min_samples_split.first),
            static_cast<std::int64_t>(space.min_samples_split.second)));
        draw.hp.min_samples_leaf = static_cast<std::size_t>(rng::uniform_int(
            eng, static_cast<std::int64_t>(space.min_samples_leaf.first),
            static_cast<std::int64_t>(space.min_samples_leaf.second)));
        draw.hp.max_features_fraction =
            space.max_features_fraction.first +
            rng::uniform(eng) *
                (space.max_features_fraction.second - space.max_features_fraction.first);
        draw.hp.seed = rng::split_seed(seed, 0x68700000 + fit);

        if (degenerate) {
            draw.skipped = true;
            log(LogLevel::Warn, "search draw %zu skipped: degenerate fold", fit);
            result.ledger.push_back(std::move(draw));
            continue;
        }
        draw.report = cross_validate(columns, labels, draw.hp, k, seed, threads);
        draw.mean_roc_auc = draw.report.roc_auc.mean;
        if (best_at < 0 ||
            draw.mean_roc_auc > result.ledger[static_cast<std::size_t>(best_at)].mean_roc_auc) {
            best_at = static_cast<std::ptrdiff_t>(result.ledger.size());
        }
        result.ledger.push_back(std::move(draw));
    }
    if (best_at < 0) throw DataError("random search: every draw was skipped");
    result.best = result.ledger[static_cast<std::size_t>(best_at)].hp;
    result.best_report = result.ledger[static_cast<std::size_t>(best_at)].report;
    return result;
}

// ---------------------------------------------------------------------------
// Feature-set isolation

struct IsolationRow {
    std::string name;
    EvalReport report;
};

/// One model per named feature group (same hyperparameters, clamped
/// max_features) plus the all-features row, each k-fold cross-validated on
/// the same fold assignment; rows sorted ascending by mean ROC-AUC.
inline std::vector<IsolationRow> feature_set_isolation(
    const Columns& columns, const Labels& labels,
    const std::vector<std::pair<std::string, std::vector<std::size_t>>>& groups,
    const Hyperparams& hp, std::size_t k, std::uint64_t seed,
    std::size_t threads = 1) {
    std::vector<char> covered(columns.size(), 0);
    for (const auto& [name, indices] : groups) {
        for (std::size_t f : indices) {
            if (f >= columns.size())
                throw ConfigError("isolation group '" + name + "': bad feature index");
            if (covered[f] != 0)
                throw ConfigError("isolation groups must partition the features");
            covered[f] = 1;
        }
    }
    for (char c : covered)
        if (c == 0) throw ConfigError("isolation groups must cover every feature");

    std::vector<IsolationRow> rows;
    for (const auto& [name, indices] : groups) {
        Columns sub;
        sub.reserve(indices.size());
        for (std::size_t f : indices) sub.push_back(columns[f]);
        rows.push_back({name, cross_validate(sub, labels, hp, k, seed, threads)});
    }
    rows.push_back({"full_model", cross_validate(columns, labels, hp, k, seed, threads)});
    std::stable_sort(rows.begin(), rows.end(),
                     [](const IsolationRow& a, const IsolationRow& b) {
                         return a.report.roc_auc.mean < b.report.roc_auc.mean;
                     });
    return rows;
}

// ---------------------------------------------------------------------------
// Serialization: JSON header (hyperparams, feature schema) + flattened node
// arrays per tree.

inline io::json model_to_json(const ForestModel& model) {
    io::json trees = io::json::array();
    for (const DecisionTree& tree : model.trees) {
        io::json t;
        auto& feature = t["feature"] = io::json::array();
        auto& threshold = t["threshold"] = io::json::array();
        auto& left = t["left"] = io::json::array();
        auto& right = t["right"] = io::json::array();
        auto& value = t["value"] = io::json::array();
        auto& count = t["count"] = io::json::array();
        for (const TreeNode& nd : tree.nodes) {
            feature.push_back(nd.feature);
            threshold.push_back(nd.threshold);
            left.push_back(nd.left);
            right.push_back(nd.right);
            value.push_back(nd.value);
            count.push_back(nd.count);
        }
        trees.push_back(std::move(t));
    }
    return io::json{{"format", "tunecast-forest-v1"},
                    {"hyperparams",
                     {{"n_estimators", model.hp.n_estimators},
                      {"max_depth", model.hp.max_depth},
                      {"min_samples_split", model.hp.min_samples_split},
                      {"min_samples_leaf", model.hp.min_samples_leaf},
                      {"max_features_count", model.hp.max_features_count},
                      {"max_features_fraction", model.hp.max_features_fraction},
                      {"bootstrap", model.hp.bootstrap},
                      {"seed", model.hp.seed}}},
                    {"n_features", model.n_features},
                    {"feature_names", model.feature_names},
                    {"metadata", model.metadata},
                    {"trees", std::move(trees)}};
}

inline ForestModel model_from_json(const io::json& j) {
    if (j.value("format", "") != "tunecast-forest-v1")
        throw DataError("not a tunecast forest file");
    ForestModel model;
    const io::json& hp = j.at("hyperparams");
    model.hp.n_estimators = hp.at("n_estimators").get<std::size_t>();
    model.hp.max_depth = hp.at("max_depth").get<std::size_t>();
    model.hp.min_samples_split = hp.at("min_samples_split").get<std::size_t>();
    model.hp.min_samples_leaf = hp.at("min_samples_leaf").get<std::size_t>();
    model.hp.max_features_count = hp.at("max_features_count").get<std::size_t>();
    model.hp.max_features_fraction = hp.at("max_features_fraction").get<double>();
    model.hp.bootstrap = hp.at("bootstrap").get<bool>();
    model.hp.seed = hp.at("seed").get<std::uint64_t>();
    model.n_features = j.at("n_features").get<std::size_t>();
    model.feature_names = j.value("feature_names", std::vector<std::string>{});
    model.metadata = j.value("metadata", io::json::object());
    for (const io::json& t : j.at("trees")) {
        DecisionTree tree;
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& value = t.at("value");
        const auto& count = t.at("count");
        tree.nodes.resize(feature.size());
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            tree.nodes[i].feature = feature[i].get<std::int32_t>();
            tree.nodes[i].threshold = threshold[i].get<double>();
            tree.nodes[i].left = left[i].get<std::int32_t>();
            tree.nodes[i].right = right[i].get<std::int32_t>();
            tree.nodes[i].value = value[i].get<double>();
            tree.nodes[i].count = count[i].get<std::uint32_t>();
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline void save_model(const std::filesystem::path& path, const ForestModel& model) {
    io::write_file(path, model_to_json(model).dump());
}

inline ForestModel load_model(const std::filesystem::path& path) {
    return model_from_json(io::json::parse(io::read_file(path)));
}

}  // namespace tunecast::forest
