#include "tunecast/forest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "tunecast/rng.hpp"

using namespace tunecast;
using forest::Columns;
using forest::ForestModel;
using forest::Hyperparams;
using forest::Labels;

namespace {

/// Linearly separable 2-D fixture: class decided by x0 + x1 > 1.
void separable_fixture(std::size_t n, Columns& cols, Labels& y, std::uint64_t seed) {
    rng::Engine eng = rng::make_engine(seed, 0);
    cols.assign(2, {});
    y.clear();
    for (std::size_t i = 0; i < n; ++i) {
        double a = rng::uniform(eng);
        double b = rng::uniform(eng);
        cols[0].push_back(a);
        cols[1].push_back(b);
        y.push_back(a + b > 1.0 ? 1 : 0);
    }
    // Guarantee both classes.
    cols[0][0] = 0.0;
    cols[1][0] = 0.0;
    y[0] = 0;
    cols[0][1] = 1.0;
    cols[1][1] = 1.0;
    y[1] = 1;
}

std::vector<double> row_of(const Columns& cols, std::size_t i) {
    std::vector<double> x(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) x[c] = cols[c][i];
    return x;
}

}  // namespace

TEST(Fit, RejectsSingleClassAndEmptyData) {
    Columns cols{{1.0, 2.0, 3.0}};
    Labels all_pos{1, 1, 1};
    Hyperparams hp;
    hp.n_estimators = 3;
    EXPECT_THROW(forest::fit_forest(cols, all_pos, hp), std::invalid_argument);
    EXPECT_THROW(forest::fit_forest(cols, {}, hp), std::invalid_argument);
    EXPECT_THROW(forest::fit_forest({}, all_pos, hp), std::invalid_argument);
}

TEST(Fit, SeparableDataReachesPerfectTrainingAuc) {
    Columns cols;
    Labels y;
    separable_fixture(400, cols, y, 61);
    Hyperparams hp;
    hp.n_estimators = 30;
    hp.max_depth = 8;
    hp.seed = 3;
    ForestModel model = forest::fit_forest(cols, y, hp);
    std::vector<double> scores(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        scores[i] = model.predict_proba(row_of(cols, i));
    forest::PointMetrics m = forest::evaluate(scores, y);
    EXPECT_DOUBLE_EQ(m.roc_auc, 1.0);
}

TEST(Fit, SameSeedGivesBitIdenticalTrees) {
    Columns cols;
    Labels y;
    separable_fixture(300, cols, y, 62);
    Hyperparams hp;
    hp.n_estimators = 10;
    hp.max_depth = 6;
    hp.seed = 99;
    ForestModel a = forest::fit_forest(cols, y, hp);
    ForestModel b = forest::fit_forest(cols, y, hp);
    EXPECT_EQ(forest::model_to_json(a).dump(), forest::model_to_json(b).dump());
}

TEST(Fit, ParallelTrainingMatchesSerial) {
    Columns cols;
    Labels y;
    separable_fixture(300, cols, y, 63);
    Hyperparams hp;
    hp.n_estimators = 9;
    hp.max_depth = 6;
    hp.seed = 7;
    ForestModel serial = forest::fit_forest(cols, y, hp, 1);
    ForestModel parallel = forest::fit_forest(cols, y, hp, 4);
    EXPECT_EQ(forest::model_to_json(serial).dump(),
              forest::model_to_json(parallel).dump());
}

TEST(Fit, ConstantFeaturesPredictThePrior) {
    Columns cols{std::vector<double>(200, 3.5)};
    Labels y(200, 0);
    for (std::size_t i = 0; i < 60; ++i) y[i] = 1;
    Hyperparams hp;
    hp.n_estimators = 20;
    hp.seed = 1;
    hp.bootstrap = false;  // keep every leaf at the exact prior
    ForestModel model = forest::fit_forest(cols, y, hp);
    std::vector<double> x{3.5};
    EXPECT_DOUBLE_EQ(model.predict_proba(x), 0.3);
}

TEST(Predict, PureLeafGivesOne) {
    Columns cols{{0.0, 0.0, 1.0, 1.0}};
    Labels y{0, 0, 1, 1};
    Hyperparams hp;
    hp.n_estimators = 1;
    hp.bootstrap = false;
    hp.seed = 5;
    ForestModel model = forest::fit_forest(cols, y, hp);
    std::vector<double> x{1.0};
    EXPECT_DOUBLE_EQ(model.predict_proba(x), 1.0);
}

TEST(Predict, MeanOverTrees) {
    // Hand-built two-tree forest returning 0.2 and 0.6.
    ForestModel model;
    model.n_features = 1;
    forest::DecisionTree t1, t2;
    t1.nodes.push_back({-1, 0.0, -1, -1, 0.2, 10});
    t2.nodes.push_back({-1, 0.0, -1, -1, 0.6, 10});
    model.trees = {t1, t2};
    std::vector<double> x{0.0};
    EXPECT_DOUBLE_EQ(model.predict_proba(x), 0.4);
}

TEST(Predict, DimensionMismatchRejected) {
    Columns cols{{0.0, 1.0}, {1.0, 0.0}};
    Labels y{0, 1};
    Hyperparams hp;
    hp.n_estimators = 1;
    hp.min_samples_leaf = 1;
    ForestModel model = forest::fit_forest(cols, y, hp);
    std::vector<double> bad{1.0};
    EXPECT_THROW(model.predict_proba(bad), std::invalid_argument);
}

TEST(Evaluate, HandComputedRanking) {
    std::vector<double> scores{0.9, 0.8, 0.7, 0.6};
    Labels y{1, 0, 1, 0};
    forest::PointMetrics m = forest::evaluate(scores, y);
    EXPECT_DOUBLE_EQ(m.roc_auc, 0.75);
    EXPECT_NEAR(m.average_precision, 0.8333, 1e-4);
}

TEST(Evaluate, PerfectSeparationAndAllTies) {
    std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
    Labels y{1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(forest::evaluate(perfect, y).roc_auc, 1.0);
    std::vector<double> flat{0.4, 0.4, 0.4, 0.4};
    EXPECT_DOUBLE_EQ(forest::evaluate(flat, y).roc_auc, 0.5);
}

TEST(Evaluate, SingleClassRejected) {
    std::vector<double> scores{0.2, 0.4};
    Labels y{1, 1};
    EXPECT_THROW(forest::evaluate(scores, y), std::invalid_argument);
}

TEST(Evaluate, PrecisionRecallAtHalf) {
    std::vector<double> scores{0.9, 0.6, 0.4, 0.2};
    Labels y{1, 0, 1, 0};
    forest::PointMetrics m = forest::evaluate(scores, y);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
    EXPECT_DOUBLE_EQ(m.recall, 0.5);
}

TEST(Evaluate, MatchesBruteForceOracles) {
    rng::Engine eng = rng::make_engine(64, 0);
    for (int trial = 0; trial < 120; ++trial) {
        std::size_t n = 2 + rng::uniform_below(eng, 499);
        std::vector<double> scores(n);
        Labels y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse score grid produces plenty of ties.
            scores[i] = static_cast<double>(rng::uniform_below(eng, 12)) / 11.0;
            y[i] = rng::bernoulli(eng, 0.4) ? 1 : 0;
        }
        y[0] = 0;
        y[1] = 1;
        forest::PointMetrics m = forest::evaluate(scores, y);
        EXPECT_DOUBLE_EQ(m.roc_auc, oracles::auc_brute_force(scores, y));
        EXPECT_NEAR(m.average_precision,
                    oracles::average_precision_brute_force(scores, y), 1e-12);
    }
}

TEST(Mdi, SingleInformativeFeatureDominates) {
    rng::Engine eng = rng::make_engine(65, 0);
    Columns cols(4);
    Labels y;
    for (std::size_t i = 0; i < 600; ++i) {
        double signal = rng::uniform(eng);
        cols[0].push_back(rng::uniform(eng));
        cols[1].push_back(rng::uniform(eng));
        cols[2].push_back(rng::uniform(eng));
        cols[3].push_back(signal);
        y.push_back(signal > 0.5 ? 1 : 0);
    }
    Hyperparams hp;
    hp.n_estimators = 30;
    hp.max_depth = 6;
    hp.max_features_count = 2;
    hp.seed = 11;
    std::vector<double> mdi;
    forest::fit_forest(cols, y, hp, 1, &mdi);
    EXPECT_GT(mdi[3], 0.9);
}

TEST(Mdi, NormalisedAndRecomputableFromStoredModel) {
    Columns cols;
    Labels y;
    separable_fixture(400, cols, y, 66);
    Hyperparams hp;
    hp.n_estimators = 15;
    hp.max_depth = 7;
    hp.seed = 4;
    std::vector<double> mdi_live;
    ForestModel model = forest::fit_forest(cols, y, hp, 1, &mdi_live);
    double total = 0.0;
    for (double v : mdi_live) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
    std::vector<double> mdi_stored = forest::mdi_importance(model);
    ASSERT_EQ(mdi_stored.size(), mdi_live.size());
    for (std::size_t f = 0; f < mdi_live.size(); ++f)
        EXPECT_NEAR(mdi_stored[f], mdi_live[f], 1e-9);
}

TEST(Mdi, DuplicateColumnSplitsTheCredit) {
    rng::Engine eng = rng::make_engine(67, 0);
    Columns cols(2);
    Labels y;
    for (std::size_t i = 0; i < 800; ++i) {
        double signal = rng::uniform(eng);
        cols[0].push_back(rng::uniform(eng));
        cols[1].push_back(signal);
        y.push_back(signal > 0.5 ? 1 : 0);
    }
    Hyperparams hp;
    hp.n_estimators = 40;
    hp.max_depth = 5;
    hp.max_features_count = 1;
    hp.seed = 12;
    std::vector<double> solo;
    forest::fit_forest(cols, y, hp, 1, &solo);

    Columns with_dup = cols;
    with_dup.push_back(cols[1]);  // exact copy of the informative column
    std::vector<double> dup;
    forest::fit_forest(with_dup, y, hp, 1, &dup);
    EXPECT_NEAR(dup[1] + dup[2], solo[1], 0.1);
    EXPECT_LT(dup[1], solo[1]);
    EXPECT_LT(dup[2], solo[1]);
}

TEST(Mdi, NoSplitsRaises) {
    ForestModel model;
    model.n_features = 2;
    forest::DecisionTree stump;
    stump.nodes.push_back({-1, 0.0, -1, -1, 0.5, 10});
    model.trees = {stump};
    EXPECT_THROW(forest::mdi_importance(model), std::runtime_error);
}

TEST(Invariants, GiniValues) {
    EXPECT_DOUBLE_EQ(forest::detail::gini_of(5.0, 10.0), 0.5);
    EXPECT_DOUBLE_EQ(forest::detail::gini_of(0.0, 10.0), 0.0);
    EXPECT_DOUBLE_EQ(forest::detail::gini_of(10.0, 10.0), 0.0);
}

TEST(Invariants, MonotoneRescalingLeavesEverythingUnchanged) {
    // Exact equivariance domain for midpoint thresholds: every routed point
    // is one of the node's own sample values, i.e. training rows without
    // bootstrap. A point strictly between two training values can land on
    // either side of a midpoint after rescaling; that holds for any CART
    // with midpoint thresholds.
    Columns cols;
    Labels y;
    separable_fixture(300, cols, y, 68);
    Hyperparams hp;
    hp.n_estimators = 12;
    hp.max_depth = 6;
    hp.seed = 21;
    hp.bootstrap = false;
    ForestModel base = forest::fit_forest(cols, y, hp);

    Columns scaled = cols;
    for (double& v : scaled[1]) v = std::exp(3.0 * v);  // strictly increasing
    ForestModel transformed = forest::fit_forest(scaled, y, hp);

    std::vector<double> s0(y.size()), s1(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        std::vector<double> x0 = row_of(cols, i);
        std::vector<double> x1 = row_of(scaled, i);
        s0[i] = base.predict_proba(x0);
        s1[i] = transformed.predict_proba(x1);
        EXPECT_DOUBLE_EQ(s0[i], s1[i]);
    }
    EXPECT_DOUBLE_EQ(forest::evaluate(s0, y).roc_auc, forest::evaluate(s1, y).roc_auc);
}

TEST(Invariants, OutOfBagFractionNearOneOverE) {
    const std::size_t n = 10000;
    for (std::size_t tree = 0; tree < 3; ++tree) {
        std::vector<std::uint32_t> counts = forest::bootstrap_sample_counts(77, tree, n);
        std::size_t total = 0, oob = 0;
        for (std::uint32_t c : counts) {
            total += c;
            if (c == 0) ++oob;
        }
        EXPECT_EQ(total, n);  // resample has the training-set size
        double fraction = static_cast<double>(oob) / static_cast<double>(n);
        EXPECT_NEAR(fraction, std::exp(-1.0), 0.02);
    }
}

TEST(Cv, StratifiedFoldsPreserveBalanceAndPartition) {
    Labels y(1000, 0);
    for (std::size_t i = 0; i < 300; ++i) y[i] = 1;
    std::vector<int> folds = forest::stratified_folds(y, 5, 3);
    std::vector<std::size_t> pos(5, 0), n(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        ASSERT_GE(folds[i], 0);
        ASSERT_LT(folds[i], 5);
        ++n[static_cast<std::size_t>(folds[i])];
        pos[static_cast<std::size_t>(folds[i])] += y[i];
    }
    for (std::size_t f = 0; f < 5; ++f) {
        EXPECT_EQ(n[f], 200u);
        EXPECT_EQ(pos[f], 60u);
    }
}

TEST(Cv, ReportsFoldMetricsWithStandardErrors) {
    Columns cols;
    Labels y;
    separable_fixture(500, cols, y, 69);
    Hyperparams hp;
    hp.n_estimators = 15;
    hp.max_depth = 7;
    hp.seed = 31;
    forest::EvalReport report = forest::cross_validate(cols, y, hp, 5, 8);
    EXPECT_EQ(report.roc_auc.folds.size(), 5u);
    EXPECT_GT(report.roc_auc.mean, 0.95);
    EXPECT_GE(report.roc_auc.standard_error, 0.0);
}

TEST(Search, SinglePointSpaceReturnsThatPoint) {
    Columns cols;
    Labels y;
    separable_fixture(200, cols, y, 70);
    forest::SearchSpace space;
    space.n_estimators = {5, 5};
    space.max_depth = {4, 4};
    space.min_samples_split = {2, 2};
    space.min_samples_leaf = {1, 1};
    space.max_features_fraction = {1.0, 1.0};
    forest::SearchResult result = forest::random_search_cv(cols, y, space, 1, 3, 9);
    EXPECT_EQ(result.best.n_estimators, 5u);
    EXPECT_EQ(result.best.max_depth, 4u);
    EXPECT_EQ(result.ledger.size(), 1u);
}

TEST(Search, DeeperConfigurationBeatsStumps) {
    Columns cols;
    Labels y;
    separable_fixture(500, cols, y, 71);
    // Depth range {0, 6}: some draws are root-only stumps, some are deep.
    forest::SearchSpace space;
    space.n_estimators = {10, 10};
    space.max_depth = {0, 6};
    space.min_samples_split = {2, 2};
    space.min_samples_leaf = {1, 1};
    space.max_features_fraction = {1.0, 1.0};
    forest::SearchResult result = forest::random_search_cv(cols, y, space, 8, 3, 13);
    EXPECT_GT(result.best.max_depth, 0u);
    bool saw_stump = false;
    for (const auto& draw : result.ledger) {
        if (draw.hp.max_depth == 0) {
            saw_stump = true;
            EXPECT_GT(result.best_report.roc_auc.mean, draw.mean_roc_auc);
        }
    }
    EXPECT_TRUE(saw_stump);
}

TEST(Search, DeterministicGivenSeed) {
    Columns cols;
    Labels y;
    separable_fixture(200, cols, y, 72);
    forest::SearchSpace space;
    space.n_estimators = {5, 20};
    space.max_depth = {2, 8};
    forest::SearchResult a = forest::random_search_cv(cols, y, space, 5, 3, 17);
    forest::SearchResult b = forest::random_search_cv(cols, y, space, 5, 3, 17);
    EXPECT_EQ(a.best.n_estimators, b.best.n_estimators);
    EXPECT_EQ(a.best.max_depth, b.best.max_depth);
    EXPECT_EQ(a.best.seed, b.best.seed);
}

TEST(Isolation, ValidatesPartition) {
    Columns cols;
    Labels y;
    separable_fixture(100, cols, y, 73);
    Hyperparams hp;
    hp.n_estimators = 3;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> overlapping{
        {"a", {0, 1}}, {"b", {1}}};
    EXPECT_THROW(forest::feature_set_isolation(cols, y, overlapping, hp, 3, 1),
                 ConfigError);
    std::vector<std::pair<std::string, std::vector<std::size_t>>> incomplete{{"a", {0}}};
    EXPECT_THROW(forest::feature_set_isolation(cols, y, incomplete, hp, 3, 1),
                 ConfigError);
}

TEST(Isolation, NoiseGroupSitsAtChanceAndFullModelLeads) {
    rng::Engine eng = rng::make_engine(74, 0);
    Columns cols(3);
    Labels y;
    for (std::size_t i = 0; i < 1200; ++i) {
        double signal = rng::uniform(eng);
        cols[0].push_back(signal);
        cols[1].push_back(rng::uniform(eng));  // pure noise
        cols[2].push_back(rng::uniform(eng));  // pure noise
        y.push_back(rng::bernoulli(eng, signal > 0.5 ? 0.8 : 0.2) ? 1 : 0);
    }
    Hyperparams hp;
    hp.n_estimators = 25;
    hp.max_depth = 6;
    hp.min_samples_leaf = 10;
    hp.seed = 19;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups{
        {"signal", {0}}, {"noise", {1, 2}}};
    auto rows = forest::feature_set_isolation(cols, y, groups, hp, 4, 23);
    ASSERT_EQ(rows.size(), 3u);
    // Rows are sorted ascending by ROC-AUC; full model must come last here.
    EXPECT_EQ(rows.back().name, "full_model");
    for (const auto& row : rows) {
        if (row.name == "noise") {
            EXPECT_GE(row.report.roc_auc.mean, 0.48);
            EXPECT_LE(row.report.roc_auc.mean, 0.52);
        }
        EXPECT_LE(row.report.roc_auc.mean, rows.back().report.roc_auc.mean + 1e-9);
    }
}

TEST(Serialization, RoundTripPreservesPredictions) {
    Columns cols;
    Labels y;
    separable_fixture(300, cols, y, 75);
    Hyperparams hp;
    hp.n_estimators = 8;
    hp.max_depth = 6;
    hp.seed = 29;
    ForestModel model = forest::fit_forest(cols, y, hp);
    model.feature_names = {"x0", "x1"};
    auto dir = std::filesystem::temp_directory_path() / "tunecast_forest_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "model.json";
    forest::save_model(path, model);
    ForestModel loaded = forest::load_model(path);
    EXPECT_EQ(loaded.feature_names, model.feature_names);
    EXPECT_EQ(loaded.hp.n_estimators, hp.n_estimators);
    for (std::size_t i = 0; i < y.size(); ++i) {
        std::vector<double> x = row_of(cols, i);
        EXPECT_DOUBLE_EQ(model.predict_proba(x), loaded.predict_proba(x));
    }
    std::filesystem::remove_all(dir);
}
