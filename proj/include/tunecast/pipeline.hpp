// Configuration-driven pipeline stages: generate, ingest, embed, features,
// analyze, train, isolate, report. Every stage echoes its effective config
// (defaults filled) into a stamp, stamps each artifact with the config hash,
// and refuses to resume over outputs produced under a different config.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/embeddings.hpp"
#include "tunecast/engagement.hpp"
#include "tunecast/features.hpp"
#include "tunecast/forest.hpp"
#include "tunecast/io.hpp"
#include "tunecast/multiplex_graph.hpp"
#include "tunecast/share_events.hpp"
#include "tunecast/stats.hpp"
#include "tunecast/synth.hpp"

namespace tunecast::pipeline {

namespace fs = std::filesystem;

// Fixed artifact names inside the run directory.
namespace artifact {
inline constexpr const char* kInteractions = "interactions.jsonl";
inline constexpr const char* kPlaylists = "playlists.jsonl";
inline constexpr const char* kPlayback = "playback.jsonl";
inline constexpr const char* kAccounts = "accounts.jsonl";
inline constexpr const char* kShares = "shares.jsonl";
inline constexpr const char* kGroundTruth = "ground_truth.jsonl";
inline constexpr const char* kGroundTruthMeta = "ground_truth_meta.json";
inline constexpr const char* kNetwork = "network.jsonl";
inline constexpr const char* kEmbeddingsBin = "embeddings.bin";
inline constexpr const char* kEmbeddingsText = "embeddings.txt";
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kDatasetSchema = "dataset_schema.json";
inline constexpr const char* kExtractionReport = "extraction_report.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kCvReportJson = "cv_report.json";
inline constexpr const char* kCvReportCsv = "cv_report.csv";
inline constexpr const char* kSearchLedger = "search_ledger.json";
inline constexpr const char* kIsolationCsv = "isolation_table.csv";
inline constexpr const char* kIsolationJson = "isolation_report.json";
inline constexpr const char* kMdiTable = "figdata/fig9.csv";
}  // namespace artifact

struct RunConfig {
    std::uint64_t master_seed = 1;
    fs::path out_dir = "runs/out";

    DayIndex analysis_start_day = 19448;
    std::size_t analysis_days = 91;
    std::size_t taste_window_days = 60;
    std::size_t bin_count = 12;
    std::size_t min_bin_count = 30;

    embed::EmbeddingConfig embedding;
    std::string embedding_format = "binary";  // or "text"
    bool dedup_user_tracks = false;

    std::vector<std::uint32_t> sampling_bin_edges;  // empty: rank deciles
    std::size_t sampling_cap_per_bin = 1000000;

    synth::SynthConfig synth;

    forest::Hyperparams model_hp;
    std::size_t cv_folds = 5;
    std::size_t threads = 1;
    bool search_enabled = false;
    std::size_t search_n_fits = 20;
    forest::SearchSpace search_space;

    share::AppAliasMap app_aliases;

    io::json effective;       // every default echoed
    std::string config_hash;  // FNV-1a of the effective config dump

    // Derived seeds, fixed derivation from the master seed.
    std::uint64_t synth_seed() const { return rng::split_seed(master_seed, 101); }
    std::uint64_t embedding_seed() const { return rng::split_seed(master_seed, 102); }
    std::uint64_t sampling_seed() const { return rng::split_seed(master_seed, 103); }
    std::uint64_t model_seed() const { return rng::split_seed(master_seed, 104); }
    std::uint64_t cv_seed() const { return rng::split_seed(master_seed, 105); }
    std::uint64_t permutation_seed() const { return rng::split_seed(master_seed, 106); }
    std::uint64_t search_seed() const { return rng::split_seed(master_seed, 107); }

    fs::path path_of(const char* name) const { return out_dir / name; }

    Timestamp analysis_start_ts() const { return day_start(analysis_start_day); }
    Timestamp taste_window_lo() const {
        return analysis_start_ts() -
               static_cast<Timestamp>(taste_window_days) * kSecondsPerDay;
    }
};

namespace detail {

inline std::size_t get_size(const io::json& j, const char* key, std::size_t dflt) {
    return j.value(key, dflt);
}

}  // namespace detail

/// Parses the config file, applies CLI overrides, fills every default, and
/// computes the config hash over the echoed effective form.
inline RunConfig load_run_config(const fs::path& config_path,
                                 std::optional<std::uint64_t> seed_override = {},
                                 std::optional<fs::path> out_override = {}) {
    io::json j;
    try {
        j = io::json::parse(io::read_file(config_path));
    } catch (const DataError&) {
        throw ConfigError("cannot read config file: " + config_path.string());
    } catch (const io::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    RunConfig cfg;
    cfg.master_seed = j.value("seed", cfg.master_seed);
    if (seed_override.has_value()) cfg.master_seed = *seed_override;
    cfg.out_dir = fs::path(j.value("out_dir", cfg.out_dir.string()));
    if (out_override.has_value()) cfg.out_dir = *out_override;

    const io::json analysis = j.value("analysis", io::json::object());
    cfg.analysis_start_day = analysis.value("start_day", cfg.analysis_start_day);
    cfg.analysis_days = detail::get_size(analysis, "days", cfg.analysis_days);
    cfg.taste_window_days =
        detail::get_size(analysis, "taste_window_days", cfg.taste_window_days);
    cfg.bin_count = detail::get_size(analysis, "bin_count", cfg.bin_count);
    cfg.min_bin_count = detail::get_size(analysis, "min_bin_count", cfg.min_bin_count);

    const io::json embedding = j.value("embedding", io::json::object());
    cfg.embedding.dim = detail::get_size(embedding, "dim", 80);
    cfg.embedding.window = detail::get_size(embedding, "window", cfg.embedding.window);
    cfg.embedding.negatives =
        detail::get_size(embedding, "negatives", cfg.embedding.negatives);
    cfg.embedding.epochs = detail::get_size(embedding, "epochs", cfg.embedding.epochs);
    cfg.embedding.learning_rate =
        embedding.value("learning_rate", cfg.embedding.learning_rate);
    cfg.embedding.workers = detail::get_size(embedding, "workers", 1);
    cfg.embedding_format = embedding.value("format", cfg.embedding_format);
    cfg.dedup_user_tracks = embedding.value("dedup_user_tracks", cfg.dedup_user_tracks);
    if (cfg.embedding_format != "binary" && cfg.embedding_format != "text")
        throw ConfigError("embedding.format must be 'binary' or 'text'");
    cfg.embedding.seed = cfg.embedding_seed();

    const io::json sampling = j.value("sampling", io::json::object());
    if (sampling.contains("bin_edges"))
        cfg.sampling_bin_edges =
            sampling.at("bin_edges").get<std::vector<std::uint32_t>>();
    cfg.sampling_cap_per_bin =
        detail::get_size(sampling, "cap_per_bin", cfg.sampling_cap_per_bin);

    cfg.synth = synth::SynthConfig::from_json(j.value("synth", io::json::object()));
    // Shared sections are authoritative for the fields they duplicate.
    cfg.synth.seed = cfg.synth_seed();
    cfg.synth.embedding_seed = cfg.embedding_seed();
    cfg.synth.analysis_start_day = cfg.analysis_start_day;
    cfg.synth.analysis_days = cfg.analysis_days;
    cfg.synth.taste_window_days = cfg.taste_window_days;
    cfg.synth.embedding_dim = cfg.embedding.dim;
    cfg.synth.embedding_window = cfg.embedding.window;
    cfg.synth.embedding_negatives = cfg.embedding.negatives;
    cfg.synth.embedding_epochs = cfg.embedding.epochs;
    cfg.synth.embedding_learning_rate = cfg.embedding.learning_rate;

    const io::json model = j.value("model", io::json::object());
    cfg.model_hp.n_estimators = detail::get_size(model, "n_estimators", 100);
    cfg.model_hp.max_depth = detail::get_size(model, "max_depth", 16);
    cfg.model_hp.min_samples_split = detail::get_size(model, "min_samples_split", 2);
    cfg.model_hp.min_samples_leaf = detail::get_size(model, "min_samples_leaf", 25);
    cfg.model_hp.max_features_count = detail::get_size(model, "max_features_count", 0);
    cfg.model_hp.max_features_fraction = model.value("max_features_fraction", 0.0);
    cfg.model_hp.bootstrap = model.value("bootstrap", true);
    cfg.model_hp.seed = cfg.model_seed();
    cfg.model_hp.validate();
    cfg.cv_folds = detail::get_size(model, "cv_folds", cfg.cv_folds);
    if (cfg.cv_folds < 2) throw ConfigError("model.cv_folds must be >= 2");
    cfg.threads = detail::get_size(model, "threads", cfg.threads);

    const io::json search = model.value("search", io::json::object());
    cfg.search_enabled = search.value("enabled", false);
    cfg.search_n_fits = detail::get_size(search, "n_fits", cfg.search_n_fits);
    const io::json space = search.value("space", io::json::object());
    auto range = [&](const char* key, std::pair<std::size_t, std::size_t> dflt) {
        if (!space.contains(key)) return dflt;
        auto v = space.at(key).get<std::vector<std::size_t>>();
        if (v.size() != 2 || v[0] > v[1])
            throw ConfigError("search space range must be [lo, hi]");
        return std::make_pair(v[0], v[1]);
    };
    cfg.search_space.n_estimators = range("n_estimators", {50, 300});
    cfg.search_space.max_depth = range("max_depth", {4, 60});
    cfg.search_space.min_samples_split = range("min_samples_split", {2, 10});
    cfg.search_space.min_samples_leaf = range("min_samples_leaf", {1, 20});
    if (space.contains("max_features_fraction")) {
        auto v = space.at("max_features_fraction").get<std::vector<double>>();
        if (v.size() != 2 || v[0] > v[1] || v[0] <= 0.0 || v[1] > 1.0)
            throw ConfigError("search max_features_fraction must be [lo, hi] in (0,1]");
        cfg.search_space.max_features_fraction = {v[0], v[1]};
    }

    if (j.contains("app_aliases"))
        for (const auto& [key, value] : j.at("app_aliases").items())
            cfg.app_aliases[share::canonical_app_token(key)] =
                share::canonical_app_token(value.get<std::string>());

    // Effective config echo: every value after defaulting and overrides.
    io::json aliases = io::json::object();
    for (const auto& [k, v] : cfg.app_aliases) aliases[k] = v;
    cfg.effective = io::json{
        {"seed", cfg.master_seed},
        {"out_dir", cfg.out_dir.string()},
        {"analysis",
         {{"start_day", cfg.analysis_start_day},
          {"days", cfg.analysis_days},
          {"taste_window_days", cfg.taste_window_days},
          {"bin_count", cfg.bin_count},
          {"min_bin_count", cfg.min_bin_count}}},
        {"embedding",
         {{"dim", cfg.embedding.dim},
          {"window", cfg.embedding.window},
          {"negatives", cfg.embedding.negatives},
          {"epochs", cfg.embedding.epochs},
          {"learning_rate", cfg.embedding.learning_rate},
          {"workers", cfg.embedding.workers},
          {"format", cfg.embedding_format},
          {"dedup_user_tracks", cfg.dedup_user_tracks}}},
        {"sampling",
         {{"bin_edges", cfg.sampling_bin_edges},
          {"cap_per_bin", cfg.sampling_cap_per_bin}}},
        {"synth", cfg.synth.to_json()},
        {"model",
         {{"n_estimators", cfg.model_hp.n_estimators},
          {"max_depth", cfg.model_hp.max_depth},
          {"min_samples_split", cfg.model_hp.min_samples_split},
          {"min_samples_leaf", cfg.model_hp.min_samples_leaf},
          {"max_features_count", cfg.model_hp.max_features_count},
          {"max_features_fraction", cfg.model_hp.max_features_fraction},
          {"bootstrap", cfg.model_hp.bootstrap},
          {"cv_folds", cfg.cv_folds},
          {"threads", cfg.threads},
          {"search",
           {{"enabled", cfg.search_enabled},
            {"n_fits", cfg.search_n_fits},
            {"space",
             {{"n_estimators",
               {cfg.search_space.n_estimators.first, cfg.search_space.n_estimators.second}},
              {"max_depth",
               {cfg.search_space.max_depth.first, cfg.search_space.max_depth.second}},
              {"min_samples_split",
               {cfg.search_space.min_samples_split.first,
                cfg.search_space.min_samples_split.second}},
              {"min_samples_leaf",
               {cfg.search_space.min_samples_leaf.first,
                cfg.search_space.min_samples_leaf.second}},
              {"max_features_fraction",
               {cfg.search_space.max_features_fraction.first,
                cfg.search_space.max_features_fraction.second}}}}}}}},
        {"app_aliases", aliases}};
    // The hash covers config semantics; the output location does not alter
    // artifact content, so identical runs in different directories match.
    io::json hashed = cfg.effective;
    hashed.erase("out_dir");
    cfg.config_hash = io::fnv1a64_hex(hashed.dump());
    return cfg;
}

// ---------------------------------------------------------------------------
// Stage stamps

inline std::string stamp_line(const RunConfig& cfg) {
    return "config_hash=" + cfg.config_hash + " seed=" + std::to_string(cfg.master_seed);
}

inline void write_stamp(const RunConfig& cfg, const std::string& stage,
                        const std::vector<std::string>& artifacts) {
    io::json files = io::json::object();
    for (const std::string& name : artifacts)
        files[name] = io::fnv1a64_hex(io::read_file(cfg.out_dir / name));
    io::json stamp{{"stage", stage},
                   {"config_hash", cfg.config_hash},
                   {"seed", cfg.master_seed},
                   {"effective_config", cfg.effective},
                   {"artifacts", files}};
    io::write_file(cfg.out_dir / "stamps" / (stage + ".json"), stamp.dump(2));
}

/// Resume guard: upstream stage must exist and carry the same config hash.
inline void require_stage(const RunConfig& cfg, const std::string& stage) {
    fs::path p = cfg.out_dir / "stamps" / (stage + ".json");
    if (!fs::exists(p))
        throw DataError("stage '" + stage + "' has not produced outputs in " +
                        cfg.out_dir.string() + " (missing stamp)");
    io::json stamp = io::json::parse(io::read_file(p));
    if (stamp.value("config_hash", "") != cfg.config_hash)
        throw DataError("stage '" + stage +
                        "' was produced under a different config/seed; "
                        "use a fresh out dir");
}

// ---------------------------------------------------------------------------
// Stages

inline void run_generate(const RunConfig& cfg) {
    synth::World world = synth::generate_world(cfg.synth);
    synth::generate_share_events(world);
    synth::WorldPaths paths{
        cfg.path_of(artifact::kInteractions), cfg.path_of(artifact::kPlaylists),
        cfg.path_of(artifact::kPlayback),     cfg.path_of(artifact::kAccounts),
        cfg.path_of(artifact::kShares),       cfg.path_of(artifact::kGroundTruth),
        cfg.path_of(artifact::kGroundTruthMeta)};
    synth::emit_world(world, paths);
    write_stamp(cfg, "generate",
                {artifact::kInteractions, artifact::kPlaylists, artifact::kPlayback,
                 artifact::kAccounts, artifact::kShares, artifact::kGroundTruth,
                 artifact::kGroundTruthMeta});
    log(LogLevel::Info, "generate: %zu events (%zu surviving), %zu playback records",
        world.events.size(), world.truth.events.size(), world.playback.size());
}

inline void run_ingest(const RunConfig& cfg) {
    require_stage(cfg, "generate");
    net::MultiplexNetwork network =
        net::MultiplexNetwork::load_jsonl(cfg.path_of(artifact::kInteractions));
    network.save_jsonl(cfg.path_of(artifact::kNetwork));
    write_stamp(cfg, "ingest", {artifact::kNetwork});
    log(LogLevel::Info, "ingest: %zu events across %zu users", network.event_count(),
        network.user_count());
}

inline void run_embed(const RunConfig& cfg) {
    require_stage(cfg, "generate");
    embed::PlaylistCorpus corpus =
        embed::load_corpus_jsonl(cfg.path_of(artifact::kPlaylists));
    embed::EmbeddingSpace space = embed::train_track_embeddings(corpus, cfg.embedding);
    const char* name = cfg.embedding_format == "text" ? artifact::kEmbeddingsText
                                                      : artifact::kEmbeddingsBin;
    if (cfg.embedding_format == "text")
        space.save_text(cfg.path_of(name));
    else
        space.save_binary(cfg.path_of(name));
    write_stamp(cfg, "embed", {name});
    log(LogLevel::Info, "embed: %zu tracks x %zu dims", space.vocab_size(), space.dim());
}

namespace detail {

inline embed::EmbeddingSpace load_space(const RunConfig& cfg) {
    if (cfg.embedding_format == "text")
        return embed::EmbeddingSpace::load_text(cfg.path_of(artifact::kEmbeddingsText));
    return embed::EmbeddingSpace::load_binary(cfg.path_of(artifact::kEmbeddingsBin));
}

struct Stores {
    net::MultiplexNetwork network;
    engage::PlaybackLog playback;
    feat::AccountLog accounts;
    embed::EmbeddingSpace space;
    feat::TasteVectors tastes;
    std::vector<share::ShareEvent> shares;
};

inline Stores load_stores(const RunConfig& cfg) {
    Stores s;
    s.network = net::MultiplexNetwork::load_jsonl(cfg.path_of(artifact::kNetwork));
    s.playback = engage::load_playback_jsonl(cfg.path_of(artifact::kPlayback));
    s.accounts = feat::AccountLog::load_jsonl(cfg.path_of(artifact::kAccounts));
    s.space = load_space(cfg);
    s.shares = share::load_shares_jsonl(cfg.path_of(artifact::kShares));
    std::vector<UserId> users;
    {
        std::unordered_set<UserId> seen;
        for (const share::ShareEvent& ev : s.shares) {
            seen.insert(ev.sender);
            seen.insert(ev.receiver);
        }
        users.assign(seen.begin(), seen.end());
        std::sort(users.begin(), users.end());
    }
    s.tastes = feat::build_taste_vectors(s.playback, users, s.space,
                                         cfg.taste_window_lo(), cfg.analysis_start_ts(),
                                         cfg.dedup_user_tracks);
    return s;
}

}  // namespace detail

struct FeatureStageResult {
    std::size_t input_events = 0;
    std::size_t discovery_events = 0;
    std::size_t sampled_events = 0;
    feat::ExtractionReport report;
};

inline FeatureStageResult run_features(const RunConfig& cfg) {
    require_stage(cfg, "generate");
    require_stage(cfg, "ingest");
    require_stage(cfg, "embed");
    detail::Stores stores = detail::load_stores(cfg);

    FeatureStageResult result;
    result.input_events = stores.shares.size();

    std::vector<share::ShareEvent> discovery =
        share::filter_discovery_shares(stores.shares, stores.playback);
    result.discovery_events = discovery.size();

    std::vector<std::uint32_t> edges = cfg.sampling_bin_edges;
    if (edges.empty()) edges = share::default_rank_deciles(discovery);
    std::vector<share::ShareEvent> sampled = share::stratified_sample_by_artist(
        discovery, edges, cfg.sampling_cap_per_bin, cfg.sampling_seed());
    result.sampled_events = sampled.size();

    feat::ExtractionContext ctx;
    ctx.network = &stores.network;
    ctx.playback = &stores.playback;
    ctx.accounts = &stores.accounts;
    ctx.space = &stores.space;
    ctx.tastes = &stores.tastes;
    ctx.analysis_start_day = cfg.analysis_start_day;
    ctx.app_aliases = cfg.app_aliases;

    feat::Dataset dataset = feat::build_dataset(sampled, ctx);
    result.report = dataset.report;

    feat::save_dataset_csv(cfg.path_of(artifact::kDataset), dataset, stamp_line(cfg));
    io::write_file(cfg.path_of(artifact::kDatasetSchema),
                   feat::dataset_schema_json().dump(2));
    io::json report = dataset.report.to_json();
    report["input_events"] = result.input_events;
    report["discovery_events"] = result.discovery_events;
    report["sampled_events"] = result.sampled_events;
    report["sampling_bin_edges"] = edges;
    io::write_file(cfg.path_of(artifact::kExtractionReport), report.dump(2));
    write_stamp(cfg, "features",
                {artifact::kDataset, artifact::kDatasetSchema,
                 artifact::kExtractionReport});
    log(LogLevel::Info,
        "features: %zu shares -> %zu discovery -> %zu sampled -> %zu examples "
        "(positive rate %.4f)",
        result.input_events, result.discovery_events, result.sampled_events,
        dataset.report.extracted, dataset.report.positive_rate());
    return result;
}

// ---------------------------------------------------------------------------
// Figure data

namespace detail {

inline void write_curve_csv(const fs::path& path, const RunConfig& cfg,
                            const stats::BinnedCurve& curve) {
    io::CsvWriter csv(path);
    csv.comment(stamp_line(cfg));
    csv.row({"bin_lo", "bin_hi", "count", "engaged", "p_hat", "ci_lo", "ci_hi",
             "masked"});
    for (const stats::Bin& b : curve.bins)
        csv.row({io::format_double(b.lo), io::format_double(b.hi),
                 std::to_string(b.count), std::to_string(b.engaged),
                 b.masked ? "" : io::format_double(b.p_hat),
                 b.masked ? "" : io::format_double(b.ci.lo),
                 b.masked ? "" : io::format_double(b.ci.hi), b.masked ? "1" : "0"});
}

inline void write_stratified_curve_csv(const fs::path& path, const RunConfig& cfg,
                                       const std::map<std::string, stats::BinnedCurve>&
                                           curves) {
    io::CsvWriter csv(path);
    csv.comment(stamp_line(cfg));
    csv.row({"stratum", "bin_lo", "bin_hi", "count", "engaged", "p_hat", "ci_lo",
             "ci_hi", "masked"});
    for (const auto& [stratum, curve] : curves)
        for (const stats::Bin& b : curve.bins)
            csv.row({stratum, io::format_double(b.lo), io::format_double(b.hi),
                     std::to_string(b.count), std::to_string(b.engaged),
                     b.masked ? "" : io::format_double(b.p_hat),
                     b.masked ? "" : io::format_double(b.ci.lo),
                     b.masked ? "" : io::format_double(b.ci.hi), b.masked ? "1" : "0"});
}

inline void write_samples_csv(const fs::path& path, const RunConfig& cfg,
                              const std::vector<std::pair<std::string, double>>& rows) {
    io::CsvWriter csv(path);
    csv.comment(stamp_line(cfg));
    csv.row({"stratum", "value"});
    for (const auto& [stratum, value] : rows)
        csv.row({stratum, io::format_double(value)});
}

inline void write_ks_json(const fs::path& path, const stats::KsResult& ks,
                          double mean_a, double mean_b, const std::string& label_a,
                          const std::string& label_b) {
    io::write_file(path, io::json{{"d", ks.d},
                                  {"p_value", ks.p_value},
                                  {"n_a", ks.n_a},
                                  {"n_b", ks.n_b},
                                  {"mean_" + label_a, mean_a},
                                  {"mean_" + label_b, mean_b}}
                             .dump(2));
}

inline stats::BinSpec default_spec(const RunConfig& cfg) {
    stats::BinSpec spec;
    spec.kind = stats::EqualWidthBins{cfg.bin_count};
    spec.min_count = cfg.min_bin_count;
    return spec;
}

}  // namespace detail

inline void run_analyze(const RunConfig& cfg) {
    require_stage(cfg, "features");
    feat::LoadedDataset data = feat::load_dataset_csv(cfg.path_of(artifact::kDataset));
    if (data.size() == 0) throw DataError("analyze: empty dataset");

    const auto& names = feat::feature_names();
    auto col_index = [&](const char* name) {
        for (std::size_t f = 0; f < names.size(); ++f)
            if (names[f] == name) return f;
        throw std::logic_error("unknown feature name");
    };
    const std::vector<double>& rt = data.feature_columns[col_index("rt_cosine")];
    const std::vector<double>& sr = data.feature_columns[col_index("sr_cosine")];
    const std::vector<double>& sa =
        data.feature_columns[col_index("sender_artist_engagement_7d")];
    const std::vector<double>& sum_col =
        data.feature_columns[col_index("sum_social_interactions")];
    const std::vector<double>& recip =
        data.feature_columns[col_index("reciprocal_link_sharing")];
    const std::vector<double>& rank =
        data.feature_columns[col_index("artist_popularity_rank")];

    std::vector<bool> engaged(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) engaged[i] = data.labels[i] == 1;

    fs::path figdir = cfg.out_dir / "figdata";
    fs::create_directories(figdir);

    // fig2a: the engagement curve family E = t_max * (log10 n + 1).
    {
        io::CsvWriter csv(figdir / "fig2a.csv");
        csv.comment(stamp_line(cfg));
        csv.row({"t_max", "n_daily_tracks", "e_sum"});
        for (int t_max = 1; t_max <= 7; ++t_max)
            for (std::size_t n = 1; n <= 10; ++n)
                csv.row({std::to_string(t_max), std::to_string(n),
                         io::format_double(static_cast<double>(t_max) *
                                           engage::daily_engagement_value(n))});
    }

    // fig2b: ECDF of the 7-day post-open engagement over share events.
    {
        stats::Ecdf cdf = stats::ecdf(data.e7);
        io::CsvWriter csv(figdir / "fig2b.csv");
        csv.comment(stamp_line(cfg));
        csv.row({"e7", "cdf"});
        const auto& sorted = cdf.sorted_values();
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
            csv.row({io::format_double(sorted[i]),
                     io::format_double(static_cast<double>(i + 1) /
                                       static_cast<double>(sorted.size()))});
        }
    }

    // fig3: observed vs shuffled sender-receiver taste similarity.
    {
        engage::PlaybackLog playback =
            engage::load_playback_jsonl(cfg.path_of(artifact::kPlayback));
        embed::EmbeddingSpace space = detail::load_space(cfg);
        std::vector<UserId> users;
        {
            std::unordered_set<UserId> seen;
            for (std::size_t i = 0; i < data.size(); ++i) {
                seen.insert(UserId{data.sender[i]});
                seen.insert(UserId{data.receiver[i]});
            }
            users.assign(seen.begin(), seen.end());
            std::sort(users.begin(), users.end());
        }
        feat::TasteVectors tastes = feat::build_taste_vectors(
            playback, users, space, cfg.taste_window_lo(), cfg.analysis_start_ts(),
            cfg.dedup_user_tracks);
        std::vector<std::pair<UserId, UserId>> pairs;
        pairs.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            pairs.emplace_back(UserId{data.sender[i]}, UserId{data.receiver[i]});
        stats::PairedSamples samples = stats::permutation_baseline(
            pairs, [&](UserId u) { return tastes.of(u); }, cfg.permutation_seed());
        stats::KsResult ks = stats::ks_two_sample(samples.observed, samples.shuffled);
        std::vector<std::pair<std::string, double>> rows;
        rows.reserve(2 * data.size());
        for (double v : samples.observed) rows.emplace_back("share", v);
        for (double v : samples.shuffled) rows.emplace_back("random", v);
        detail::write_samples_csv(figdir / "fig3_samples.csv", cfg, rows);
        detail::write_ks_json(figdir / "fig3_ks.json", ks,
                              stats::mean_of(samples.observed),
                              stats::mean_of(samples.shuffled), "share", "random");
    }

    stats::BinSpec spec = detail::default_spec(cfg);

    // fig4a/4b: engagement probability against the taste-similarity features.
    detail::write_curve_csv(figdir / "fig4a.csv", cfg,
                            stats::binned_probability_curve(rt, engaged, spec));
    detail::write_curve_csv(figdir / "fig4b.csv", cfg,
                            stats::binned_probability_curve(sr, engaged, spec));

    // fig5: engagement probability against sender-artist engagement.
    detail::write_curve_csv(figdir / "fig5.csv", cfg,
                            stats::binned_probability_curve(sa, engaged, spec));

    // fig6a/6b: reciprocity strata.
    {
        std::vector<std::string> strata(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            strata[i] = recip[i] > 0.5 ? "reciprocal" : "non_reciprocal";
        std::vector<std::pair<std::string, double>> rows;
        for (std::size_t i = 0; i < data.size(); ++i) rows.emplace_back(strata[i], sr[i]);
        detail::write_samples_csv(figdir / "fig6a_samples.csv", cfg, rows);
        std::vector<double> a, b;
        for (std::size_t i = 0; i < data.size(); ++i)
            (strata[i] == "reciprocal" ? a : b).push_back(sr[i]);
        if (!a.empty() && !b.empty())
            detail::write_ks_json(figdir / "fig6a_ks.json", stats::ks_two_sample(a, b),
                                  stats::mean_of(a), stats::mean_of(b), "reciprocal",
                                  "non_reciprocal");
        detail::write_stratified_curve_csv(
            figdir / "fig6b.csv", cfg,
            stats::binned_probability_curve_by(rt, engaged, strata, spec));
    }

    // fig6c/6d: app-mode strata; unknown-mode events are excluded here.
    {
        std::vector<double> rt_known, sr_known;
        std::vector<bool> engaged_known;
        std::vector<std::string> strata;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.app_mode[i] != "direct" && data.app_mode[i] != "broadcast") continue;
            rt_known.push_back(rt[i]);
            sr_known.push_back(sr[i]);
            engaged_known.push_back(engaged[i]);
            strata.push_back(data.app_mode[i]);
        }
        if (!strata.empty()) {
            std::vector<std::pair<std::string, double>> rows;
            for (std::size_t i = 0; i < strata.size(); ++i)
                rows.emplace_back(strata[i], sr_known[i]);
            detail::write_samples_csv(figdir / "fig6c_samples.csv", cfg, rows);
            std::vector<double> a, b;
            for (std::size_t i = 0; i < strata.size(); ++i)
                (strata[i] == "direct" ? a : b).push_back(sr_known[i]);
            if (!a.empty() && !b.empty())
                detail::write_ks_json(figdir / "fig6c_ks.json",
                                      stats::ks_two_sample(a, b), stats::mean_of(a),
                                      stats::mean_of(b), "direct", "broadcast");
            detail::write_stratified_curve_csv(
                figdir / "fig6d.csv", cfg,
                stats::binned_probability_curve_by(rt_known, engaged_known, strata,
                                                   spec));
        }
    }

    // fig7: interaction-sum curve over integer-aligned bins.
    {
        double max_sum = *std::max_element(sum_col.begin(), sum_col.end());
        std::vector<double> edges;
        for (double e = 0.0; e <= std::min(10.0, max_sum); e += 1.0) edges.push_back(e);
        for (double e : {15.0, 20.0, 30.0, 50.0})
            if (e < max_sum) edges.push_back(e);
        edges.push_back(max_sum + 1.0);
        stats::BinSpec sum_spec = spec;
        sum_spec.kind = stats::CustomBins{edges};
        detail::write_curve_csv(figdir / "fig7.csv", cfg,
                                stats::binned_probability_curve(sum_col, engaged,
                                                                sum_spec));
    }

    // fig8a: receiver friend-count distribution.
    {
        std::map<std::size_t, std::size_t> hist;
        for (std::size_t v : data.n_friends) ++hist[v];
        io::CsvWriter csv(figdir / "fig8a.csv");
        csv.comment(stamp_line(cfg));
        csv.row({"n_friends", "count"});
        for (const auto& [v, c] : hist)
            csv.row({std::to_string(v), std::to_string(c)});
    }

    // fig8b: engagement vs engaged friends, holding the friend count fixed.
    {
        std::vector<double> values;
        std::vector<bool> flags;
        std::vector<std::string> strata;
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::size_t nf = data.n_friends[i];
            if (nf != 2 && nf != 3 && nf != 5) continue;
            values.push_back(static_cast<double>(data.n_engaged_friends[i]));
            flags.push_back(engaged[i]);
            strata.push_back(std::to_string(nf) + "_friends");
        }
        if (!values.empty()) {
            double max_v = *std::max_element(values.begin(), values.end());
            std::vector<double> edges;
            for (double e = 0.0; e <= max_v + 1.0; e += 1.0) edges.push_back(e);
            stats::BinSpec int_spec = spec;
            int_spec.kind = stats::CustomBins{edges};
            int_spec.min_count = std::max<std::size_t>(5, cfg.min_bin_count / 6);
            detail::write_stratified_curve_csv(
                figdir / "fig8b.csv", cfg,
                stats::binned_probability_curve_by(values, flags, strata, int_spec));
        }
    }

    // fig8c: engagement vs engaged friends, stratified by artist popularity
    // tercile (only receivers with at least one friend).
    {
        std::vector<double> ranks_sorted;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.n_friends[i] > 0) ranks_sorted.push_back(rank[i]);
        if (ranks_sorted.size() >= 9) {
            std::sort(ranks_sorted.begin(), ranks_sorted.end());
            double q1 = ranks_sorted[ranks_sorted.size() / 3];
            double q2 = ranks_sorted[2 * ranks_sorted.size() / 3];
            std::vector<double> values;
            std::vector<bool> flags;
            std::vector<std::string> strata;
            double max_v = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (data.n_friends[i] == 0) continue;
                values.push_back(static_cast<double>(data.n_engaged_friends[i]));
                max_v = std::max(max_v, values.back());
                flags.push_back(engaged[i]);
                // Rank 1 is most popular, so the lowest tercile of ranks is
                // the most popular stratum.
                if (rank[i] <= q1)
                    strata.emplace_back("popular");
                else if (rank[i] <= q2)
                    strata.emplace_back("mid");
                else
                    strata.emplace_back("niche");
            }
            std::vector<double> edges;
            for (double e = 0.0; e <= max_v + 1.0; e += 1.0) edges.push_back(e);
            stats::BinSpec int_spec = spec;
            int_spec.kind = stats::CustomBins{edges};
            int_spec.min_count = std::max<std::size_t>(5, cfg.min_bin_count / 6);
            detail::write_stratified_curve_csv(
                figdir / "fig8c.csv", cfg,
                stats::binned_probability_curve_by(values, flags, strata, int_spec));
        }
    }

    // Pairwise feature correlations (the redundancy discussion's figures).
    {
        io::CsvWriter csv(figdir / "correlations.csv");
        csv.comment(stamp_line(cfg));
        csv.row({"feature_a", "feature_b", "pearson_r", "p_value"});
        for (std::size_t a = 0; a < feat::kFeatureCount; ++a) {
            for (std::size_t b = a + 1; b < feat::kFeatureCount; ++b) {
                try {
                    stats::PearsonResult r = stats::pearson_correlation(
                        data.feature_columns[a], data.feature_columns[b]);
                    csv.row({names[a], names[b], io::format_double(r.r),
                             io::format_double(r.p_value)});
                } catch (const std::invalid_argument&) {
                    // Zero-variance column in this dataset; no correlation row.
                }
            }
        }
    }

    std::vector<std::string> artifacts{
        "figdata/fig2a.csv",        "figdata/fig2b.csv",
        "figdata/fig3_samples.csv", "figdata/fig3_ks.json",
        "figdata/fig4a.csv",        "figdata/fig4b.csv",
        "figdata/fig5.csv",         "figdata/fig6a_samples.csv",
        "figdata/fig6b.csv",        "figdata/fig7.csv",
        "figdata/fig8a.csv",        "figdata/correlations.csv"};
    for (const char* optional :
         {"figdata/fig6a_ks.json", "figdata/fig6c_samples.csv", "figdata/fig6c_ks.json",
          "figdata/fig6d.csv", "figdata/fig8b.csv", "figdata/fig8c.csv"})
        if (fs::exists(cfg.out_dir / optional)) artifacts.emplace_back(optional);
    write_stamp(cfg, "analyze", artifacts);
    log(LogLevel::Info, "analyze: %zu examples -> %zu figure files", data.size(),
        artifacts.size());
}

// ---------------------------------------------------------------------------
// Training, isolation, reporting

namespace detail {

inline void write_eval_csv_row(io::CsvWriter& csv, const std::string& name,
                               const forest::EvalReport& report) {
    csv.row({name, io::format_double(report.roc_auc.mean),
             io::format_double(report.roc_auc.standard_error),
             io::format_double(report.precision.mean),
             io::format_double(report.precision.standard_error),
             io::format_double(report.recall.mean),
             io::format_double(report.recall.standard_error),
             io::format_double(report.average_precision.mean),
             io::format_double(report.average_precision.standard_error)});
}

inline io::json eval_report_json(const forest::EvalReport& report) {
    auto metric = [](const forest::MetricSummary& m) {
        return io::json{{"mean", m.mean},
                        {"standard_error", m.standard_error},
                        {"folds", m.folds}};
    };
    return io::json{{"roc_auc", metric(report.roc_auc)},
                    {"precision", metric(report.precision)},
                    {"recall", metric(report.recall)},
                    {"average_precision", metric(report.average_precision)}};
}

}  // namespace detail

inline forest::EvalReport run_train(const RunConfig& cfg) {
    require_stage(cfg, "features");
    feat::LoadedDataset data = feat::load_dataset_csv(cfg.path_of(artifact::kDataset));
    if (data.size() == 0) throw DataError("train: empty dataset");

    forest::Hyperparams hp = cfg.model_hp;
    if (cfg.search_enabled) {
        forest::SearchResult search = forest::random_search_cv(
            data.feature_columns, data.labels, cfg.search_space, cfg.search_n_fits,
            cfg.cv_folds, cfg.search_seed(), cfg.threads);
        hp = search.best;
        io::json ledger = io::json::array();
        for (const forest::SearchDraw& draw : search.ledger)
            ledger.push_back(io::json{{"n_estimators", draw.hp.n_estimators},
                                      {"max_depth", draw.hp.max_depth},
                                      {"min_samples_split", draw.hp.min_samples_split},
                                      {"min_samples_leaf", draw.hp.min_samples_leaf},
                                      {"max_features_fraction",
                                       draw.hp.max_features_fraction},
                                      {"skipped", draw.skipped},
                                      {"mean_roc_auc", draw.mean_roc_auc}});
        io::write_file(cfg.path_of(artifact::kSearchLedger),
                       io::json{{"best",
                                 {{"n_estimators", hp.n_estimators},
                                  {"max_depth", hp.max_depth},
                                  {"min_samples_split", hp.min_samples_split},
                                  {"min_samples_leaf", hp.min_samples_leaf},
                                  {"max_features_fraction", hp.max_features_fraction}}},
                                {"draws", ledger}}
                           .dump(2));
    }

    forest::EvalReport cv =
        forest::cross_validate(data.feature_columns, data.labels, hp, cfg.cv_folds,
                               cfg.cv_seed(), cfg.threads);

    forest::ForestModel model =
        forest::fit_forest(data.feature_columns, data.labels, hp, cfg.threads);
    model.feature_names.assign(feat::feature_names().begin(),
                               feat::feature_names().end());
    io::json groups = io::json::object();
    for (const auto& [name, indices] : feat::group_partition()) groups[name] = indices;
    model.metadata = io::json{{"config_hash", cfg.config_hash},
                              {"seed", cfg.master_seed},
                              {"feature_groups", groups},
                              {"cv", detail::eval_report_json(cv)}};
    forest::save_model(cfg.path_of(artifact::kModel), model);

    io::write_file(cfg.path_of(artifact::kCvReportJson),
                   detail::eval_report_json(cv).dump(2));
    {
        io::CsvWriter csv(cfg.path_of(artifact::kCvReportCsv));
        csv.comment(stamp_line(cfg));
        csv.row({"model", "roc_auc", "roc_auc_se", "precision", "precision_se",
                 "recall", "recall_se", "avg_precision", "avg_precision_se"});
        detail::write_eval_csv_row(csv, "full_model", cv);
    }
    std::vector<std::string> artifacts{artifact::kModel, artifact::kCvReportJson,
                                       artifact::kCvReportCsv};
    if (cfg.search_enabled) artifacts.emplace_back(artifact::kSearchLedger);
    write_stamp(cfg, "train", artifacts);
    log(LogLevel::Info, "train: CV ROC-AUC %.4f +/- %.4f", cv.roc_auc.mean,
        cv.roc_auc.standard_error);
    return cv;
}

inline std::vector<forest::IsolationRow> run_isolate(const RunConfig& cfg) {
    require_stage(cfg, "features");
    feat::LoadedDataset data = feat::load_dataset_csv(cfg.path_of(artifact::kDataset));
    if (data.size() == 0) throw DataError("isolate: empty dataset");

    std::vector<forest::IsolationRow> rows = forest::feature_set_isolation(
        data.feature_columns, data.labels, feat::group_partition(), cfg.model_hp,
        cfg.cv_folds, cfg.cv_seed(), cfg.threads);

    {
        io::CsvWriter csv(cfg.path_of(artifact::kIsolationCsv));
        csv.comment(stamp_line(cfg));
        csv.row({"feature_set", "roc_auc", "roc_auc_se", "precision", "precision_se",
                 "recall", "recall_se", "avg_precision", "avg_precision_se"});
        for (const forest::IsolationRow& row : rows)
            detail::write_eval_csv_row(csv, row.name, row.report);
    }
    io::json report = io::json::array();
    for (const forest::IsolationRow& row : rows)
        report.push_back(io::json{{"feature_set", row.name},
                                  {"metrics", detail::eval_report_json(row.report)}});
    io::write_file(cfg.path_of(artifact::kIsolationJson), report.dump(2));
    write_stamp(cfg, "isolate", {artifact::kIsolationCsv, artifact::kIsolationJson});
    log(LogLevel::Info, "isolate: %zu rows", rows.size());
    return rows;
}

inline void run_report(const RunConfig& cfg) {
    require_stage(cfg, "train");
    forest::ForestModel model = forest::load_model(cfg.path_of(artifact::kModel));
    std::vector<double> importance = forest::mdi_importance(model);

    std::vector<std::size_t> order(importance.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return importance[a] > importance[b];
    });

    fs::create_directories(cfg.out_dir / "figdata");
    io::CsvWriter csv(cfg.path_of(artifact::kMdiTable));
    csv.comment(stamp_line(cfg));
    csv.row({"feature", "feature_set", "mdi_importance"});
    for (std::size_t i : order)
        csv.row({std::string(feat::feature_names()[i]),
                 std::string(feat::feature_set_name(feat::feature_groups()[i])),
                 io::format_double(importance[i])});
    write_stamp(cfg, "report", {artifact::kMdiTable});
    log(LogLevel::Info, "report: MDI table over %zu features", importance.size());
}

// ---------------------------------------------------------------------------
// Command dispatch

inline int run_command(const std::string& command, const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    if (command == "generate") {
        run_generate(cfg);
    } else if (command == "ingest") {
        run_ingest(cfg);
    } else if (command == "embed") {
        run_embed(cfg);
    } else if (command == "features") {
        run_features(cfg);
    } else if (command == "analyze") {
        run_analyze(cfg);
    } else if (command == "train") {
        run_train(cfg);
    } else if (command == "isolate") {
        run_isolate(cfg);
    } else if (command == "report") {
        run_report(cfg);
    } else {
        throw ConfigError("unknown command: " + command);
    }
    return 0;
}

}  // namespace tunecast::pipeline
