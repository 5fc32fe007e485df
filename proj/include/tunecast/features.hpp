// Table-style feature extraction for share events: every feature is computed
// from data strictly before the share timestamp (platform-usage fields are
// anchored at the open but clamped at share time, so truncating the stores at
// share time reproduces the identical vector). The engagement label uses the
// seven days from the open day and nothing else.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/embeddings.hpp"
#include "tunecast/engagement.hpp"
#include "tunecast/io.hpp"
#include "tunecast/multiplex_graph.hpp"
#include "tunecast/share_events.hpp"

namespace tunecast::feat {

enum class FeatureSetId { ST, SN, SC, TS, TC, SA, PU };

inline std::string_view feature_set_name(FeatureSetId id) {
    switch (id) {
        case FeatureSetId::ST: return "ST";
        case FeatureSetId::SN: return "SN";
        case FeatureSetId::SC: return "SC";
        case FeatureSetId::TS: return "TS";
        case FeatureSetId::TC: return "TC";
        case FeatureSetId::SA: return "SA";
        case FeatureSetId::PU: return "PU";
    }
    throw std::invalid_argument("bad feature set");
}

/// Sentinel stored in fraction_engaged_friends when the receiver has no
/// friends; the availability flag column lets trees split on presence.
constexpr double kMissingSentinel = -1.0;

constexpr std::size_t kFeatureCount = 16;

/// Model column order. The availability flag travels with its feature in SC.
inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names{
        "sum_social_interactions",
        "direct_link_share",
        "reciprocal_link_sharing",
        "receiver_share_in_degree",
        "receiver_share_out_degree",
        "sender_share_out_degree",
        "fraction_engaged_friends",
        "fraction_engaged_friends_available",
        "sr_cosine",
        "rt_cosine",
        "artist_popularity_rank",
        "release_age_s",
        "sender_artist_engagement_7d",
        "is_subscriber",
        "receiver_streaming_hours_7d",
        "receiver_days_on_platform"};
    return names;
}

inline const std::array<FeatureSetId, kFeatureCount>& feature_groups() {
    static const std::array<FeatureSetId, kFeatureCount> groups{
        FeatureSetId::ST, FeatureSetId::ST, FeatureSetId::ST,
        FeatureSetId::SN, FeatureSetId::SN, FeatureSetId::SN,
        FeatureSetId::SC, FeatureSetId::SC,
        FeatureSetId::TS, FeatureSetId::TS,
        FeatureSetId::TC, FeatureSetId::TC,
        FeatureSetId::SA,
        FeatureSetId::PU, FeatureSetId::PU, FeatureSetId::PU};
    return groups;
}

/// Named group -> feature indices, in fixed group order (partition by
/// construction).
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> group_partition() {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    for (FeatureSetId id : {FeatureSetId::ST, FeatureSetId::SN, FeatureSetId::SC,
                            FeatureSetId::TS, FeatureSetId::TC, FeatureSetId::SA,
                            FeatureSetId::PU}) {
        std::vector<std::size_t> indices;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            if (feature_groups()[f] == id) indices.push_back(f);
        out.emplace_back(std::string(feature_set_name(id)), std::move(indices));
    }
    return out;
}

struct FeatureVector {
    std::uint64_t sum_social_interactions = 0;
    bool direct_link_share = false;
    bool reciprocal_link_sharing = false;
    std::uint64_t receiver_share_in_degree = 0;
    std::uint64_t receiver_share_out_degree = 0;
    std::uint64_t sender_share_out_degree = 0;
    double fraction_engaged_friends = kMissingSentinel;  // in [0,1] when available
    bool fraction_engaged_friends_available = false;
    double sr_cosine = 0.0;
    double rt_cosine = 0.0;
    std::uint32_t artist_popularity_rank = 1;
    std::int64_t release_age_s = 0;
    double sender_artist_engagement_7d = 0.0;
    bool is_subscriber = false;
    double receiver_streaming_hours_7d = 0.0;
    std::int64_t receiver_days_on_platform = 0;

    std::array<double, kFeatureCount> to_row() const {
        return {static_cast<double>(sum_social_interactions),
                direct_link_share ? 1.0 : 0.0,
                reciprocal_link_sharing ? 1.0 : 0.0,
                static_cast<double>(receiver_share_in_degree),
                static_cast<double>(receiver_share_out_degree),
                static_cast<double>(sender_share_out_degree),
                fraction_engaged_friends,
                fraction_engaged_friends_available ? 1.0 : 0.0,
                sr_cosine,
                rt_cosine,
                static_cast<double>(artist_popularity_rank),
                static_cast<double>(release_age_s),
                sender_artist_engagement_7d,
                is_subscriber ? 1.0 : 0.0,
                receiver_streaming_hours_7d,
                static_cast<double>(receiver_days_on_platform)};
    }
};

// ---------------------------------------------------------------------------
// Account log

struct AccountRecord {
    UserId user;
    Timestamp registered_ts = 0;
    bool is_subscriber = false;
};

class AccountLog {
  public:
    void add(const AccountRecord& rec) { records_[rec.user] = rec; }

    const AccountRecord& require(UserId user) const {
        auto it = records_.find(user);
        if (it == records_.end())
            throw DataError("missing account data for user " + std::to_string(user.value));
        return it->second;
    }

    std::size_t size() const { return records_.size(); }

    static AccountLog load_jsonl(const std::filesystem::path& path) {
        AccountLog log;
        io::JsonlReader in(path);
        io::json record;
        while (in.next(record)) {
            AccountRecord rec;
            rec.user = UserId{record.at("user").get<std::uint64_t>()};
            rec.registered_ts = record.at("registered_ts").get<Timestamp>();
            rec.is_subscriber = record.at("is_subscriber").get<bool>();
            log.add(rec);
        }
        return log;
    }

    void save_jsonl(const std::filesystem::path& path) const {
        std::vector<const AccountRecord*> rows;
        rows.reserve(records_.size());
        for (const auto& [user, rec] : records_) rows.push_back(&rec);
        std::sort(rows.begin(), rows.end(),
                  [](const AccountRecord* a, const AccountRecord* b) {
                      return a->user < b->user;
                  });
        io::JsonlWriter out(path);
        for (const AccountRecord* rec : rows)
            out.write(io::json{{"user", rec->user.value},
                               {"registered_ts", rec->registered_ts},
                               {"is_subscriber", rec->is_subscriber}});
    }

  private:
    std::unordered_map<UserId, AccountRecord> records_;
};

// ---------------------------------------------------------------------------
// Taste vector table

class TasteVectors {
  public:
    void set(UserId user, std::vector<float> vec) { table_[user] = std::move(vec); }

    bool has(UserId user) const { return table_.contains(user); }

    std::span<const float> of(UserId user) const {
        auto it = table_.find(user);
        if (it == table_.end())
            throw ColdUserError("no taste vector for user " + std::to_string(user.value));
        return it->second;
    }

    std::size_t size() const { return table_.size(); }

  private:
    std::unordered_map<UserId, std::vector<float>> table_;
};

/// Taste vectors for every user with qualifying listens in the window;
/// cold users are simply absent.
inline TasteVectors build_taste_vectors(const engage::PlaybackLog& playback,
                                        const std::vector<UserId>& users,
                                        const embed::EmbeddingSpace& space,
                                        Timestamp window_lo, Timestamp window_hi,
                                        bool dedup = false) {
    TasteVectors out;
    std::vector<std::pair<TrackId, Timestamp>> listens;
    for (UserId user : users) {
        listens.clear();
        playback.for_each_listen_in(user, window_lo, window_hi,
                                    [&](TrackId track, Timestamp ts) {
                                        listens.emplace_back(track, ts);
                                    });
        if (listens.empty()) continue;
        try {
            out.set(user,
                    embed::user_vector(user, listens, space, window_lo, window_hi, dedup)
                        .vector);
        } catch (const ColdUserError&) {
            // No known tracks in the window; stays cold.
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extraction

/// A recoverable per-event failure; build_dataset counts these by reason.
class DropError : public DataError {
  public:
    DropError(std::string reason, const std::string& what)
        : DataError(what), reason_(std::move(reason)) {}
    const std::string& reason() const { return reason_; }

  private:
    std::string reason_;
};

struct ExtractionContext {
    const net::MultiplexNetwork* network = nullptr;
    const engage::PlaybackLog* playback = nullptr;
    const AccountLog* accounts = nullptr;
    const embed::EmbeddingSpace* space = nullptr;
    const TasteVectors* tastes = nullptr;
    /// Fixed t0 for the engaged-friend condition: the 180 days ending at the
    /// analysis-period start, for every event.
    DayIndex analysis_start_day = 0;
    share::AppAliasMap app_aliases;
};

struct ExtractionDetail {
    std::size_t n_friends = 0;
    std::size_t n_engaged_friends = 0;
    share::AppMode mode = share::AppMode::Unknown;
};

inline FeatureVector extract_features(const share::ShareEvent& ev,
                                      const ExtractionContext& ctx,
                                      ExtractionDetail* detail = nullptr) {
    if (!ev.open_ts.has_value())
        throw DropError("unopened", "event lacks an open timestamp");
    const UserId sender = ev.sender;
    const UserId receiver = ev.receiver;
    const Timestamp t = ev.share_ts;
    const net::MultiplexNetwork& net = *ctx.network;
    const engage::PlaybackLog& playback = *ctx.playback;

    FeatureVector out;
    out.sum_social_interactions =
        net.layer_weight(net::LayerKind::SocialListening, sender, receiver, t) +
        net.layer_weight(net::LayerKind::CollabPlaylist, sender, receiver, t) +
        net.layer_weight(net::LayerKind::LinkShare, sender, receiver, t) +
        net.layer_weight(net::LayerKind::LinkShare, receiver, sender, t);

    share::AppMode mode = share::classify_app_mode(ev.app_type, ctx.app_aliases);
    out.direct_link_share = mode == share::AppMode::Direct;
    out.reciprocal_link_sharing =
        net.layer_weight(net::LayerKind::LinkShare, receiver, sender, t) > 0;

    out.receiver_share_in_degree = net.link_in_degree(receiver, t);
    out.receiver_share_out_degree = net.link_out_degree(receiver, t);
    out.sender_share_out_degree = net.link_out_degree(sender, t);

    std::vector<UserId> friends = net.friends(receiver, t);
    if (!friends.empty()) {
        std::size_t engaged = 0;
        for (UserId u : friends) {
            engage::EngagementWindowSum e180 = playback.aggregate(
                u, ev.artist_id, ctx.analysis_start_day, -engage::kFriendWindowDays);
            if (engage::is_engaged_friend(e180)) ++engaged;
        }
        out.fraction_engaged_friends =
            static_cast<double>(engaged) / static_cast<double>(friends.size());
        out.fraction_engaged_friends_available = true;
        if (detail != nullptr) {
            detail->n_friends = friends.size();
            detail->n_engaged_friends = engaged;
        }
    }

    if (!ctx.tastes->has(receiver))
        throw DropError("cold_receiver",
                        "receiver has no taste vector: " + std::to_string(receiver.value));
    if (!ctx.tastes->has(sender))
        throw DropError("cold_sender",
                        "sender has no taste vector: " + std::to_string(sender.value));
    if (!ctx.space->has(ev.track_id))
        throw DropError("unknown_track",
                        "shared track missing from embedding vocabulary: " +
                            std::to_string(ev.track_id));
    out.sr_cosine = embed::cosine_similarity(ctx.tastes->of(sender), ctx.tastes->of(receiver));
    out.rt_cosine =
        embed::cosine_similarity(ctx.tastes->of(receiver), ctx.space->vector_of(ev.track_id));

    out.artist_popularity_rank = ev.artist_popularity_rank;
    out.release_age_s = ev.album_release_age_s;

    out.sender_artist_engagement_7d =
        playback.aggregate(sender, ev.artist_id, day_of(t), -engage::kReceiverWindowDays)
            .e_sum;

    const AccountRecord& account = ctx.accounts->require(receiver);
    out.is_subscriber = account.is_subscriber;
    // Previous 7 days to the open, clamped at share time so no post-share
    // data can enter a feature.
    Timestamp window_lo = *ev.open_ts - 7 * kSecondsPerDay;
    out.receiver_streaming_hours_7d =
        playback.streaming_seconds_between(receiver, window_lo, ev.share_ts) / 3600.0;
    if (account.registered_ts > *ev.open_ts)
        throw DataError("registration after share open for user " +
                        std::to_string(receiver.value));
    out.receiver_days_on_platform = day_of(*ev.open_ts) - day_of(account.registered_ts);

    if (detail != nullptr) detail->mode = mode;
    return out;
}

// ---------------------------------------------------------------------------
// Labeled dataset

struct LabeledExample {
    share::ShareEvent event;
    FeatureVector features;
    bool label = false;
    double e7 = 0.0;  // the receiver's 7-day post-open engagement
    ExtractionDetail detail;
};

struct ExtractionReport {
    std::size_t input_events = 0;
    std::size_t extracted = 0;
    std::map<std::string, std::size_t> drops;
    std::size_t positives = 0;

    double positive_rate() const {
        return extracted == 0 ? 0.0
                              : static_cast<double>(positives) /
                                    static_cast<double>(extracted);
    }

    io::json to_json() const {
        return io::json{{"input_events", input_events},
                        {"extracted", extracted},
                        {"drops", drops},
                        {"positives", positives},
                        {"positive_rate", positive_rate()}};
    }
};

struct Dataset {
    std::vector<LabeledExample> examples;
    ExtractionReport report;
};

/// One labeled example per surviving event; label is the engaged-receiver
/// test over the seven days from the open day.
inline Dataset build_dataset(const std::vector<share::ShareEvent>& events,
                             const ExtractionContext& ctx) {
    Dataset out;
    out.report.input_events = events.size();
    out.examples.reserve(events.size());
    for (const share::ShareEvent& ev : events) {
        LabeledExample ex;
        ex.event = ev;
        try {
            ex.features = extract_features(ev, ctx, &ex.detail);
        } catch (const DropError& e) {
            ++out.report.drops[e.reason()];
            continue;
        }
        DayIndex open_day = day_of(*ev.open_ts);
        engage::EngagementWindowSum e7 = ctx.playback->aggregate(
            ev.receiver, ev.artist_id, open_day, engage::kReceiverWindowDays);
        ex.e7 = e7.e_sum;
        ex.label = engage::is_engaged_receiver(e7);
        if (ex.label) ++out.report.positives;
        ++out.report.extracted;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV emission and the sidecar schema

inline io::json dataset_schema_json() {
    io::json feature_cols = io::json::array();
    io::json groups = io::json::object();
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        feature_cols.push_back(feature_names()[f]);
        groups[std::string(feature_set_name(feature_groups()[f]))].push_back(
            feature_names()[f]);
    }
    io::json columns = io::json::array();
    columns.push_back("event_id");
    for (std::size_t f = 0; f < kFeatureCount; ++f) columns.push_back(feature_names()[f]);
    for (const char* extra : {"label", "e7", "n_friends", "n_engaged_friends",
                              "app_mode", "sender", "receiver", "artist_id",
                              "share_ts", "open_day"})
        columns.push_back(extra);
    return io::json{
        {"columns", columns},
        {"feature_columns", feature_cols},
        {"groups", groups},
        {"label_column", "label"},
        {"sentinels",
         {{"fraction_engaged_friends",
           {{"missing_value", kMissingSentinel},
            {"availability_flag", "fraction_engaged_friends_available"}}}}}};
}

inline void save_dataset_csv(const std::filesystem::path& path, const Dataset& dataset,
                             const std::string& stamp = {}) {
    io::CsvWriter csv(path);
    if (!stamp.empty()) csv.comment(stamp);
    std::vector<std::string> header{"event_id"};
    for (const std::string& name : feature_names()) header.push_back(name);
    for (const char* extra : {"label", "e7", "n_friends", "n_engaged_friends",
                              "app_mode", "sender", "receiver", "artist_id",
                              "share_ts", "open_day"})
        header.emplace_back(extra);
    csv.row(header);

    std::vector<std::string> cells;
    for (const LabeledExample& ex : dataset.examples) {
        cells.clear();
        cells.push_back(std::to_string(ex.event.event_id));
        std::array<double, kFeatureCount> row = ex.features.to_row();
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            cells.push_back(io::format_double(row[f]));
        cells.push_back(ex.label ? "1" : "0");
        cells.push_back(io::format_double(ex.e7));
        cells.push_back(std::to_string(ex.detail.n_friends));
        cells.push_back(std::to_string(ex.detail.n_engaged_friends));
        cells.emplace_back(share::app_mode_name(ex.detail.mode));
        cells.push_back(std::to_string(ex.event.sender.value));
        cells.push_back(std::to_string(ex.event.receiver.value));
        cells.push_back(std::to_string(ex.event.artist_id));
        cells.push_back(std::to_string(ex.event.share_ts));
        cells.push_back(std::to_string(day_of(*ex.event.open_ts)));
        csv.row(cells);
    }
}

/// Columnar view used by the training, isolation and analysis stages.
struct LoadedDataset {
    std::vector<std::vector<double>> feature_columns;  // kFeatureCount columns
    std::vector<std::uint8_t> labels;
    std::vector<std::uint64_t> event_ids;
    std::vector<double> e7;
    std::vector<std::string> app_mode;
    std::vector<std::size_t> n_friends;
    std::vector<std::size_t> n_engaged_friends;
    std::vector<std::uint64_t> sender;
    std::vector<std::uint64_t> receiver;
    std::vector<std::uint64_t> artist_id;

    std::size_t size() const { return labels.size(); }
};

inline LoadedDataset load_dataset_csv(const std::filesystem::path& path) {
    io::CsvReader csv(path);
    std::vector<std::string> cells;
    if (!csv.next(cells)) throw DataError("empty dataset: " + path.string());
    // Validate the header against the documented column order.
    std::vector<std::string> expected{"event_id"};
    for (const std::string& name : feature_names()) expected.push_back(name);
    for (const char* extra : {"label", "e7", "n_friends", "n_engaged_friends",
                              "app_mode", "sender", "receiver", "artist_id",
                              "share_ts", "open_day"})
        expected.emplace_back(extra);
    if (cells != expected) throw DataError("unexpected dataset header: " + path.string());

    LoadedDataset out;
    out.feature_columns.assign(kFeatureCount, {});
    while (csv.next(cells)) {
        if (cells.size() != expected.size())
            throw DataError("short dataset row in " + path.string());
        std::size_t c = 0;
        out.event_ids.push_back(static_cast<std::uint64_t>(io::parse_int(cells[c++])));
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            out.feature_columns[f].push_back(io::parse_double(cells[c++]));
        out.labels.push_back(cells[c++] == "1" ? 1 : 0);
        out.e7.push_back(io::parse_double(cells[c++]));
        out.n_friends.push_back(static_cast<std::size_t>(io::parse_int(cells[c++])));
        out.n_engaged_friends.push_back(
            static_cast<std::size_t>(io::parse_int(cells[c++])));
        out.app_mode.push_back(cells[c++]);
        out.sender.push_back(static_cast<std::uint64_t>(io::parse_int(cells[c++])));
        out.receiver.push_back(static_cast<std::uint64_t>(io::parse_int(cells[c++])));
        out.artist_id.push_back(static_cast<std::uint64_t>(io::parse_int(cells[c++])));
    }
    return out;
}

}  // namespace tunecast::feat
