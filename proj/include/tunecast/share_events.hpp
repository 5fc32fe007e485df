// Link-share contact events: schema, direct/broadcast app-mode
// classification, the discovery filter, and popularity-stratified sampling.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/engagement.hpp"
#include "tunecast/io.hpp"
#include "tunecast/rng.hpp"

namespace tunecast::share {

struct ShareEvent {
    std::uint64_t event_id = 0;
    UserId sender;
    UserId receiver;
    TrackId track_id = 0;
    AlbumId album_id = 0;
    ArtistId artist_id = 0;
    std::uint32_t artist_popularity_rank = 1;  // 1 = most popular, at share time
    std::int64_t album_release_age_s = 0;      // album release -> share
    std::string app_type;
    Timestamp share_ts = 0;
    std::optional<Timestamp> open_ts;
    bool playback_30s = false;

    void validate() const {
        if (sender == receiver) throw DataError("share event with sender == receiver");
        if (artist_popularity_rank == 0)
            throw DataError("popularity rank must be positive");
        if (open_ts.has_value() && *open_ts < share_ts)
            throw DataError("open timestamp precedes share timestamp");
        if (playback_30s && !open_ts.has_value())
            throw DataError("playback without an open timestamp");
    }
};

enum class AppMode { Direct, Broadcast, Unknown };

inline std::string_view app_mode_name(AppMode mode) {
    switch (mode) {
        case AppMode::Direct: return "direct";
        case AppMode::Broadcast: return "broadcast";
        case AppMode::Unknown: return "unknown";
    }
    throw std::invalid_argument("bad app mode");
}

/// Extra app-type aliases, canonical-token -> canonical-token, loaded from
/// config so new platform spellings need no code change.
using AppAliasMap = std::unordered_map<std::string, std::string>;

/// Lower-snake-case canonical form: letters lowered, runs of
/// non-alphanumerics collapsed to single underscores.
inline std::string canonical_app_token(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

/// One-to-one messaging platforms vs one-to-many posting destinations.
/// Everything else is Unknown.
inline AppMode classify_app_mode(std::string_view app_type,
                                 const AppAliasMap& aliases = {}) {
    static const std::unordered_map<std::string, AppMode> kModes = {
        {"whatsapp", AppMode::Direct},
        {"facebook_messenger", AppMode::Direct},
        {"sms", AppMode::Direct},
        {"line", AppMode::Direct},
        {"instagram_direct", AppMode::Direct},
        {"samsung_messenger", AppMode::Direct},
        {"instagram_stories", AppMode::Broadcast},
        {"facebook_feed", AppMode::Broadcast},
        {"facebook_stories", AppMode::Broadcast},
        {"x_twitter", AppMode::Broadcast},
    };
    std::string token = canonical_app_token(app_type);
    if (auto alias = aliases.find(token); alias != aliases.end()) token = alias->second;
    auto it = kModes.find(token);
    return it == kModes.end() ? AppMode::Unknown : it->second;
}

/// Keeps exactly the "discovery" events: opened, played for at least 30
/// seconds, and the receiver had never played the artist before the share.
inline std::vector<ShareEvent> filter_discovery_shares(
    const std::vector<ShareEvent>& events, const engage::PlaybackLog& playback) {
    std::vector<ShareEvent> kept;
    kept.reserve(events.size());
    for (const ShareEvent& ev : events) {
        if (!ev.open_ts.has_value() || !ev.playback_30s) continue;
        if (playback.has_artist_playback_before(ev.receiver, ev.artist_id, ev.share_ts))
            continue;
        kept.push_back(ev);
    }
    return kept;
}

/// Per popularity-rank bin, a uniform without-replacement sample of at most
/// cap_per_bin events. Events whose rank falls outside the edges are dropped.
/// Output preserves the input's relative order; content is untouched.
inline std::vector<ShareEvent> stratified_sample_by_artist(
    const std::vector<ShareEvent>& events, const std::vector<std::uint32_t>& bin_edges,
    std::size_t cap_per_bin, std::uint64_t seed) {
    if (bin_edges.size() < 2)
        throw ConfigError("stratified sampling needs at least two bin edges");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (bin_edges[i - 1] >= bin_edges[i])
            throw ConfigError("popularity bin edges must be strictly increasing");

    auto bin_of = [&](std::uint32_t rank) -> std::ptrdiff_t {
        if (rank < bin_edges.front() || rank >= bin_edges.back()) return -1;
        auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), rank);
        return (it - bin_edges.begin()) - 1;
    };

    std::vector<std::vector<std::size_t>> per_bin(bin_edges.size() - 1);
    for (std::size_t i = 0; i < events.size(); ++i) {
        std::ptrdiff_t b = bin_of(events[i].artist_popularity_rank);
        if (b >= 0) per_bin[static_cast<std::size_t>(b)].push_back(i);
    }

    std::vector<char> selected(events.size(), 0);
    for (std::size_t b = 0; b < per_bin.size(); ++b) {
        auto& members = per_bin[b];
        std::size_t take = std::min(cap_per_bin, members.size());
        if (take == members.size()) {
            for (std::size_t idx : members) selected[idx] = 1;
            continue;
        }
        rng::Engine eng = rng::make_engine(seed, 0x73616d70 + b);
        for (std::size_t pick :
             rng::sample_without_replacement(eng, members.size(), take))
            selected[members[pick]] = 1;
    }

    std::vector<ShareEvent> out;
    for (std::size_t i = 0; i < events.size(); ++i)
        if (selected[i] != 0) out.push_back(events[i]);
    return out;
}

/// Decile edges over the observed popularity ranks; used when the config
/// does not pin explicit edges.
inline std::vector<std::uint32_t> default_rank_deciles(
    const std::vector<ShareEvent>& events) {
    std::vector<std::uint32_t> ranks;
    ranks.reserve(events.size());
    for (const ShareEvent& ev : events) ranks.push_back(ev.artist_popularity_rank);
    std::sort(ranks.begin(), ranks.end());
    if (ranks.empty()) return {1, 2};
    std::vector<std::uint32_t> edges;
    edges.push_back(ranks.front());
    for (std::size_t i = 1; i < 10; ++i) {
        std::uint32_t e = ranks[i * ranks.size() / 10];
        if (e > edges.back()) edges.push_back(e);
    }
    std::uint32_t top = ranks.back() + 1;
    if (top > edges.back()) edges.push_back(top);
    if (edges.size() < 2) edges.push_back(edges.back() + 1);
    return edges;
}

// ---------------------------------------------------------------------------
// JSONL schema (field names match the type)

inline io::json share_to_json(const ShareEvent& ev) {
    io::json j{{"event_id", ev.event_id},
               {"sender", ev.sender.value},
               {"receiver", ev.receiver.value},
               {"track_id", ev.track_id},
               {"album_id", ev.album_id},
               {"artist_id", ev.artist_id},
               {"artist_popularity_rank", ev.artist_popularity_rank},
               {"album_release_age_s", ev.album_release_age_s},
               {"app_type", ev.app_type},
               {"share_ts", ev.share_ts},
               {"playback_30s", ev.playback_30s}};
    if (ev.open_ts.has_value())
        j["open_ts"] = *ev.open_ts;
    else
        j["open_ts"] = nullptr;
    return j;
}

inline ShareEvent share_from_json(const io::json& j) {
    ShareEvent ev;
    ev.event_id = j.at("event_id").get<std::uint64_t>();
    ev.sender = UserId{j.at("sender").get<std::uint64_t>()};
    ev.receiver = UserId{j.at("receiver").get<std::uint64_t>()};
    ev.track_id = j.at("track_id").get<TrackId>();
    ev.album_id = j.at("album_id").get<AlbumId>();
    ev.artist_id = j.at("artist_id").get<ArtistId>();
    ev.artist_popularity_rank = j.at("artist_popularity_rank").get<std::uint32_t>();
    ev.album_release_age_s = j.at("album_release_age_s").get<std::int64_t>();
    ev.app_type = j.at("app_type").get<std::string>();
    ev.share_ts = j.at("share_ts").get<Timestamp>();
    if (j.contains("open_ts") && !j.at("open_ts").is_null())
        ev.open_ts = j.at("open_ts").get<Timestamp>();
    ev.playback_30s = j.at("playback_30s").get<bool>();
    ev.validate();
    return ev;
}

inline std::vector<ShareEvent> load_shares_jsonl(const std::filesystem::path& path) {
    io::JsonlReader in(path);
    std::vector<ShareEvent> events;
    io::json record;
    while (in.next(record)) {
        try {
            events.push_back(share_from_json(record));
        } catch (const io::json::exception& e) {
            throw DataError(in.path() + ":" + std::to_string(in.line()) +
                            ": bad share event: " + e.what());
        }
    }
    return events;
}

inline void save_shares_jsonl(const std::filesystem::path& path,
                              const std::vector<ShareEvent>& events) {
    io::JsonlWriter out(path);
    for (const ShareEvent& ev : events) out.write(share_to_json(ev));
}

}  // namespace tunecast::share
