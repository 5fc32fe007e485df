// Synthetic world with planted ground truth: genre-clustered latent tastes, a
// homophilous multiplex network, playlists, listening histories, and share
// events whose engagement outcome follows a known logistic model.
//
// Consistency contract: the playback appended for a realized label is the
// label's witness, so running the real extraction + labeling pipeline on the
// emitted files recovers the realized labels exactly. To keep every event's
// planted probability valid under the final log, each (user, artist) pair is
// consumed at most once across all roles (sender, receiver, engaged friend).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/embeddings.hpp"
#include "tunecast/engagement.hpp"
#include "tunecast/features.hpp"
#include "tunecast/io.hpp"
#include "tunecast/multiplex_graph.hpp"
#include "tunecast/rng.hpp"
#include "tunecast/share_events.hpp"

namespace tunecast::synth {

/// Planted coefficients over transformed Table-style features. Streaming
/// hours stays at zero: post-open playback of one event lands in the
/// streaming-hours window of the receiver's later events, so a nonzero
/// coefficient would make earlier labels leak into later features.
struct OutcomeCoefficients {
    double sum_interactions = 0.05;  // on min(sum, saturation_cap)
    double saturation_cap = 5.0;
    double direct = 0.15;
    double reciprocal = 0.10;
    double receiver_in_degree = 0.0;   // on log1p
    double receiver_out_degree = 0.0;  // on log1p
    double sender_out_degree = 0.05;   // on log1p
    double fraction_engaged_friends = 0.4;  // on max(value, 0)
    double sr_cosine = 0.3;
    double rt_cosine = 1.2;
    double popularity = 0.3;    // on 1 - log(rank)/log(max_rank + 1)
    double release_age = -0.05;  // on log1p(age in days)
    double sender_engagement = 0.22;
    double is_subscriber = 0.15;
    double streaming_hours = 0.0;
    double days_on_platform = 0.04;  // on log1p

    io::json to_json() const {
        return io::json{{"sum_interactions", sum_interactions},
                        {"saturation_cap", saturation_cap},
                        {"direct", direct},
                        {"reciprocal", reciprocal},
                        {"receiver_in_degree", receiver_in_degree},
                        {"receiver_out_degree", receiver_out_degree},
                        {"sender_out_degree", sender_out_degree},
                        {"fraction_engaged_friends", fraction_engaged_friends},
                        {"sr_cosine", sr_cosine},
                        {"rt_cosine", rt_cosine},
                        {"popularity", popularity},
                        {"release_age", release_age},
                        {"sender_engagement", sender_engagement},
                        {"is_subscriber", is_subscriber},
                        {"streaming_hours", streaming_hours},
                        {"days_on_platform", days_on_platform}};
    }

    static OutcomeCoefficients from_json(const io::json& j) {
        OutcomeCoefficients c;
        c.sum_interactions = j.value("sum_interactions", c.sum_interactions);
        c.saturation_cap = j.value("saturation_cap", c.saturation_cap);
        c.direct = j.value("direct", c.direct);
        c.reciprocal = j.value("reciprocal", c.reciprocal);
        c.receiver_in_degree = j.value("receiver_in_degree", c.receiver_in_degree);
        c.receiver_out_degree = j.value("receiver_out_degree", c.receiver_out_degree);
        c.sender_out_degree = j.value("sender_out_degree", c.sender_out_degree);
        c.fraction_engaged_friends =
            j.value("fraction_engaged_friends", c.fraction_engaged_friends);
        c.sr_cosine = j.value("sr_cosine", c.sr_cosine);
        c.rt_cosine = j.value("rt_cosine", c.rt_cosine);
        c.popularity = j.value("popularity", c.popularity);
        c.release_age = j.value("release_age", c.release_age);
        c.sender_engagement = j.value("sender_engagement", c.sender_engagement);
        c.is_subscriber = j.value("is_subscriber", c.is_subscriber);
        c.streaming_hours = j.value("streaming_hours", c.streaming_hours);
        c.days_on_platform = j.value("days_on_platform", c.days_on_platform);
        return c;
    }
};

struct SynthConfig {
    std::size_t n_users = 2000;
    std::size_t n_artists = 100;
    std::size_t n_tracks_per_artist = 8;
    std::size_t n_genres = 6;
    double homophily = 0.8;  // h in [0,1]
    double mean_degree = 3.0;
    double listening_rate = 1.2;
    double playlist_rate = 0.8;
    double hist_share_rate = 1.2;
    double reciprocal_edge_prob = 0.35;
    double weak_tie_rate = 0.2;  // extra one-way shares per user off the graph
    /// When set, every social-graph edge gets a fixed direction and all link
    /// shares on it (historical and in-period) flow that way, so reciprocal
    /// share pairs never form. This is the lever for worlds where
    /// friendship, and with it the cohesion feature, stays rare.
    bool orient_edges = false;
    std::size_t share_events = 20000;  // surviving discovery events
    double broadcast_fraction = 0.06;
    double unknown_app_fraction = 0.04;
    double unopened_fraction = 0.08;
    double no_playback_fraction = 0.05;
    double p_friend_engaged = 0.05;
    double friend_light_listener_prob = 0.15;
    double sender_cold_fraction = 0.35;
    std::size_t playlists = 1500;
    std::size_t playlist_length = 20;
    std::size_t listens_per_user = 120;
    double zipf_exponent = 1.0;
    DayIndex analysis_start_day = 19448;
    std::size_t analysis_days = 91;
    std::size_t history_days = 240;
    std::size_t taste_window_days = 60;
    std::size_t embedding_dim = 32;
    std::size_t embedding_epochs = 5;
    std::size_t embedding_window = 5;
    std::size_t embedding_negatives = 5;
    double embedding_learning_rate = 0.025;
    /// Seed for the internal embedding training; 0 derives it from `seed`.
    /// The pipeline pins this so its embed stage reproduces the exact space
    /// the generator used when planting outcomes.
    std::uint64_t embedding_seed = 0;
    OutcomeCoefficients beta;
    double target_positive_rate = 0.47;
    std::uint64_t seed = 1;

    std::uint64_t resolved_embedding_seed() const {
        return embedding_seed != 0 ? embedding_seed : rng::split_seed(seed, 0x20);
    }

    void validate() const {
        if (n_users < 2 || n_artists < 1 || n_tracks_per_artist < 1 || n_genres < 1 ||
            share_events < 1)
            throw ConfigError("synth: counts must be positive");
        if (homophily < 0.0 || homophily > 1.0)
            throw ConfigError("synth: homophily must be in [0,1]");
        if (mean_degree <= 0.0 || listening_rate <= 0.0 || playlist_rate <= 0.0 ||
            hist_share_rate <= 0.0)
            throw ConfigError("synth: rates must be positive");
        if (target_positive_rate <= 0.0 || target_positive_rate >= 1.0)
            throw ConfigError("synth: target positive rate must be in (0,1)");
        // Every event consumes a fresh (sender, artist) and (receiver, artist)
        // pair; demand beyond roughly a third of the pair budget stalls.
        if (3 * share_events > n_users * n_artists)
            throw ConfigError("synth: share_events exceeds the distinct-pair budget");
        if (analysis_days < 8)
            throw ConfigError("synth: analysis period must cover the label window");
    }

    io::json to_json() const;
    static SynthConfig from_json(const io::json& j);
};

struct EventTruth {
    std::uint64_t event_id = 0;
    double eta = 0.0;  // linear predictor without intercept
    double p_star = 0.0;
    bool label = false;
};

struct GroundTruth {
    std::vector<EventTruth> events;  // surviving events only, event_id order
    double intercept = 0.0;
    io::json meta;
};

struct ArtistInfo {
    ArtistId id = 0;
    int genre = 0;
    std::uint32_t popularity_rank = 1;
    std::vector<TrackId> tracks;
    std::vector<AlbumId> albums;            // tracks partitioned across albums
    std::vector<Timestamp> album_release;   // per album
    std::vector<std::size_t> track_album;   // track index -> album index
};

struct World {
    SynthConfig cfg;
    std::vector<int> user_genre;
    std::vector<std::vector<float>> latent_taste;  // ground truth, sidecar only
    std::vector<std::vector<std::uint32_t>> social_edges;  // adjacency lists (S)
    std::vector<std::vector<std::uint32_t>> oriented_out;  // only with orient_edges
    std::vector<ArtistInfo> artists;
    std::vector<net::InteractionEvent> history;  // pre-period interactions
    embed::PlaylistCorpus playlists;
    std::vector<engage::PlaybackRecord> playback;  // grows across phases
    feat::AccountLog accounts;
    /// (user, artist) pairs with any playback before the analysis start, plus
    /// pairs consumed by events or friend synthesis.
    std::unordered_set<std::uint64_t> used_pairs;
    std::unordered_map<std::uint64_t, bool> friend_engaged_memo;

    std::vector<share::ShareEvent> events;  // filled by generate_share_events
    GroundTruth truth;

    Timestamp analysis_start() const { return day_start(cfg.analysis_start_day); }
    Timestamp analysis_end() const {
        return day_start(cfg.analysis_start_day +
                         static_cast<DayIndex>(cfg.analysis_days));
    }

    std::uint64_t pair_key(UserId u, ArtistId a) const {
        return u.value * 1000003ULL + a;
    }
};

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Timestamp uniform_ts(rng::Engine& eng, Timestamp lo, Timestamp hi) {
    return lo + static_cast<Timestamp>(
                    rng::uniform_below(eng, static_cast<std::uint64_t>(hi - lo)));
}

/// Zipf-weighted sampler over a set of artist indices (weight 1/rank^s).
inline rng::DiscreteSampler zipf_sampler(const std::vector<ArtistInfo>& artists,
                                         const std::vector<std::size_t>& members,
                                         double exponent) {
    std::vector<double> weights;
    weights.reserve(members.size());
    for (std::size_t idx : members)
        weights.push_back(
            1.0 / std::pow(static_cast<double>(artists[idx].popularity_rank), exponent));
    return rng::DiscreteSampler(weights);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Phase 1: world structure

inline World generate_world(const SynthConfig& cfg) {
    cfg.validate();
    World world;
    world.cfg = cfg;
    const std::size_t n = cfg.n_users;
    const std::size_t genres = cfg.n_genres;

    // Latent tastes: genre one-hot anchor plus noise, unit-normalized.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x01);
        world.user_genre.resize(n);
        world.latent_taste.resize(n);
        for (std::size_t u = 0; u < n; ++u) {
            int g = static_cast<int>(rng::uniform_below(eng, genres));
            world.user_genre[u] = g;
            std::vector<float> taste(genres, 0.0f);
            taste[static_cast<std::size_t>(g)] = 1.0f;
            for (std::size_t d = 0; d < genres; ++d)
                taste[d] += 0.3f * static_cast<float>(rng::normal(eng));
            double norm = 0.0;
            for (float v : taste) norm += static_cast<double>(v) * v;
            norm = std::sqrt(std::max(norm, 1e-12));
            for (float& v : taste) v = static_cast<float>(v / norm);
            world.latent_taste[u] = std::move(taste);
        }
    }

    std::vector<std::vector<std::uint32_t>> genre_members(genres);
    for (std::size_t u = 0; u < n; ++u)
        genre_members[static_cast<std::size_t>(world.user_genre[u])].push_back(
            static_cast<std::uint32_t>(u));

    // Social graph: stubs wired within-genre with probability h, uniformly
    // otherwise. h = 0 wires independently of taste.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x02);
        world.social_edges.assign(n, {});
        if (cfg.orient_edges) world.oriented_out.assign(n, {});
        std::unordered_set<std::uint64_t> seen;
        auto add_edge = [&](std::uint32_t a, std::uint32_t b) {
            if (a == b) return false;
            std::uint64_t key = a < b ? (static_cast<std::uint64_t>(a) << 32) | b
                                      : (static_cast<std::uint64_t>(b) << 32) | a;
            if (!seen.insert(key).second) return false;
            world.social_edges[a].push_back(b);
            world.social_edges[b].push_back(a);
            // Orientation follows the stub owner: a sends to b.
            if (cfg.orient_edges) world.oriented_out[a].push_back(b);
            return true;
        };
        for (std::uint32_t u = 0; u < n; ++u) {
            int stubs = rng::poisson(eng, cfg.mean_degree / 2.0);
            for (int s = 0; s < stubs; ++s) {
                for (int attempt = 0; attempt < 20; ++attempt) {
                    std::uint32_t partner;
                    const auto& mine =
                        genre_members[static_cast<std::size_t>(world.user_genre[u])];
                    if (rng::uniform(eng) < cfg.homophily && mine.size() > 1) {
                        partner = mine[rng::uniform_below(eng, mine.size())];
                    } else {
                        partner = static_cast<std::uint32_t>(rng::uniform_below(eng, n));
                    }
                    if (add_edge(u, partner)) break;
                }
            }
        }
    }

    // Layer events over the social graph, all before the analysis start.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x03);
        const Timestamp hist_lo =
            world.analysis_start() - static_cast<Timestamp>(cfg.history_days) * kSecondsPerDay;
        const Timestamp hist_hi = world.analysis_start();
        auto stamp = [&] { return detail::uniform_ts(eng, hist_lo, hist_hi); };
        auto oriented_u_to_v = [&](std::uint32_t u, std::uint32_t v) {
            const auto& outs = world.oriented_out[u];
            return std::find(outs.begin(), outs.end(), v) != outs.end();
        };
        for (std::uint32_t u = 0; u < n; ++u) {
            for (std::uint32_t v : world.social_edges[u]) {
                if (v < u) continue;  // visit each undirected edge once
                std::size_t added = 0;
                int listen = rng::poisson(eng, cfg.listening_rate);
                for (int k = 0; k < listen; ++k, ++added)
                    world.history.push_back({net::LayerKind::SocialListening, UserId{u},
                                             UserId{v}, stamp()});
                int playlist = rng::poisson(eng, cfg.playlist_rate);
                for (int k = 0; k < playlist; ++k, ++added)
                    world.history.push_back({net::LayerKind::CollabPlaylist, UserId{u},
                                             UserId{v}, stamp()});
                if (!cfg.orient_edges && rng::bernoulli(eng, cfg.reciprocal_edge_prob)) {
                    int fwd = 1 + rng::poisson(eng, cfg.hist_share_rate / 2.0);
                    int bwd = 1 + rng::poisson(eng, cfg.hist_share_rate / 2.0);
                    for (int k = 0; k < fwd; ++k, ++added)
                        world.history.push_back(
                            {net::LayerKind::LinkShare, UserId{u}, UserId{v}, stamp()});
                    for (int k = 0; k < bwd; ++k, ++added)
                        world.history.push_back(
                            {net::LayerKind::LinkShare, UserId{v}, UserId{u}, stamp()});
                } else if (rng::bernoulli(eng, 0.5)) {
                    int fwd = 1 + rng::poisson(eng, cfg.hist_share_rate);
                    bool u_sends = cfg.orient_edges ? oriented_u_to_v(u, v)
                                                    : rng::bernoulli(eng, 0.5);
                    for (int k = 0; k < fwd; ++k, ++added)
                        world.history.push_back({net::LayerKind::LinkShare,
                                                 u_sends ? UserId{u} : UserId{v},
                                                 u_sends ? UserId{v} : UserId{u},
                                                 stamp()});
                }
                // Keep every social-graph edge visible in the network, but as
                // a one-way share so the fallback never manufactures a
                // friendship (friendship density is a config lever).
                if (added == 0) {
                    bool u_sends = cfg.orient_edges ? oriented_u_to_v(u, v)
                                                    : rng::bernoulli(eng, 0.5);
                    world.history.push_back({net::LayerKind::LinkShare,
                                             u_sends ? UserId{u} : UserId{v},
                                             u_sends ? UserId{v} : UserId{u}, stamp()});
                }
            }
        }
        // Weak ties: scattered one-way shares off the social graph.
        std::size_t weak = static_cast<std::size_t>(cfg.weak_tie_rate * static_cast<double>(n));
        for (std::size_t k = 0; k < weak; ++k) {
            std::uint32_t a = static_cast<std::uint32_t>(rng::uniform_below(eng, n));
            std::uint32_t b = static_cast<std::uint32_t>(rng::uniform_below(eng, n));
            if (a == b) continue;
            world.history.push_back(
                {net::LayerKind::LinkShare, UserId{a}, UserId{b}, stamp()});
        }
    }

    // Artists: genre assignment, Zipf popularity ranks via a seeded
    // permutation, tracks partitioned into one to three albums.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x04);
        std::vector<std::uint32_t> ranks(cfg.n_artists);
        for (std::size_t i = 0; i < cfg.n_artists; ++i)
            ranks[i] = static_cast<std::uint32_t>(i + 1);
        rng::shuffle(eng, ranks);
        world.artists.resize(cfg.n_artists);
        for (std::size_t a = 0; a < cfg.n_artists; ++a) {
            ArtistInfo& info = world.artists[a];
            info.id = static_cast<ArtistId>(a + 1);
            info.genre = static_cast<int>(rng::uniform_below(eng, genres));
            info.popularity_rank = ranks[a];
            std::size_t albums = 1 + rng::uniform_below(eng, 3);
            albums = std::min(albums, cfg.n_tracks_per_artist);
            info.albums.resize(albums);
            info.album_release.resize(albums);
            for (std::size_t b = 0; b < albums; ++b) {
                info.albums[b] = static_cast<AlbumId>((a + 1) * 100 + b);
                info.album_release[b] = detail::uniform_ts(
                    eng, world.analysis_start() - 3650 * kSecondsPerDay,
                    world.analysis_start() - kSecondsPerDay);
            }
            info.tracks.resize(cfg.n_tracks_per_artist);
            info.track_album.resize(cfg.n_tracks_per_artist);
            for (std::size_t t = 0; t < cfg.n_tracks_per_artist; ++t) {
                info.tracks[t] = static_cast<TrackId>((a + 1) * 10000 + t);
                info.track_album[t] = rng::uniform_below(eng, albums);
            }
        }
    }

    std::vector<std::vector<std::size_t>> genre_artists(genres);
    for (std::size_t a = 0; a < cfg.n_artists; ++a)
        genre_artists[static_cast<std::size_t>(world.artists[a].genre)].push_back(a);
    for (std::size_t g = 0; g < genres; ++g)
        if (genre_artists[g].empty())
            genre_artists[g].push_back(g % cfg.n_artists);  // thin worlds still work

    // Playlists: genre-conditional Zipf track sampling, then coverage repair
    // so every track is in the embedding vocabulary.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x05);
        std::vector<rng::DiscreteSampler> samplers;
        samplers.reserve(genres);
        for (std::size_t g = 0; g < genres; ++g)
            samplers.push_back(
                detail::zipf_sampler(world.artists, genre_artists[g], cfg.zipf_exponent));
        world.playlists.resize(cfg.playlists);
        std::unordered_set<TrackId> covered;
        for (std::size_t p = 0; p < cfg.playlists; ++p) {
            std::size_t g = rng::uniform_below(eng, genres);
            embed::Playlist& playlist = world.playlists[p];
            playlist.reserve(cfg.playlist_length);
            for (std::size_t i = 0; i < cfg.playlist_length; ++i) {
                const ArtistInfo& artist =
                    world.artists[genre_artists[g][samplers[g].draw(eng)]];
                TrackId track = artist.tracks[rng::uniform_below(eng, artist.tracks.size())];
                playlist.push_back(track);
                covered.insert(track);
            }
        }
        for (const ArtistInfo& artist : world.artists) {
            for (TrackId track : artist.tracks) {
                if (covered.contains(track)) continue;
                std::size_t p = rng::uniform_below(eng, world.playlists.size());
                std::size_t pos = rng::uniform_below(eng, world.playlists[p].size() + 1);
                world.playlists[p].insert(
                    world.playlists[p].begin() + static_cast<std::ptrdiff_t>(pos), track);
            }
        }
    }

    // Background listening: own-genre Zipf artists with a cross-genre trickle.
    // A fixed share lands inside the taste window so nobody is cold.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x06);
        std::vector<rng::DiscreteSampler> samplers;
        samplers.reserve(genres);
        for (std::size_t g = 0; g < genres; ++g)
            samplers.push_back(
                detail::zipf_sampler(world.artists, genre_artists[g], cfg.zipf_exponent));
        const Timestamp taste_lo =
            world.analysis_start() -
            static_cast<Timestamp>(cfg.taste_window_days) * kSecondsPerDay;
        for (std::uint32_t u = 0; u < n; ++u) {
            for (std::size_t k = 0; k < cfg.listens_per_user; ++k) {
                std::size_t g = static_cast<std::size_t>(world.user_genre[u]);
                if (rng::bernoulli(eng, 0.1)) g = rng::uniform_below(eng, genres);
                const ArtistInfo& artist =
                    world.artists[genre_artists[g][samplers[g].draw(eng)]];
                TrackId track = artist.tracks[rng::uniform_below(eng, artist.tracks.size())];
                Timestamp ts = rng::bernoulli(eng, 0.6)
                                   ? detail::uniform_ts(eng, taste_lo, world.analysis_start())
                                   : detail::uniform_ts(eng, taste_lo, world.analysis_end());
                double duration =
                    rng::bernoulli(eng, 0.05)
                        ? static_cast<double>(rng::uniform_int(eng, 5, 29))
                        : static_cast<double>(rng::uniform_int(eng, 30, 300));
                world.playback.push_back({UserId{u}, track, artist.id, ts, duration});
                // Any background contact blocks this pair for share events:
                // pre-period plays break the discovery filter and in-period
                // plays could contaminate a label window.
                world.used_pairs.insert(world.pair_key(UserId{u}, artist.id));
            }
        }
    }

    // Accounts.
    {
        rng::Engine eng = rng::make_engine(cfg.seed, 0x07);
        for (std::uint32_t u = 0; u < n; ++u) {
            feat::AccountRecord rec;
            rec.user = UserId{u};
            rec.registered_ts = detail::uniform_ts(
                eng, world.analysis_start() - 3000 * kSecondsPerDay,
                world.analysis_start() - 30 * kSecondsPerDay);
            rec.is_subscriber = rng::bernoulli(eng, 0.45);
            world.accounts.add(rec);
        }
    }

    return world;
}

// ---------------------------------------------------------------------------
// Phase 2: share events with a planted outcome model

namespace detail {

struct PendingEvent {
    share::ShareEvent event;
    bool surviving = false;  // opened + 30s playback (the discovery set)
    bool sender_cold = true;
};

inline const char* draw_weighted_token(rng::Engine& eng,
                                       std::initializer_list<std::pair<const char*, double>>
                                           options) {
    double total = 0.0;
    for (const auto& [token, w] : options) total += w;
    double target = rng::uniform(eng) * total;
    for (const auto& [token, w] : options) {
        target -= w;
        if (target <= 0.0) return token;
    }
    return options.begin()->first;
}

}  // namespace detail

/// Builds the share events, plants the outcome, and appends the witness
/// playback. The features feeding the planted probability are computed with
/// the real extractor over the assembled stores.
inline void generate_share_events(World& world) {
    const SynthConfig& cfg = world.cfg;
    rng::Engine eng = rng::make_engine(cfg.seed, 0x10);

    std::vector<std::vector<std::size_t>> genre_artists(cfg.n_genres);
    for (std::size_t a = 0; a < cfg.n_artists; ++a)
        genre_artists[static_cast<std::size_t>(world.artists[a].genre)].push_back(a);
    for (std::size_t g = 0; g < cfg.n_genres; ++g)
        if (genre_artists[g].empty()) genre_artists[g].push_back(g % cfg.n_artists);
    std::vector<rng::DiscreteSampler> samplers;
    samplers.reserve(cfg.n_genres);
    for (std::size_t g = 0; g < cfg.n_genres; ++g)
        samplers.push_back(
            detail::zipf_sampler(world.artists, genre_artists[g], cfg.zipf_exponent));

    const auto& out_adjacency =
        cfg.orient_edges ? world.oriented_out : world.social_edges;
    std::vector<std::uint32_t> connected_users;
    for (std::uint32_t u = 0; u < cfg.n_users; ++u)
        if (!out_adjacency[u].empty()) connected_users.push_back(u);
    if (connected_users.empty()) throw ConfigError("synth: social graph is empty");

    // --- Step A: event structures -----------------------------------------
    std::vector<detail::PendingEvent> pending;
    std::size_t surviving = 0;
    std::size_t attempts = 0;
    const std::size_t max_attempts = cfg.share_events * 50 + 1000;
    while (surviving < cfg.share_events) {
        if (++attempts > max_attempts)
            throw ConfigError("synth: unable to place requested share events");
        std::uint32_t sender =
            connected_users[rng::uniform_below(eng, connected_users.size())];

        double mode_draw = rng::uniform(eng);
        bool broadcast = mode_draw < cfg.broadcast_fraction;
        bool unknown = !broadcast &&
                       mode_draw < cfg.broadcast_fraction + cfg.unknown_app_fraction;
        std::uint32_t receiver;
        if (broadcast) {
            receiver = static_cast<std::uint32_t>(rng::uniform_below(eng, cfg.n_users));
            if (receiver == sender) continue;
        } else {
            const auto& nbrs = out_adjacency[sender];
            receiver = nbrs[rng::uniform_below(eng, nbrs.size())];
        }

        // Artist: sender-genre biased, must be fresh for both endpoints.
        std::size_t artist_idx = cfg.n_artists;
        for (int attempt = 0; attempt < 50; ++attempt) {
            std::size_t g = static_cast<std::size_t>(world.user_genre[sender]);
            if (rng::bernoulli(eng, 0.25)) g = rng::uniform_below(eng, cfg.n_genres);
            std::size_t candidate = genre_artists[g][samplers[g].draw(eng)];
            ArtistId aid = world.artists[candidate].id;
            if (world.used_pairs.contains(world.pair_key(UserId{receiver}, aid))) continue;
            if (world.used_pairs.contains(world.pair_key(UserId{sender}, aid))) continue;
            artist_idx = candidate;
            break;
        }
        if (artist_idx == cfg.n_artists) continue;
        const ArtistInfo& artist = world.artists[artist_idx];
        world.used_pairs.insert(world.pair_key(UserId{receiver}, artist.id));
        world.used_pairs.insert(world.pair_key(UserId{sender}, artist.id));

        detail::PendingEvent pe;
        share::ShareEvent& ev = pe.event;
        ev.sender = UserId{sender};
        ev.receiver = UserId{receiver};
        std::size_t track_idx = rng::uniform_below(eng, artist.tracks.size());
        ev.track_id = artist.tracks[track_idx];
        std::size_t album_idx = artist.track_album[track_idx];
        ev.album_id = artist.albums[album_idx];
        ev.artist_id = artist.id;
        ev.artist_popularity_rank = artist.popularity_rank;
        // The last analysis week is reserved so every label window fits.
        Timestamp share_lo = world.analysis_start();
        Timestamp share_hi = world.analysis_end() - 8 * kSecondsPerDay;
        ev.share_ts = detail::uniform_ts(eng, share_lo, share_hi);
        ev.album_release_age_s = ev.share_ts - artist.album_release[album_idx];

        if (broadcast) {
            ev.app_type = detail::draw_weighted_token(eng, {{"instagram_stories", 0.5},
                                                            {"facebook_feed", 0.25},
                                                            {"facebook_stories", 0.15},
                                                            {"x_twitter", 0.1}});
        } else if (unknown) {
            ev.app_type = detail::draw_weighted_token(
                eng, {{"telegram", 0.5}, {"other_app", 0.3}, {"email", 0.2}});
        } else {
            ev.app_type = detail::draw_weighted_token(eng, {{"whatsapp", 0.5},
                                                            {"facebook_messenger", 0.2},
                                                            {"sms", 0.1},
                                                            {"line", 0.08},
                                                            {"instagram_direct", 0.08},
                                                            {"samsung_messenger", 0.04}});
        }

        double fate = rng::uniform(eng);
        if (fate < cfg.unopened_fraction) {
            pe.surviving = false;  // never opened
        } else {
            Timestamp delay = rng::bernoulli(eng, 0.35)
                                  ? 0
                                  : std::min<Timestamp>(
                                        static_cast<Timestamp>(
                                            -21600.0 * std::log(rng::uniform(eng) + 1e-12)),
                                        3 * kSecondsPerDay);
            ev.open_ts = ev.share_ts + delay;
            if (fate < cfg.unopened_fraction + cfg.no_playback_fraction) {
                pe.surviving = false;  // opened but under 30 seconds
                ev.playback_30s = false;
            } else {
                ev.playback_30s = true;
                pe.surviving = true;
                ++surviving;
            }
        }
        pe.sender_cold = rng::bernoulli(eng, cfg.sender_cold_fraction);
        pending.push_back(std::move(pe));
    }

    std::stable_sort(pending.begin(), pending.end(),
                     [](const detail::PendingEvent& a, const detail::PendingEvent& b) {
                         return a.event.share_ts < b.event.share_ts;
                     });
    for (std::size_t i = 0; i < pending.size(); ++i)
        pending[i].event.event_id = i + 1;

    // --- Step B: sender pre-share listening (the SA signal) ----------------
    {
        rng::Engine sa_eng = rng::make_engine(cfg.seed, 0x11);
        for (detail::PendingEvent& pe : pending) {
            if (pe.sender_cold) continue;
            const share::ShareEvent& ev = pe.event;
            const ArtistInfo& artist = world.artists[ev.artist_id - 1];
            DayIndex share_day = day_of(ev.share_ts);
            std::size_t days = 1 + rng::uniform_below(sa_eng, 7);
            std::size_t tracks_per_day = std::min<std::size_t>(
                1 + static_cast<std::size_t>(rng::poisson(sa_eng, 1.0)),
                artist.tracks.size());
            std::vector<std::size_t> offsets =
                rng::sample_without_replacement(sa_eng, 7, days);
            for (std::size_t off : offsets) {
                DayIndex day = share_day - 1 - static_cast<DayIndex>(off);
                for (std::size_t t = 0; t < tracks_per_day; ++t) {
                    Timestamp ts = day_start(day) +
                                   static_cast<Timestamp>(rng::uniform_below(sa_eng, 86000));
                    world.playback.push_back({ev.sender, artist.tracks[t], ev.artist_id,
                                              ts,
                                              static_cast<double>(
                                                  rng::uniform_int(sa_eng, 40, 240))});
                }
            }
        }
    }

    // --- Step C: friend engagement (the SC signal) -------------------------
    // Needs the final network: history plus every share contact.
    net::MultiplexNetwork network;
    for (const net::InteractionEvent& ev : world.history) network.ingest_event(ev);
    for (const detail::PendingEvent& pe : pending)
        network.ingest_event({net::LayerKind::LinkShare, pe.event.sender,
                              pe.event.receiver, pe.event.share_ts});
    network.seal();

    {
        rng::Engine fr_eng = rng::make_engine(cfg.seed, 0x12);
        const DayIndex start_day = cfg.analysis_start_day;
        for (detail::PendingEvent& pe : pending) {
            if (!pe.surviving) continue;
            const share::ShareEvent& ev = pe.event;
            const ArtistInfo& artist = world.artists[ev.artist_id - 1];
            for (UserId friend_user : network.friends(ev.receiver, ev.share_ts)) {
                std::uint64_t key = world.pair_key(friend_user, ev.artist_id);
                if (world.friend_engaged_memo.contains(key)) continue;
                if (world.used_pairs.contains(key)) {
                    world.friend_engaged_memo.emplace(key, false);
                    continue;
                }
                // A single-track artist cannot exceed the 180-day threshold
                // (one track a day sums to exactly 180), so such friends stay
                // unengaged by construction.
                bool engaged = artist.tracks.size() > 1 &&
                               rng::bernoulli(fr_eng, cfg.p_friend_engaged);
                world.friend_engaged_memo.emplace(key, engaged);
                world.used_pairs.insert(key);
                if (engaged) {
                    // One track every day plus a few two-track days pushes the
                    // 180-day window sum strictly past the threshold.
                    std::size_t extra_days = 1 + rng::uniform_below(fr_eng, 20);
                    for (DayIndex d = start_day - engage::kFriendWindowDays;
                         d < start_day; ++d) {
                        Timestamp ts = day_start(d) + static_cast<Timestamp>(
                                                          rng::uniform_below(fr_eng, 86000));
                        world.playback.push_back(
                            {friend_user, artist.tracks[0], ev.artist_id, ts, 90.0});
                    }
                    for (std::size_t x = 0; x < extra_days; ++x) {
                        DayIndex d = start_day - 1 -
                                     static_cast<DayIndex>(rng::uniform_below(
                                         fr_eng, engage::kFriendWindowDays));
                        Timestamp ts = day_start(d) + static_cast<Timestamp>(
                                                          rng::uniform_below(fr_eng, 86000));
                        world.playback.push_back(
                            {friend_user, artist.tracks[1], ev.artist_id, ts, 90.0});
                    }
                } else if (rng::bernoulli(fr_eng, cfg.friend_light_listener_prob)) {
                    std::size_t light_days = 1 + rng::uniform_below(fr_eng, 10);
                    for (std::size_t x = 0; x < light_days; ++x) {
                        DayIndex d = start_day - 1 -
                                     static_cast<DayIndex>(rng::uniform_below(
                                         fr_eng, engage::kFriendWindowDays));
                        Timestamp ts = day_start(d) + static_cast<Timestamp>(
                                                          rng::uniform_below(fr_eng, 86000));
                        world.playback.push_back(
                            {friend_user, artist.tracks[0], ev.artist_id, ts, 75.0});
                    }
                }
            }
        }
    }

    // --- Step D: open playback (the filter witness) ------------------------
    for (detail::PendingEvent& pe : pending) {
        const share::ShareEvent& ev = pe.event;
        if (!ev.open_ts.has_value()) continue;
        double duration = pe.surviving
                              ? static_cast<double>(rng::uniform_int(eng, 35, 280))
                              : static_cast<double>(rng::uniform_int(eng, 3, 25));
        world.playback.push_back(
            {ev.receiver, ev.track_id, ev.artist_id, *ev.open_ts, duration});
    }

    // --- Step E/F: features via the real extractor, then the planted model -
    engage::PlaybackLog playback_log;
    for (const engage::PlaybackRecord& rec : world.playback) playback_log.add(rec);
    playback_log.seal();

    embed::EmbeddingConfig embed_cfg;
    embed_cfg.dim = cfg.embedding_dim;
    embed_cfg.window = cfg.embedding_window;
    embed_cfg.negatives = cfg.embedding_negatives;
    embed_cfg.epochs = cfg.embedding_epochs;
    embed_cfg.learning_rate = cfg.embedding_learning_rate;
    embed_cfg.seed = cfg.resolved_embedding_seed();
    embed::EmbeddingSpace space = embed::train_track_embeddings(world.playlists, embed_cfg);

    std::vector<UserId> all_users;
    all_users.reserve(cfg.n_users);
    for (std::uint32_t u = 0; u < cfg.n_users; ++u) all_users.push_back(UserId{u});
    feat::TasteVectors tastes = feat::build_taste_vectors(
        playback_log, all_users, space,
        world.analysis_start() -
            static_cast<Timestamp>(cfg.taste_window_days) * kSecondsPerDay,
        world.analysis_start());

    feat::ExtractionContext ctx;
    ctx.network = &network;
    ctx.playback = &playback_log;
    ctx.accounts = &world.accounts;
    ctx.space = &space;
    ctx.tastes = &tastes;
    ctx.analysis_start_day = cfg.analysis_start_day;

    const OutcomeCoefficients& beta = cfg.beta;
    const double log_max_rank = std::log(static_cast<double>(cfg.n_artists) + 1.0);
    std::vector<double> eta;
    std::vector<std::size_t> surviving_idx;
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (!pending[i].surviving) continue;
        feat::FeatureVector x = feat::extract_features(pending[i].event, ctx);
        double e = 0.0;
        e += beta.sum_interactions *
             std::min(static_cast<double>(x.sum_social_interactions), beta.saturation_cap);
        e += beta.direct * (x.direct_link_share ? 1.0 : 0.0);
        e += beta.reciprocal * (x.reciprocal_link_sharing ? 1.0 : 0.0);
        e += beta.receiver_in_degree *
             std::log1p(static_cast<double>(x.receiver_share_in_degree));
        e += beta.receiver_out_degree *
             std::log1p(static_cast<double>(x.receiver_share_out_degree));
        e += beta.sender_out_degree *
             std::log1p(static_cast<double>(x.sender_share_out_degree));
        e += beta.fraction_engaged_friends * std::max(x.fraction_engaged_friends, 0.0);
        e += beta.sr_cosine * x.sr_cosine;
        e += beta.rt_cosine * x.rt_cosine;
        e += beta.popularity *
             (1.0 - std::log(static_cast<double>(x.artist_popularity_rank)) / log_max_rank);
        e += beta.release_age *
             std::log1p(static_cast<double>(x.release_age_s) / kSecondsPerDay);
        e += beta.sender_engagement * x.sender_artist_engagement_7d;
        e += beta.is_subscriber * (x.is_subscriber ? 1.0 : 0.0);
        e += beta.streaming_hours * x.receiver_streaming_hours_7d;
        e += beta.days_on_platform *
             std::log1p(static_cast<double>(x.receiver_days_on_platform));
        eta.push_back(e);
        surviving_idx.push_back(i);
    }

    // Intercept calibrated by bisection so the mean planted probability hits
    // the target positive rate.
    double lo = -20.0, hi = 20.0;
    for (int iter = 0; iter < 80; ++iter) {
        double mid = (lo + hi) / 2.0;
        double mean = 0.0;
        for (double e : eta) mean += detail::logistic(e + mid);
        mean /= static_cast<double>(eta.size());
        if (mean < cfg.target_positive_rate)
            lo = mid;
        else
            hi = mid;
    }
    const double intercept = (lo + hi) / 2.0;

    world.truth.intercept = intercept;
    world.truth.events.reserve(eta.size());

    // --- Step G: realized labels and their witness playback ----------------
    for (std::size_t k = 0; k < eta.size(); ++k) {
        detail::PendingEvent& pe = pending[surviving_idx[k]];
        const share::ShareEvent& ev = pe.event;
        double p_star = detail::logistic(eta[k] + intercept);
        rng::Engine label_eng = rng::make_engine(cfg.seed, 0x30000000ULL + ev.event_id);
        bool label = rng::uniform(label_eng) < p_star;

        if (label) {
            const ArtistInfo& artist = world.artists[ev.artist_id - 1];
            DayIndex open_day = day_of(*ev.open_ts);
            // Guaranteed second track-day: the shared track again tomorrow.
            Timestamp ts = day_start(open_day + 1) +
                           static_cast<Timestamp>(rng::uniform_below(label_eng, 86000));
            world.playback.push_back({ev.receiver, ev.track_id, ev.artist_id, ts,
                                      static_cast<double>(
                                          rng::uniform_int(label_eng, 35, 240))});
            std::size_t extra = static_cast<std::size_t>(rng::poisson(label_eng, 1.2));
            for (std::size_t x = 0; x < extra; ++x) {
                DayIndex d = open_day + static_cast<DayIndex>(
                                            rng::uniform_below(label_eng, 7));
                TrackId track =
                    artist.tracks[rng::uniform_below(label_eng, artist.tracks.size())];
                Timestamp extra_ts =
                    std::max(day_start(d) + static_cast<Timestamp>(
                                                rng::uniform_below(label_eng, 86000)),
                             *ev.open_ts);
                world.playback.push_back({ev.receiver, track, ev.artist_id, extra_ts,
                                          static_cast<double>(
                                              rng::uniform_int(label_eng, 35, 240))});
            }
        }

        EventTruth truth;
        truth.event_id = ev.event_id;
        truth.eta = eta[k];
        truth.p_star = p_star;
        truth.label = label;
        world.truth.events.push_back(truth);
    }

    // Deterministic playback order for emission.
    std::stable_sort(world.playback.begin(), world.playback.end(),
                     [](const engage::PlaybackRecord& a, const engage::PlaybackRecord& b) {
                         if (a.ts != b.ts) return a.ts < b.ts;
                         if (a.user != b.user) return a.user < b.user;
                         if (a.track != b.track) return a.track < b.track;
                         return a.duration_s < b.duration_s;
                     });

    world.events.reserve(pending.size());
    for (detail::PendingEvent& pe : pending) world.events.push_back(std::move(pe.event));

    std::size_t positives = 0;
    for (const EventTruth& t : world.truth.events) positives += t.label ? 1 : 0;
    world.truth.meta = io::json{
        {"beta", cfg.beta.to_json()},
        {"intercept", intercept},
        {"target_positive_rate", cfg.target_positive_rate},
        {"realized_positive_rate",
         static_cast<double>(positives) / static_cast<double>(world.truth.events.size())},
        {"surviving_events", world.truth.events.size()},
        {"emitted_events", world.events.size()},
        {"seed", cfg.seed}};
}

// ---------------------------------------------------------------------------
// Config JSON

inline io::json SynthConfig::to_json() const {
    return io::json{{"n_users", n_users},
                    {"n_artists", n_artists},
                    {"n_tracks_per_artist", n_tracks_per_artist},
                    {"n_genres", n_genres},
                    {"homophily", homophily},
                    {"mean_degree", mean_degree},
                    {"listening_rate", listening_rate},
                    {"playlist_rate", playlist_rate},
                    {"hist_share_rate", hist_share_rate},
                    {"reciprocal_edge_prob", reciprocal_edge_prob},
                    {"weak_tie_rate", weak_tie_rate},
                    {"orient_edges", orient_edges},
                    {"share_events", share_events},
                    {"broadcast_fraction", broadcast_fraction},
                    {"unknown_app_fraction", unknown_app_fraction},
                    {"unopened_fraction", unopened_fraction},
                    {"no_playback_fraction", no_playback_fraction},
                    {"p_friend_engaged", p_friend_engaged},
                    {"friend_light_listener_prob", friend_light_listener_prob},
                    {"sender_cold_fraction", sender_cold_fraction},
                    {"playlists", playlists},
                    {"playlist_length", playlist_length},
                    {"listens_per_user", listens_per_user},
                    {"zipf_exponent", zipf_exponent},
                    {"analysis_start_day", analysis_start_day},
                    {"analysis_days", analysis_days},
                    {"history_days", history_days},
                    {"taste_window_days", taste_window_days},
                    {"embedding_dim", embedding_dim},
                    {"embedding_epochs", embedding_epochs},
                    {"embedding_window", embedding_window},
                    {"embedding_negatives", embedding_negatives},
                    {"embedding_learning_rate", embedding_learning_rate},
                    {"embedding_seed", embedding_seed},
                    {"beta", beta.to_json()},
                    {"target_positive_rate", target_positive_rate},
                    {"seed", seed}};
}

inline SynthConfig SynthConfig::from_json(const io::json& j) {
    SynthConfig c;
    c.n_users = j.value("n_users", c.n_users);
    c.n_artists = j.value("n_artists", c.n_artists);
    c.n_tracks_per_artist = j.value("n_tracks_per_artist", c.n_tracks_per_artist);
    c.n_genres = j.value("n_genres", c.n_genres);
    c.homophily = j.value("homophily", c.homophily);
    c.mean_degree = j.value("mean_degree", c.mean_degree);
    c.listening_rate = j.value("listening_rate", c.listening_rate);
    c.playlist_rate = j.value("playlist_rate", c.playlist_rate);
    c.hist_share_rate = j.value("hist_share_rate", c.hist_share_rate);
    c.reciprocal_edge_prob = j.value("reciprocal_edge_prob", c.reciprocal_edge_prob);
    c.weak_tie_rate = j.value("weak_tie_rate", c.weak_tie_rate);
    c.orient_edges = j.value("orient_edges", c.orient_edges);
    c.share_events = j.value("share_events", c.share_events);
    c.broadcast_fraction = j.value("broadcast_fraction", c.broadcast_fraction);
    c.unknown_app_fraction = j.value("unknown_app_fraction", c.unknown_app_fraction);
    c.unopened_fraction = j.value("unopened_fraction", c.unopened_fraction);
    c.no_playback_fraction = j.value("no_playback_fraction", c.no_playback_fraction);
    c.p_friend_engaged = j.value("p_friend_engaged", c.p_friend_engaged);
    c.friend_light_listener_prob =
        j.value("friend_light_listener_prob", c.friend_light_listener_prob);
    c.sender_cold_fraction = j.value("sender_cold_fraction", c.sender_cold_fraction);
    c.playlists = j.value("playlists", c.playlists);
    c.playlist_length = j.value("playlist_length", c.playlist_length);
    c.listens_per_user = j.value("listens_per_user", c.listens_per_user);
    c.zipf_exponent = j.value("zipf_exponent", c.zipf_exponent);
    c.analysis_start_day = j.value("analysis_start_day", c.analysis_start_day);
    c.analysis_days = j.value("analysis_days", c.analysis_days);
    c.history_days = j.value("history_days", c.history_days);
    c.taste_window_days = j.value("taste_window_days", c.taste_window_days);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.embedding_epochs = j.value("embedding_epochs", c.embedding_epochs);
    c.embedding_window = j.value("embedding_window", c.embedding_window);
    c.embedding_negatives = j.value("embedding_negatives", c.embedding_negatives);
    c.embedding_learning_rate =
        j.value("embedding_learning_rate", c.embedding_learning_rate);
    c.embedding_seed = j.value("embedding_seed", c.embedding_seed);
    if (j.contains("beta")) c.beta = OutcomeCoefficients::from_json(j.at("beta"));
    c.target_positive_rate = j.value("target_positive_rate", c.target_positive_rate);
    c.seed = j.value("seed", c.seed);
    return c;
}

// ---------------------------------------------------------------------------
// Emission

struct WorldPaths {
    std::filesystem::path interactions;
    std::filesystem::path playlists;
    std::filesystem::path playback;
    std::filesystem::path accounts;
    std::filesystem::path shares;
    std::filesystem::path ground_truth;
    std::filesystem::path ground_truth_meta;
};

inline void emit_world(const World& world, const WorldPaths& paths) {
    net::MultiplexNetwork network;
    for (const net::InteractionEvent& ev : world.history) network.ingest_event(ev);
    for (const share::ShareEvent& ev : world.events)
        network.ingest_event(
            {net::LayerKind::LinkShare, ev.sender, ev.receiver, ev.share_ts});
    network.seal();
    network.save_jsonl(paths.interactions);

    embed::save_corpus_jsonl(paths.playlists, world.playlists);

    {
        io::JsonlWriter out(paths.playback);
        for (const engage::PlaybackRecord& rec : world.playback)
            engage::append_playback_jsonl(out, rec);
    }

    world.accounts.save_jsonl(paths.accounts);
    share::save_shares_jsonl(paths.shares, world.events);

    {
        io::JsonlWriter out(paths.ground_truth);
        for (const EventTruth& t : world.truth.events)
            out.write(io::json{{"event_id", t.event_id},
                               {"eta", t.eta},
                               {"p_star", t.p_star},
                               {"label", t.label}});
    }
    io::write_file(paths.ground_truth_meta, world.truth.meta.dump(2));
}

}  // namespace tunecast::synth
