#include "tunecast/share_events.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "tunecast/rng.hpp"

using namespace tunecast;
using share::AppMode;
using share::ShareEvent;

namespace {

ShareEvent make_event(std::uint64_t id, std::uint64_t sender, std::uint64_t receiver,
                      ArtistId artist, std::uint32_t rank, Timestamp share_ts,
                      bool opened = true, bool played = true) {
    ShareEvent ev;
    ev.event_id = id;
    ev.sender = UserId{sender};
    ev.receiver = UserId{receiver};
    ev.track_id = artist * 10;
    ev.album_id = artist * 100;
    ev.artist_id = artist;
    ev.artist_popularity_rank = rank;
    ev.album_release_age_s = 1000;
    ev.app_type = "whatsapp";
    ev.share_ts = share_ts;
    if (opened) ev.open_ts = share_ts + 60;
    ev.playback_30s = played && opened;
    return ev;
}

}  // namespace

TEST(AppMode, DirectList) {
    EXPECT_EQ(share::classify_app_mode("whatsapp"), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("facebook_messenger"), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("sms"), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("line"), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("instagram_direct"), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("samsung_messenger"), AppMode::Direct);
}

TEST(AppMode, BroadcastList) {
    EXPECT_EQ(share::classify_app_mode("instagram_stories"), AppMode::Broadcast);
    EXPECT_EQ(share::classify_app_mode("facebook_feed"), AppMode::Broadcast);
    EXPECT_EQ(share::classify_app_mode("facebook_stories"), AppMode::Broadcast);
    EXPECT_EQ(share::classify_app_mode("x_twitter"), AppMode::Broadcast);
}

TEST(AppMode, UnknownToken) {
    EXPECT_EQ(share::classify_app_mode("carrier_pigeon"), AppMode::Unknown);
    EXPECT_EQ(share::classify_app_mode(""), AppMode::Unknown);
}

TEST(AppMode, CanonicalizationIsCaseAndSeparatorInsensitive) {
    EXPECT_EQ(share::classify_app_mode("WhatsApp"), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("Instagram Stories"), AppMode::Broadcast);
    EXPECT_EQ(share::classify_app_mode("FACEBOOK-MESSENGER"), AppMode::Direct);
    EXPECT_EQ(share::canonical_app_token("  X (Twitter)!"), "x_twitter");
}

TEST(AppMode, ExactlyTenTokensMapWithoutAliases) {
    // Fuzz a token space; only the canonical ten may classify.
    const std::set<std::string> known = {
        "whatsapp",          "facebook_messenger", "sms",
        "line",              "instagram_direct",   "samsung_messenger",
        "instagram_stories", "facebook_feed",      "facebook_stories",
        "x_twitter"};
    rng::Engine eng = rng::make_engine(41, 0);
    for (int i = 0; i < 2000; ++i) {
        std::string token;
        std::size_t len = 1 + rng::uniform_below(eng, 12);
        for (std::size_t c = 0; c < len; ++c)
            token.push_back(static_cast<char>('a' + rng::uniform_below(eng, 26)));
        AppMode mode = share::classify_app_mode(token);
        if (known.count(token) == 0) EXPECT_EQ(mode, AppMode::Unknown) << token;
    }
    for (const std::string& token : known)
        EXPECT_NE(share::classify_app_mode(token), AppMode::Unknown);
}

TEST(AppMode, AliasMapExtendsWithoutCodeChange) {
    share::AppAliasMap aliases{{"twitter", "x_twitter"}, {"wapp", "whatsapp"}};
    EXPECT_EQ(share::classify_app_mode("twitter", aliases), AppMode::Broadcast);
    EXPECT_EQ(share::classify_app_mode("Twitter", aliases), AppMode::Broadcast);
    EXPECT_EQ(share::classify_app_mode("wapp", aliases), AppMode::Direct);
    EXPECT_EQ(share::classify_app_mode("twitter"), AppMode::Unknown);
}

TEST(DiscoveryFilter, UnopenedExcluded) {
    engage::PlaybackLog log;
    log.seal();
    std::vector<ShareEvent> events{make_event(1, 1, 2, 7, 5, 1000, false, false)};
    EXPECT_TRUE(share::filter_discovery_shares(events, log).empty());
}

TEST(DiscoveryFilter, FreshReceiverIncluded) {
    engage::PlaybackLog log;
    log.seal();
    std::vector<ShareEvent> events{make_event(1, 1, 2, 7, 5, 1000)};
    EXPECT_EQ(share::filter_discovery_shares(events, log).size(), 1u);
}

TEST(DiscoveryFilter, PriorListenerExcluded) {
    engage::PlaybackLog log;
    // Receiver streamed the artist a year earlier.
    log.add({UserId{2}, 70, 7, 1000 - 365 * kSecondsPerDay, 120.0});
    log.seal();
    std::vector<ShareEvent> events{make_event(1, 1, 2, 7, 5, 1000)};
    EXPECT_TRUE(share::filter_discovery_shares(events, log).empty());
}

TEST(DiscoveryFilter, NoThirtySecondPlaybackExcluded) {
    engage::PlaybackLog log;
    log.seal();
    std::vector<ShareEvent> events{make_event(1, 1, 2, 7, 5, 1000, true, false)};
    EXPECT_TRUE(share::filter_discovery_shares(events, log).empty());
}

TEST(DiscoveryFilter, SubsetAndFixedPoint) {
    engage::PlaybackLog log;
    log.add({UserId{4}, 70, 7, 10, 45.0});
    log.seal();
    rng::Engine eng = rng::make_engine(42, 0);
    std::vector<ShareEvent> events;
    for (std::uint64_t i = 0; i < 50; ++i)
        events.push_back(make_event(i, 1 + i % 3, 4 + i % 5, 7 + i % 4, 5,
                                    1000 + static_cast<Timestamp>(i),
                                    rng::bernoulli(eng, 0.7), rng::bernoulli(eng, 0.8)));
    std::vector<ShareEvent> once = share::filter_discovery_shares(events, log);
    EXPECT_LE(once.size(), events.size());
    std::set<std::uint64_t> input_ids;
    for (const auto& e : events) input_ids.insert(e.event_id);
    for (const auto& e : once) EXPECT_TRUE(input_ids.count(e.event_id) > 0);
    std::vector<ShareEvent> twice = share::filter_discovery_shares(once, log);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i)
        EXPECT_EQ(once[i].event_id, twice[i].event_id);
}

TEST(StratifiedSample, CapAboveBinPopulationKeepsEverything) {
    std::vector<ShareEvent> events;
    for (std::uint64_t i = 0; i < 30; ++i)
        events.push_back(make_event(i, 1, 2 + i, 7, 1 + i % 10, 1000));
    std::vector<std::uint32_t> edges{1, 6, 11};
    std::vector<ShareEvent> out = share::stratified_sample_by_artist(events, edges, 100, 9);
    EXPECT_EQ(out.size(), events.size());
}

TEST(StratifiedSample, CapBindsPerBin) {
    std::vector<ShareEvent> events;
    for (std::uint64_t i = 0; i < 10; ++i)
        events.push_back(make_event(i, 1, 2 + i, 7, 3, 1000));
    std::vector<std::uint32_t> edges{1, 11};
    std::vector<ShareEvent> out = share::stratified_sample_by_artist(events, edges, 3, 9);
    EXPECT_EQ(out.size(), 3u);
    std::set<std::uint64_t> ids;
    for (const auto& e : out) ids.insert(e.event_id);
    EXPECT_EQ(ids.size(), 3u);  // no duplicates
}

TEST(StratifiedSample, DeterministicAcrossRuns) {
    std::vector<ShareEvent> events;
    for (std::uint64_t i = 0; i < 200; ++i)
        events.push_back(make_event(i, 1, 2 + i, 7, 1 + i % 40, 1000));
    std::vector<std::uint32_t> edges{1, 11, 21, 31, 41};
    auto a = share::stratified_sample_by_artist(events, edges, 10, 77);
    auto b = share::stratified_sample_by_artist(events, edges, 10, 77);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].event_id, b[i].event_id);
    auto c = share::stratified_sample_by_artist(events, edges, 10, 78);
    bool differs = a.size() != c.size();
    for (std::size_t i = 0; !differs && i < a.size(); ++i)
        differs = a[i].event_id != c[i].event_id;
    EXPECT_TRUE(differs);  // different seed, different draw (overwhelmingly)
}

TEST(StratifiedSample, PerBinCountsAreMinOfCapAndPopulation) {
    rng::Engine eng = rng::make_engine(43, 0);
    std::vector<ShareEvent> events;
    for (std::uint64_t i = 0; i < 300; ++i)
        events.push_back(make_event(i, 1, 2 + i, 7,
                                    1 + rng::uniform_below(eng, 50), 1000));
    std::vector<std::uint32_t> edges{1, 11, 21, 31, 41, 51};
    std::size_t cap = 20;
    auto out = share::stratified_sample_by_artist(events, edges, cap, 5);
    std::vector<std::size_t> population(5, 0), sampled(5, 0);
    auto bin_of = [&](std::uint32_t rank) { return (rank - 1) / 10; };
    for (const auto& e : events) ++population[bin_of(e.artist_popularity_rank)];
    for (const auto& e : out) ++sampled[bin_of(e.artist_popularity_rank)];
    for (std::size_t b = 0; b < 5; ++b)
        EXPECT_EQ(sampled[b], std::min(cap, population[b]));
}

TEST(StratifiedSample, RejectsBadEdges) {
    std::vector<ShareEvent> events{make_event(1, 1, 2, 7, 5, 1000)};
    EXPECT_THROW(share::stratified_sample_by_artist(events, {5, 5}, 1, 1), ConfigError);
    EXPECT_THROW(share::stratified_sample_by_artist(events, {10, 5}, 1, 1), ConfigError);
    EXPECT_THROW(share::stratified_sample_by_artist(events, {10}, 1, 1), ConfigError);
}

TEST(StratifiedSample, OutOfRangeRanksAreDropped) {
    std::vector<ShareEvent> events{make_event(1, 1, 2, 7, 100, 1000),
                                   make_event(2, 1, 3, 7, 5, 1000)};
    std::vector<std::uint32_t> edges{1, 11};
    auto out = share::stratified_sample_by_artist(events, edges, 10, 1);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].event_id, 2u);
}

TEST(ShareJsonl, RoundTripPreservesEverything) {
    auto dir = std::filesystem::temp_directory_path() / "tunecast_share_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "shares.jsonl";
    std::vector<ShareEvent> events;
    events.push_back(make_event(1, 1, 2, 7, 5, 1000));
    events.push_back(make_event(2, 3, 4, 8, 9, 2000, false, false));
    events[0].app_type = "instagram_stories";
    share::save_shares_jsonl(path, events);
    std::vector<ShareEvent> loaded = share::load_shares_jsonl(path);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].app_type, "instagram_stories");
    EXPECT_EQ(loaded[0].open_ts, events[0].open_ts);
    EXPECT_FALSE(loaded[1].open_ts.has_value());
    EXPECT_EQ(loaded[1].share_ts, 2000);
    std::filesystem::remove_all(dir);
}

TEST(ShareJsonl, InvariantViolationsRejected) {
    ShareEvent self = make_event(1, 2, 2, 7, 5, 1000);
    EXPECT_THROW(self.validate(), DataError);

    ShareEvent open_before = make_event(2, 1, 2, 7, 5, 1000);
    open_before.open_ts = 999;
    EXPECT_THROW(open_before.validate(), DataError);

    ShareEvent playback_unopened = make_event(3, 1, 2, 7, 5, 1000, false, false);
    playback_unopened.playback_30s = true;
    EXPECT_THROW(playback_unopened.validate(), DataError);
}

TEST(DefaultDeciles, CoverObservedRanks) {
    rng::Engine eng = rng::make_engine(44, 0);
    std::vector<ShareEvent> events;
    for (std::uint64_t i = 0; i < 500; ++i)
        events.push_back(make_event(i, 1, 2 + i, 7,
                                    1 + rng::uniform_below(eng, 300), 1000));
    std::vector<std::uint32_t> edges = share::default_rank_deciles(events);
    ASSERT_GE(edges.size(), 2u);
    for (std::size_t i = 1; i < edges.size(); ++i) EXPECT_LT(edges[i - 1], edges[i]);
    auto sampled = share::stratified_sample_by_artist(events, edges, 1000000, 1);
    EXPECT_EQ(sampled.size(), events.size());  // full coverage, nothing dropped
}
