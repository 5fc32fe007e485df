// User-artist engagement: daily log-scaled unique-track intensity and its
// windowed aggregate, plus the engaged-receiver / engaged-friend thresholds.
//
// A playback record qualifies for engagement counting only when the stream
// lasted at least 30 seconds. Days are UTC calendar days.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/io.hpp"

namespace tunecast::engage {

constexpr double kQualifyingSeconds = 30.0;
/// Strict threshold on 7-day post-open engagement: two or more unique tracks.
constexpr double kEngagedReceiverThreshold = 1.3;
/// Strict threshold on the 180-day pre-period window: more than one track per
/// day on average.
constexpr double kEngagedFriendThreshold = 180.0;
constexpr int kReceiverWindowDays = 7;
constexpr int kFriendWindowDays = 180;

struct PlaybackRecord {
    UserId user;
    TrackId track = 0;
    ArtistId artist = 0;
    Timestamp ts = 0;
    double duration_s = 0.0;
};

struct DailyEngagement {
    UserId user;
    ArtistId artist = 0;
    DayIndex day = 0;
    std::size_t n = 0;  // distinct qualifying tracks that day
    double e = 0.0;     // log10(n) + 1, or 0 when n = 0
};

struct EngagementWindowSum {
    UserId user;
    ArtistId artist = 0;
    DayIndex t0 = 0;
    int k = 0;  // signed day count; >0 looks forward from t0, <0 backward
    double e_sum = 0.0;
};

/// e(n) = log10(n) + 1 for n >= 1, else 0.
inline double daily_engagement_value(std::size_t n) {
    return n == 0 ? 0.0 : std::log10(static_cast<double>(n)) + 1.0;
}

inline bool is_engaged_receiver(const EngagementWindowSum& e7) {
    return e7.e_sum > kEngagedReceiverThreshold;
}

inline bool is_engaged_friend(const EngagementWindowSum& e180) {
    return e180.e_sum > kEngagedFriendThreshold;
}

/// Indexed playback history. Two build modes:
///   - batch: add() in any order, then seal() once; prefix sums enable
///     O(log n) window queries.
///   - ordered: add_ordered() with non-decreasing timestamps; the log is
///     queryable at any point, which is what the as-ingested hygiene replay
///     uses.
class PlaybackLog {
  public:
    void add(const PlaybackRecord& rec) {
        if (sealed_ || streaming_mode_) throw std::logic_error("add after seal");
        validate(rec);
        raw_.push_back(rec);
    }

    /// Streaming insert; timestamps must be non-decreasing.
    void add_ordered(const PlaybackRecord& rec) {
        if (!raw_.empty() || sealed_)
            throw std::logic_error("add_ordered cannot mix with batch mode");
        validate(rec);
        if (rec.ts < last_ts_)
            throw std::logic_error("add_ordered: timestamps must be non-decreasing");
        last_ts_ = rec.ts;
        ingest_indexed(rec);
        streaming_mode_ = true;
    }

    void seal() {
        if (streaming_mode_) return;  // ordered mode is always consistent
        std::stable_sort(raw_.begin(), raw_.end(),
                         [](const PlaybackRecord& a, const PlaybackRecord& b) {
                             return a.ts < b.ts;
                         });
        for (const PlaybackRecord& rec : raw_) ingest_indexed(rec);
        raw_.clear();
        raw_.shrink_to_fit();
        for (auto& [key, pair] : pairs_) {
            pair.e_prefix.resize(pair.days.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < pair.days.size(); ++i) {
                acc += daily_engagement_value(pair.n[i]);
                pair.e_prefix[i] = acc;
            }
        }
        sealed_ = true;
    }

    DailyEngagement daily(UserId user, ArtistId artist, DayIndex day) const {
        DailyEngagement out;
        out.user = user;
        out.artist = artist;
        out.day = day;
        const PairIndex* idx = find_pair(user, artist);
        if (idx != nullptr) {
            auto it = std::lower_bound(idx->days.begin(), idx->days.end(), day);
            if (it != idx->days.end() && *it == day)
                out.n = static_cast<std::size_t>(idx->n[it - idx->days.begin()]);
        }
        out.e = daily_engagement_value(out.n);
        return out;
    }

    /// Eq-style window sum with half-open day windows: k > 0 covers
    /// [t0, t0+k) and k < 0 covers [t0+k, t0).
    EngagementWindowSum aggregate(UserId user, ArtistId artist, DayIndex t0,
                                  int k) const {
        if (k == 0) throw std::invalid_argument("aggregate: K must be nonzero");
        DayIndex lo = k > 0 ? t0 : t0 + k;
        DayIndex hi = k > 0 ? t0 + k : t0;
        EngagementWindowSum out;
        out.user = user;
        out.artist = artist;
        out.t0 = t0;
        out.k = k;
        out.e_sum = sum_over_days(user, artist, lo, hi);
        return out;
    }

    /// Any playback record of the artist (regardless of duration) strictly
    /// before ts. Drives the discovery-share filter.
    bool has_artist_playback_before(UserId user, ArtistId artist, Timestamp ts) const {
        const PairIndex* idx = find_pair(user, artist);
        return idx != nullptr && idx->first_any < ts;
    }

    /// Total streamed seconds with record timestamps in [lo, hi).
    double streaming_seconds_between(UserId user, Timestamp lo, Timestamp hi) const {
        auto it = per_user_.find(user);
        if (it == per_user_.end() || lo >= hi) return 0.0;
        const UserIndex& u = it->second;
        std::size_t a = static_cast<std::size_t>(
            std::lower_bound(u.ts.begin(), u.ts.end(), lo) - u.ts.begin());
        std::size_t b = static_cast<std::size_t>(
            std::lower_bound(u.ts.begin(), u.ts.end(), hi) - u.ts.begin());
        double lo_sum = a == 0 ? 0.0 : u.duration_prefix[a - 1];
        double hi_sum = b == 0 ? 0.0 : u.duration_prefix[b - 1];
        return hi_sum - lo_sum;
    }

    /// Qualifying (>= 30 s) listens in [lo, hi) as (track, ts), time order.
    template <typename Fn>
    void for_each_listen_in(UserId user, Timestamp lo, Timestamp hi, Fn&& fn) const {
        auto it = per_user_.find(user);
        if (it == per_user_.end()) return;
        const UserIndex& u = it->second;
        auto first = std::lower_bound(u.listen_ts.begin(), u.listen_ts.end(), lo);
        for (auto cur = first; cur != u.listen_ts.end() && *cur < hi; ++cur)
            fn(u.listen_track[cur - u.listen_ts.begin()], *cur);
    }

    std::size_t record_count() const { return record_count_; }

  private:
    struct PairIndex {
        std::vector<DayIndex> days;
        std::vector<std::int32_t> n;
        std::vector<double> e_prefix;  // only in sealed batch mode
        Timestamp first_any = std::numeric_limits<Timestamp>::max();
        std::vector<TrackId> last_day_tracks;  // distinct tracks of days.back()
    };

    struct UserIndex {
        std::vector<Timestamp> ts;
        std::vector<double> duration_prefix;
        std::vector<Timestamp> listen_ts;   // qualifying records only
        std::vector<TrackId> listen_track;
    };

    struct PairKey {
        std::uint64_t user = 0;
        std::uint64_t artist = 0;
        friend bool operator==(const PairKey&, const PairKey&) = default;
    };
    struct PairKeyHash {
        std::size_t operator()(const PairKey& k) const noexcept {
            std::uint64_t h = k.user * 0x9e3779b97f4a7c15ULL;
            h ^= k.artist + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            return static_cast<std::size_t>(h);
        }
    };

    static void validate(const PlaybackRecord& rec) {
        if (rec.duration_s < 0.0) throw DataError("negative playback duration");
    }

    void ingest_indexed(const PlaybackRecord& rec) {
        ++record_count_;
        PairIndex& pair = pairs_[PairKey{rec.user.value, rec.artist}];
        pair.first_any = std::min(pair.first_any, rec.ts);
        if (rec.duration_s >= kQualifyingSeconds) {
            DayIndex day = day_of(rec.ts);
            if (pair.days.empty() || pair.days.back() != day) {
                pair.days.push_back(day);
                pair.n.push_back(1);
                pair.last_day_tracks.assign(1, rec.track);
            } else if (std::find(pair.last_day_tracks.begin(), pair.last_day_tracks.end(),
                                 rec.track) == pair.last_day_tracks.end()) {
                pair.last_day_tracks.push_back(rec.track);
                ++pair.n.back();
            }
        }
        UserIndex& user = per_user_[rec.user];
        user.ts.push_back(rec.ts);
        double prev = user.duration_prefix.empty() ? 0.0 : user.duration_prefix.back();
        user.duration_prefix.push_back(prev + rec.duration_s);
        if (rec.duration_s >= kQualifyingSeconds) {
            user.listen_ts.push_back(rec.ts);
            user.listen_track.push_back(rec.track);
        }
    }

    const PairIndex* find_pair(UserId user, ArtistId artist) const {
        auto it = pairs_.find(PairKey{user.value, artist});
        return it == pairs_.end() ? nullptr : &it->second;
    }

    double sum_over_days(UserId user, ArtistId artist, DayIndex lo, DayIndex hi) const {
        const PairIndex* idx = find_pair(user, artist);
        if (idx == nullptr || lo >= hi) return 0.0;
        auto begin = std::lower_bound(idx->days.begin(), idx->days.end(), lo);
        auto end = std::lower_bound(idx->days.begin(), idx->days.end(), hi);
        if (begin == end) return 0.0;
        if (!idx->e_prefix.empty()) {
            std::size_t a = static_cast<std::size_t>(begin - idx->days.begin());
            std::size_t b = static_cast<std::size_t>(end - idx->days.begin());
            double lo_sum = a == 0 ? 0.0 : idx->e_prefix[a - 1];
            return idx->e_prefix[b - 1] - lo_sum;
        }
        double sum = 0.0;
        for (auto it = begin; it != end; ++it)
            sum += daily_engagement_value(
                static_cast<std::size_t>(idx->n[it - idx->days.begin()]));
        return sum;
    }

    std::vector<PlaybackRecord> raw_;
    std::unordered_map<PairKey, PairIndex, PairKeyHash> pairs_;
    std::unordered_map<UserId, UserIndex> per_user_;
    std::size_t record_count_ = 0;
    Timestamp last_ts_ = std::numeric_limits<Timestamp>::min();
    bool sealed_ = false;
    bool streaming_mode_ = false;
};

namespace detail {

/// Fast scan for the fixed-order record the generator emits; falls back to
/// full JSON parsing on any mismatch.
inline bool fast_parse_playback(const std::string& line, PlaybackRecord& out) {
    const char* p = line.c_str();
    auto expect = [&p](const char* lit) {
        std::size_t n = std::strlen(lit);
        if (std::strncmp(p, lit, n) != 0) return false;
        p += n;
        return true;
    };
    auto read_int = [&p](std::int64_t& v) {
        char* end = nullptr;
        v = std::strtoll(p, &end, 10);
        if (end == p) return false;
        p = end;
        return true;
    };
    std::int64_t user = 0, track = 0, artist = 0, ts = 0, dur = 0;
    if (!expect("{\"user\":") || !read_int(user)) return false;
    if (!expect(",\"track\":") || !read_int(track)) return false;
    if (!expect(",\"artist\":") || !read_int(artist)) return false;
    if (!expect(",\"ts\":") || !read_int(ts)) return false;
    if (!expect(",\"duration_s\":") || !read_int(dur)) return false;
    if (!expect("}") || *p != '\0') return false;
    out.user = UserId{static_cast<std::uint64_t>(user)};
    out.track = static_cast<TrackId>(track);
    out.artist = static_cast<ArtistId>(artist);
    out.ts = ts;
    out.duration_s = static_cast<double>(dur);
    return true;
}

}  // namespace detail

inline PlaybackRecord playback_from_json(const io::json& record) {
    PlaybackRecord rec;
    rec.user = UserId{record.at("user").get<std::uint64_t>()};
    rec.track = record.at("track").get<TrackId>();
    rec.artist = record.at("artist").get<ArtistId>();
    rec.ts = record.at("ts").get<Timestamp>();
    rec.duration_s = record.at("duration_s").get<double>();
    return rec;
}

/// Loads and seals a playback log from JSONL
/// (fields: user, track, artist, ts, duration_s).
inline PlaybackLog load_playback_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open playback log: " + path.string());
    PlaybackLog log;
    std::string line;
    std::size_t line_no = 0;
    PlaybackRecord rec;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (detail::fast_parse_playback(line, rec)) {
            log.add(rec);
            continue;
        }
        io::json parsed = io::json::parse(line, nullptr, false);
        if (parsed.is_discarded())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed playback record");
        try {
            log.add(playback_from_json(parsed));
        } catch (const io::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": bad playback record: " + e.what());
        }
    }
    log.seal();
    return log;
}

inline void append_playback_jsonl(io::JsonlWriter& out, const PlaybackRecord& rec) {
    std::string line = "{\"user\":";
    line += std::to_string(rec.user.value);
    line += ",\"track\":";
    line += std::to_string(rec.track);
    line += ",\"artist\":";
    line += std::to_string(rec.artist);
    line += ",\"ts\":";
    line += std::to_string(rec.ts);
    line += ",\"duration_s\":";
    line += std::to_string(static_cast<std::int64_t>(rec.duration_s));
    line += "}";
    out.write_raw(line);
}

}  // namespace tunecast::engage
