// Common identifier types, error categories, time helpers and logging.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>

namespace tunecast {

/// Opaque 64-bit user identifier.
struct UserId {
    std::uint64_t value = 0;

    friend auto operator<=>(const UserId&, const UserId&) = default;
};

using TrackId = std::uint64_t;
using AlbumId = std::uint64_t;
using ArtistId = std::uint64_t;

/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

/// UTC calendar day index (floor of timestamp / 86400).
using DayIndex = std::int64_t;

constexpr std::int64_t kSecondsPerDay = 86400;

/// Floor division so negative timestamps bucket into the correct UTC day.
constexpr DayIndex day_of(Timestamp ts) {
    std::int64_t q = ts / kSecondsPerDay;
    std::int64_t r = ts % kSecondsPerDay;
    return (r < 0) ? q - 1 : q;
}

constexpr Timestamp day_start(DayIndex day) { return day * kSecondsPerDay; }

/// Invalid or contradictory configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. CLI exit code 3.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A user with no qualifying listening history; distinct from a zero vector.
class ColdUserError : public DataError {
  public:
    using DataError::DataError;
};

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

namespace detail {
inline LogLevel log_threshold() {
    static LogLevel level = [] {
        const char* env = std::getenv("TUNECAST_LOG");
        if (env == nullptr) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        return LogLevel::Info;
    }();
    return level;
}
}  // namespace detail

/// Logs to stderr only, so artifact bytes stay independent of verbosity.
template <typename... Args>
void log(LogLevel level, const char* fmt, Args... args) {
    if (level < detail::log_threshold()) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::fprintf(stderr, "[tunecast %s] ", names[static_cast<int>(level)]);
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

inline void log(LogLevel level, const char* msg) { log(level, "%s", msg); }

}  // namespace tunecast

template <>
struct std::hash<tunecast::UserId> {
    std::size_t operator()(const tunecast::UserId& id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
