// File plumbing: JSONL streams, CSV emission, round-trippable float text,
// and the FNV-1a hash used to stamp artifacts.
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "tunecast/common.hpp"

namespace tunecast::io {

using json = nlohmann::json;

/// Shortest round-trip decimal form of a double (std::to_chars).
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

inline std::string format_float(float v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_float failed");
    return std::string(buf, ptr);
}

/// 64-bit FNV-1a; stamps artifacts with a config fingerprint (not security).
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return std::string(buf);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write: " + path.string());
}

/// Streams one JSON object per line. Blank lines are skipped.
class JsonlReader {
  public:
    explicit JsonlReader(const std::filesystem::path& path)
        : path_(path.string()), in_(path) {
        if (!in_) throw DataError("cannot open JSONL file: " + path_);
    }

    bool next(json& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            json parsed = json::parse(line, nullptr, false);
            if (parsed.is_discarded())
                throw DataError(path_ + ":" + std::to_string(line_no_) +
                                ": malformed JSON line");
            out = std::move(parsed);
            return true;
        }
        return false;
    }

    const std::string& path() const { return path_; }
    std::size_t line() const { return line_no_; }

  private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

class JsonlWriter {
  public:
    explicit JsonlWriter(const std::filesystem::path& path) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw DataError("cannot write JSONL file: " + path.string());
    }

    void write(const json& record) {
        out_ << record.dump() << '\n';
        if (!out_) throw DataError("JSONL write failed");
    }

    void write_raw(std::string_view line) {
        out_ << line << '\n';
        if (!out_) throw DataError("JSONL write failed");
    }

  private:
    std::ofstream out_;
};

/// CSV with an optional leading `# key=value` stamp line. Doubles are written
/// in shortest round-trip form so reruns are byte-identical.
class CsvWriter {
  public:
    explicit CsvWriter(const std::filesystem::path& path) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw DataError("cannot write CSV file: " + path.string());
    }

    void comment(const std::string& text) { out_ << "# " << text << '\n'; }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        if (!out_) throw DataError("CSV write failed");
    }

  private:
    std::ofstream out_;
};

/// Minimal CSV reader for the project's own artifacts: no quoting, `#`
/// comment lines skipped, header row first.
class CsvReader {
  public:
    explicit CsvReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
        if (!in_) throw DataError("cannot open CSV file: " + path_);
    }

    bool next(std::vector<std::string>& cells) {
        std::string line;
        while (std::getline(in_, line)) {
            if (line.empty() || line[0] == '#') continue;
            cells.clear();
            std::size_t start = 0;
            while (true) {
                std::size_t comma = line.find(',', start);
                if (comma == std::string::npos) {
                    cells.push_back(line.substr(start));
                    break;
                }
                cells.push_back(line.substr(start, comma - start));
                start = comma + 1;
            }
            return true;
        }
        return false;
    }

  private:
    std::ifstream in_;
    std::string path_;
};

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("bad numeric field: " + s);
    return v;
}

inline std::int64_t parse_int(const std::string& s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("bad integer field: " + s);
    return v;
}

}  // namespace tunecast::io
