// Track embeddings trained on playlist co-occurrence (skip-gram with
// negative sampling), user taste vectors as listen-weighted means, and
// cosine geometry. Snapshots round-trip losslessly in text or binary form.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/io.hpp"
#include "tunecast/rng.hpp"

namespace tunecast::embed {

using Playlist = std::vector<TrackId>;
using PlaylistCorpus = std::vector<Playlist>;

struct EmbeddingConfig {
    std::size_t dim = 80;
    std::size_t window = 5;     // symmetric context width over playlist order
    std::size_t negatives = 5;  // negative samples per positive pair
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
    /// More than one worker enables hogwild updates, which are not
    /// deterministic; the default stays single-threaded and reproducible.
    std::size_t workers = 1;
};

/// Cosine similarity in [-1, 1]. Errors on dimension mismatch or zero norms.
inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    if (a.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

class EmbeddingSpace {
  public:
    EmbeddingSpace() = default;
    EmbeddingSpace(std::size_t dim, std::vector<TrackId> vocab, std::vector<float> data,
                   io::json metadata)
        : dim_(dim), vocab_(std::move(vocab)), data_(std::move(data)),
          metadata_(std::move(metadata)) {
        if (data_.size() != vocab_.size() * dim_)
            throw std::invalid_argument("embedding data size mismatch");
        for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
    }

    std::size_t dim() const { return dim_; }
    std::size_t vocab_size() const { return vocab_.size(); }
    const std::vector<TrackId>& vocab() const { return vocab_; }
    const io::json& metadata() const { return metadata_; }

    bool has(TrackId track) const { return index_.contains(track); }

    std::span<const float> vector_of(TrackId track) const {
        auto it = index_.find(track);
        if (it == index_.end())
            throw DataError("track not in embedding vocabulary: " + std::to_string(track));
        return {data_.data() + it->second * dim_, dim_};
    }

    /// Text form: one JSON header line, then `track v1 .. vd` rows with
    /// shortest round-trip floats, vocabulary order.
    void save_text(const std::filesystem::path& path) const {
        std::string out;
        io::json header{{"format", "tunecast-embedding-text"},
                        {"dim", dim_},
                        {"vocab_size", vocab_.size()},
                        {"metadata", metadata_}};
        out += header.dump();
        out += '\n';
        for (std::size_t i = 0; i < vocab_.size(); ++i) {
            out += std::to_string(vocab_[i]);
            for (std::size_t d = 0; d < dim_; ++d) {
                out += ' ';
                out += io::format_float(data_[i * dim_ + d]);
            }
            out += '\n';
        }
        io::write_file(path, out);
    }

    static EmbeddingSpace load_text(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open embedding file: " + path.string());
        std::string line;
        if (!std::getline(in, line)) throw DataError("empty embedding file");
        io::json header = io::json::parse(line, nullptr, false);
        if (header.is_discarded() ||
            header.value("format", "") != "tunecast-embedding-text")
            throw DataError("not a text embedding snapshot: " + path.string());
        std::size_t dim = header.at("dim").get<std::size_t>();
        std::size_t vocab_size = header.at("vocab_size").get<std::size_t>();
        std::vector<TrackId> vocab;
        vocab.reserve(vocab_size);
        std::vector<float> data;
        data.reserve(vocab_size * dim);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const char* p = line.c_str();
            char* end = nullptr;
            vocab.push_back(std::strtoull(p, &end, 10));
            p = end;
            for (std::size_t d = 0; d < dim; ++d) {
                data.push_back(std::strtof(p, &end));
                if (end == p) throw DataError("truncated embedding row");
                p = end;
            }
        }
        if (vocab.size() != vocab_size) throw DataError("embedding vocab size mismatch");
        return EmbeddingSpace(dim, std::move(vocab), std::move(data),
                              header.value("metadata", io::json::object()));
    }

    /// Binary form: magic, header JSON, then raw little-endian float32 rows.
    void save_binary(const std::filesystem::path& path) const {
        io::json header{{"dim", dim_},
                        {"vocab_size", vocab_.size()},
                        {"metadata", metadata_}};
        std::string head = header.dump();
        std::string out = "TCEMB1\n";
        std::uint64_t head_len = head.size();
        out.append(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
        out += head;
        out.append(reinterpret_cast<const char*>(vocab_.data()),
                   vocab_.size() * sizeof(TrackId));
        out.append(reinterpret_cast<const char*>(data_.data()),
                   data_.size() * sizeof(float));
        io::write_file(path, out);
    }

    static EmbeddingSpace load_binary(const std::filesystem::path& path) {
        std::string raw = io::read_file(path);
        const char magic[] = "TCEMB1\n";
        std::size_t magic_len = sizeof(magic) - 1;
        if (raw.size() < magic_len + sizeof(std::uint64_t) ||
            raw.compare(0, magic_len, magic) != 0)
            throw DataError("not a binary embedding snapshot: " + path.string());
        std::size_t off = magic_len;
        std::uint64_t head_len = 0;
        std::memcpy(&head_len, raw.data() + off, sizeof(head_len));
        off += sizeof(head_len);
        io::json header = io::json::parse(raw.substr(off, head_len));
        off += head_len;
        std::size_t dim = header.at("dim").get<std::size_t>();
        std::size_t vocab_size = header.at("vocab_size").get<std::size_t>();
        std::vector<TrackId> vocab(vocab_size);
        std::memcpy(vocab.data(), raw.data() + off, vocab_size * sizeof(TrackId));
        off += vocab_size * sizeof(TrackId);
        std::vector<float> data(vocab_size * dim);
        if (off + data.size() * sizeof(float) > raw.size())
            throw DataError("truncated binary embedding snapshot");
        std::memcpy(data.data(), raw.data() + off, data.size() * sizeof(float));
        return EmbeddingSpace(dim, std::move(vocab), std::move(data),
                              header.value("metadata", io::json::object()));
    }

  private:
    std::size_t dim_ = 0;
    std::vector<TrackId> vocab_;
    std::vector<float> data_;  // vocab-major rows
    io::json metadata_;
    std::unordered_map<TrackId, std::size_t> index_;
};

namespace detail {

inline float fast_sigmoid(float x) {
    if (x > 8.0f) return 1.0f;
    if (x < -8.0f) return 0.0f;
    return 1.0f / (1.0f + std::exp(-x));
}

struct TrainerState {
    std::vector<float> input;   // the embedding rows
    std::vector<float> output;  // context matrix, zero-initialized
    std::size_t dim = 0;
};

/// One SGNS update for (context-word input row, target output rows).
inline void sgns_update(TrainerState& st, std::size_t input_row, std::size_t positive_row,
                        const rng::DiscreteSampler& noise, rng::Engine& eng,
                        std::size_t negatives, float alpha, std::vector<float>& grad) {
    float* v_in = st.input.data() + input_row * st.dim;
    std::fill(grad.begin(), grad.end(), 0.0f);
    for (std::size_t s = 0; s <= negatives; ++s) {
        std::size_t target;
        float label;
        if (s == 0) {
            target = positive_row;
            label = 1.0f;
        } else {
            target = noise.draw(eng);
            if (target == positive_row) continue;
            label = 0.0f;
        }
        float* v_out = st.output.data() + target * st.dim;
        float dot = 0.0f;
        for (std::size_t d = 0; d < st.dim; ++d) dot += v_in[d] * v_out[d];
        float g = (label - fast_sigmoid(dot)) * alpha;
        for (std::size_t d = 0; d < st.dim; ++d) {
            grad[d] += g * v_out[d];
            v_out[d] += g * v_in[d];
        }
    }
    for (std::size_t d = 0; d < st.dim; ++d) v_in[d] += grad[d];
}

}  // namespace detail

/// Skip-gram with negative sampling over playlist contexts. Deterministic
/// with workers == 1; frequently co-listed tracks end up with higher pairwise
/// cosine than random pairs.
inline EmbeddingSpace train_track_embeddings(const PlaylistCorpus& corpus,
                                             const EmbeddingConfig& config) {
    if (corpus.empty()) throw std::invalid_argument("empty playlist corpus");
    if (config.dim < 2) throw std::invalid_argument("embedding dim must be >= 2");
    for (const Playlist& p : corpus)
        if (p.empty()) throw DataError("empty playlist in corpus");

    // Vocabulary sorted by track id so row order is reproducible.
    std::unordered_map<TrackId, std::size_t> counts;
    for (const Playlist& p : corpus)
        for (TrackId t : p) ++counts[t];
    std::vector<TrackId> vocab;
    vocab.reserve(counts.size());
    for (const auto& [track, count] : counts) vocab.push_back(track);
    std::sort(vocab.begin(), vocab.end());
    std::unordered_map<TrackId, std::uint32_t> row_of;
    row_of.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i)
        row_of.emplace(vocab[i], static_cast<std::uint32_t>(i));

    // Unigram^0.75 negative-sampling distribution.
    std::vector<double> noise_weights(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i)
        noise_weights[i] = std::pow(static_cast<double>(counts[vocab[i]]), 0.75);
    rng::DiscreteSampler noise(noise_weights);

    detail::TrainerState st;
    st.dim = config.dim;
    st.input.resize(vocab.size() * config.dim);
    st.output.assign(vocab.size() * config.dim, 0.0f);
    {
        rng::Engine init_eng = rng::make_engine(config.seed, 0x696e6974);
        float scale = 0.5f / static_cast<float>(config.dim);
        for (float& v : st.input)
            v = (static_cast<float>(rng::uniform(init_eng)) * 2.0f - 1.0f) * scale;
    }

    // Rows of (playlist, encoded positions); each worker walks a shard.
    std::vector<std::vector<std::uint32_t>> encoded(corpus.size());
    std::size_t total_positions = 0;
    std::size_t trainable_pairs = 0;
    for (std::size_t p = 0; p < corpus.size(); ++p) {
        encoded[p].reserve(corpus[p].size());
        for (TrackId t : corpus[p]) encoded[p].push_back(row_of.at(t));
        total_positions += corpus[p].size();
        if (corpus[p].size() > 1)
            trainable_pairs += corpus[p].size();  // lower bound; exact pairs vary
    }

    std::vector<std::string> warnings;
    if (trainable_pairs == 0) {
        warnings.emplace_back("no training pairs: all playlists have a single track");
        log(LogLevel::Warn, "embedding training saw no co-occurrence pairs");
    }

    const double total_steps =
        static_cast<double>(std::max<std::size_t>(1, total_positions * config.epochs));
    const float min_alpha = static_cast<float>(config.learning_rate) * 1e-4f;

    auto train_shard = [&](std::size_t first, std::size_t last, std::uint64_t stream,
                           std::size_t shard_positions) {
        rng::Engine eng = rng::make_engine(config.seed, stream);
        std::vector<float> grad(config.dim);
        std::size_t processed = 0;
        const double shard_steps = static_cast<double>(
            std::max<std::size_t>(1, shard_positions * config.epochs));
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::size_t p = first; p < last; ++p) {
                const auto& rows = encoded[p];
                for (std::size_t i = 0; i < rows.size(); ++i, ++processed) {
                    float alpha = std::max(
                        min_alpha,
                        static_cast<float>(config.learning_rate *
                                           (1.0 - static_cast<double>(processed) /
                                                      shard_steps)));
                    // Dynamic context width, as in word2vec.
                    std::size_t b =
                        1 + static_cast<std::size_t>(rng::uniform_below(
                                eng, static_cast<std::uint64_t>(config.window)));
                    std::size_t lo = i >= b ? i - b : 0;
                    std::size_t hi = std::min(rows.size(), i + b + 1);
                    for (std::size_t j = lo; j < hi; ++j) {
                        if (j == i) continue;
                        detail::sgns_update(st, rows[j], rows[i], noise, eng,
                                            config.negatives, alpha, grad);
                    }
                }
            }
        }
    };

    std::size_t workers = std::max<std::size_t>(1, config.workers);
    if (workers == 1 || corpus.size() < workers) {
        train_shard(0, corpus.size(), 0x74726169, total_positions);
    } else {
        std::vector<std::thread> threads;
        std::size_t chunk = (corpus.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            std::size_t first = w * chunk;
            std::size_t last = std::min(corpus.size(), first + chunk);
            if (first >= last) break;
            std::size_t shard_positions = 0;
            for (std::size_t p = first; p < last; ++p) shard_positions += encoded[p].size();
            threads.emplace_back(train_shard, first, last, 0x74726169 + w,
                                 shard_positions);
        }
        for (std::thread& t : threads) t.join();
    }

    io::json metadata{{"dim", config.dim},
                      {"window", config.window},
                      {"negatives", config.negatives},
                      {"epochs", config.epochs},
                      {"learning_rate", config.learning_rate},
                      {"seed", config.seed},
                      {"workers", workers},
                      {"corpus_playlists", corpus.size()},
                      {"warnings", warnings}};
    return EmbeddingSpace(config.dim, std::move(vocab), std::move(st.input),
                          std::move(metadata));
}

// ---------------------------------------------------------------------------
// User taste vectors

struct UserTasteVector {
    UserId user;
    std::vector<float> vector;
    Timestamp window_lo = 0;
    Timestamp window_hi = 0;
    std::size_t listen_count = 0;  // contributing listens
};

/// Mean of track vectors over in-window listens. Repeats weight the mean
/// unless dedup is set. Throws ColdUserError when nothing qualifies.
inline UserTasteVector user_vector(UserId user,
                                   std::span<const std::pair<TrackId, Timestamp>> listening,
                                   const EmbeddingSpace& space, Timestamp window_lo,
                                   Timestamp window_hi, bool dedup = false) {
    UserTasteVector out;
    out.user = user;
    out.window_lo = window_lo;
    out.window_hi = window_hi;
    out.vector.assign(space.dim(), 0.0f);

    std::vector<TrackId> seen;
    std::size_t used = 0;
    std::vector<double> acc(space.dim(), 0.0);
    for (const auto& [track, ts] : listening) {
        if (ts < window_lo || ts >= window_hi) continue;
        if (!space.has(track)) continue;
        if (dedup) {
            if (std::find(seen.begin(), seen.end(), track) != seen.end()) continue;
            seen.push_back(track);
        }
        std::span<const float> v = space.vector_of(track);
        for (std::size_t d = 0; d < space.dim(); ++d) acc[d] += v[d];
        ++used;
    }
    if (used == 0)
        throw ColdUserError("no in-window listens of known tracks for user " +
                            std::to_string(user.value));
    for (std::size_t d = 0; d < space.dim(); ++d)
        out.vector[d] = static_cast<float>(acc[d] / static_cast<double>(used));
    out.listen_count = used;
    return out;
}

// ---------------------------------------------------------------------------
// Corpus JSONL: one playlist per line, either a bare array of track ids or
// {"tracks": [...]}.

inline PlaylistCorpus load_corpus_jsonl(const std::filesystem::path& path) {
    io::JsonlReader in(path);
    PlaylistCorpus corpus;
    io::json record;
    while (in.next(record)) {
        const io::json* arr = &record;
        if (record.is_object()) {
            if (!record.contains("tracks"))
                throw DataError(in.path() + ": playlist object lacks 'tracks'");
            arr = &record.at("tracks");
        }
        if (!arr->is_array() || arr->empty())
            throw DataError(in.path() + ":" + std::to_string(in.line()) +
                            ": playlist must be a non-empty array");
        Playlist p;
        p.reserve(arr->size());
        for (const io::json& t : *arr) p.push_back(t.get<TrackId>());
        corpus.push_back(std::move(p));
    }
    if (corpus.empty()) throw DataError("empty playlist corpus: " + path.string());
    return corpus;
}

inline void save_corpus_jsonl(const std::filesystem::path& path,
                              const PlaylistCorpus& corpus) {
    io::JsonlWriter out(path);
    for (const Playlist& p : corpus) {
        std::string line = "[";
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i > 0) line += ',';
            line += std::to_string(p[i]);
        }
        line += "]";
        out.write_raw(line);
    }
}

}  // namespace tunecast::embed
