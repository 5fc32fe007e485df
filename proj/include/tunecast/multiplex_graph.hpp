// Three-layer temporal interaction network with strict as-of-time queries.
//
// Layer weights follow interaction-count semantics: L[layer](i,j) as of time t
// is the number of events from i to j with timestamp strictly before t.
// Undirected layers store canonicalized pairs, so weights are symmetric.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tunecast/common.hpp"
#include "tunecast/io.hpp"

namespace tunecast::net {

enum class LayerKind : int { SocialListening = 0, CollabPlaylist = 1, LinkShare = 2 };

constexpr int kLayerCount = 3;

constexpr bool is_directed(LayerKind layer) { return layer == LayerKind::LinkShare; }

inline std::string_view layer_name(LayerKind layer) {
    switch (layer) {
        case LayerKind::SocialListening: return "listening";
        case LayerKind::CollabPlaylist: return "playlist";
        case LayerKind::LinkShare: return "share";
    }
    throw std::invalid_argument("unknown layer");
}

inline LayerKind layer_from_name(std::string_view name) {
    if (name == "listening") return LayerKind::SocialListening;
    if (name == "playlist") return LayerKind::CollabPlaylist;
    if (name == "share") return LayerKind::LinkShare;
    throw DataError("unknown layer name: " + std::string(name));
}

struct InteractionEvent {
    LayerKind layer = LayerKind::SocialListening;
    UserId src;
    UserId dst;
    Timestamp ts = 0;
};

namespace detail {

struct PairKey {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    friend bool operator==(const PairKey&, const PairKey&) = default;
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const noexcept {
        std::uint64_t h = k.a * 0x9e3779b97f4a7c15ULL;
        h ^= k.b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

}  // namespace detail

/// Event log for one layer: per-pair timestamp lists plus per-node adjacency
/// and (for the directed layer) per-node event-timestamp lists for degrees.
class Layer {
  public:
    explicit Layer(bool directed) : directed_(directed) {}

    void add(UserId src, UserId dst, Timestamp ts) {
        detail::PairKey key = pair_key(src, dst);
        pair_events_[key].push_back(ts);
        note_neighbor(out_adj_, key_src(src, dst), key_dst(src, dst), ts);
        if (directed_) {
            note_neighbor(in_adj_, dst, src, ts);
            out_events_[src].push_back(ts);
            in_events_[dst].push_back(ts);
        } else {
            note_neighbor(out_adj_, key_dst(src, dst), key_src(src, dst), ts);
        }
        ++event_count_;
    }

    void seal() {
        for (auto& [key, v] : pair_events_) std::sort(v.begin(), v.end());
        for (auto& [node, v] : out_events_) std::sort(v.begin(), v.end());
        for (auto& [node, v] : in_events_) std::sort(v.begin(), v.end());
    }

    std::size_t weight_before(UserId i, UserId j, Timestamp as_of) const {
        auto it = pair_events_.find(pair_key(i, j));
        if (it == pair_events_.end()) return 0;
        const std::vector<Timestamp>& ts = it->second;
        return static_cast<std::size_t>(
            std::lower_bound(ts.begin(), ts.end(), as_of) - ts.begin());
    }

    bool any_before(UserId i, UserId j, Timestamp as_of) const {
        auto it = pair_events_.find(pair_key(i, j));
        return it != pair_events_.end() && !it->second.empty() &&
               it->second.front() < as_of;
    }

    /// Neighbors with at least one event (from i, for the directed layer)
    /// strictly before as_of.
    template <typename Fn>
    void for_each_out_neighbor(UserId i, Timestamp as_of, Fn&& fn) const {
        auto it = out_adj_.find(i);
        if (it == out_adj_.end()) return;
        for (const auto& [neighbor, first_ts] : it->second)
            if (first_ts < as_of) fn(neighbor);
    }

    template <typename Fn>
    void for_each_in_neighbor(UserId i, Timestamp as_of, Fn&& fn) const {
        const auto& adj = directed_ ? in_adj_ : out_adj_;
        auto it = adj.find(i);
        if (it == adj.end()) return;
        for (const auto& [neighbor, first_ts] : it->second)
            if (first_ts < as_of) fn(neighbor);
    }

    std::size_t out_degree_before(UserId i, Timestamp as_of) const {
        return count_before(out_events_, i, as_of);
    }

    std::size_t in_degree_before(UserId i, Timestamp as_of) const {
        return count_before(in_events_, i, as_of);
    }

    std::size_t event_count() const { return event_count_; }

    /// Canonical (src, dst, ts) triples sorted for snapshot emission.
    std::vector<std::tuple<std::uint64_t, std::uint64_t, Timestamp>> sorted_events() const {
        std::vector<std::tuple<std::uint64_t, std::uint64_t, Timestamp>> out;
        out.reserve(event_count_);
        for (const auto& [key, ts_list] : pair_events_)
            for (Timestamp ts : ts_list) out.emplace_back(key.a, key.b, ts);
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    using Adjacency = std::unordered_map<UserId, std::unordered_map<UserId, Timestamp>>;

    static void note_neighbor(Adjacency& adj, UserId node, UserId neighbor,
                              Timestamp ts) {
        auto [it, inserted] = adj[node].try_emplace(neighbor, ts);
        if (!inserted) it->second = std::min(it->second, ts);
    }

    static std::size_t count_before(
        const std::unordered_map<UserId, std::vector<Timestamp>>& events, UserId i,
        Timestamp as_of) {
        auto it = events.find(i);
        if (it == events.end()) return 0;
        return static_cast<std::size_t>(
            std::lower_bound(it->second.begin(), it->second.end(), as_of) -
            it->second.begin());
    }

    detail::PairKey pair_key(UserId i, UserId j) const {
        if (directed_) return {i.value, j.value};
        return {std::min(i.value, j.value), std::max(i.value, j.value)};
    }
    UserId key_src(UserId src, UserId) const { return src; }
    UserId key_dst(UserId, UserId dst) const { return dst; }

    bool directed_;
    std::size_t event_count_ = 0;
    std::unordered_map<detail::PairKey, std::vector<Timestamp>, detail::PairKeyHash>
        pair_events_;
    // out_adj_ doubles as the undirected adjacency (both endpoints noted).
    Adjacency out_adj_;
    Adjacency in_adj_;
    std::unordered_map<UserId, std::vector<Timestamp>> out_events_;
    std::unordered_map<UserId, std::vector<Timestamp>> in_events_;
};

class MultiplexNetwork {
  public:
    MultiplexNetwork()
        : layers_{Layer(false), Layer(false), Layer(true)} {}

    /// Build-phase ingestion; duplicate events count twice by design.
    void ingest_event(const InteractionEvent& ev) {
        if (sealed_ || streaming_) throw std::logic_error("ingest after seal");
        validate_event(ev);
        layer(ev.layer).add(ev.src, ev.dst, ev.ts);
        users_.insert(ev.src);
        users_.insert(ev.dst);
    }

    /// Streaming insert with non-decreasing timestamps; the network stays
    /// queryable after every insert. Used by as-ingested replays.
    void ingest_ordered(const InteractionEvent& ev) {
        if (sealed_) throw std::logic_error("ingest after seal");
        validate_event(ev);
        if (ev.ts < last_ordered_ts_)
            throw std::logic_error("ingest_ordered: timestamps must be non-decreasing");
        last_ordered_ts_ = ev.ts;
        streaming_ = true;
        layer(ev.layer).add(ev.src, ev.dst, ev.ts);
        users_.insert(ev.src);
        users_.insert(ev.dst);
    }

    /// Freezes the network; queries are read-only and thread-safe afterwards.
    void seal() {
        if (!streaming_)
            for (Layer& l : layers_) l.seal();
        sealed_ = true;
    }

    bool sealed() const { return sealed_; }

    /// L[layer](i,j) counting events strictly before as_of.
    std::size_t layer_weight(LayerKind kind, UserId i, UserId j, Timestamp as_of) const {
        require_sealed();
        return layer(kind).weight_before(i, j, as_of);
    }

    std::size_t link_in_degree(UserId i, Timestamp as_of) const {
        require_sealed();
        return layer(LayerKind::LinkShare).in_degree_before(i, as_of);
    }

    std::size_t link_out_degree(UserId i, Timestamp as_of) const {
        require_sealed();
        return layer(LayerKind::LinkShare).out_degree_before(i, as_of);
    }

    /// Friendship: an undirected-layer interaction, or link shares in both
    /// directions, all strictly before as_of.
    bool is_friend(UserId i, UserId u, Timestamp as_of) const {
        require_sealed();
        if (i == u) return false;
        if (layer(LayerKind::SocialListening).any_before(i, u, as_of)) return true;
        if (layer(LayerKind::CollabPlaylist).any_before(i, u, as_of)) return true;
        const Layer& link = layer(LayerKind::LinkShare);
        return link.any_before(i, u, as_of) && link.any_before(u, i, as_of);
    }

    /// All friends of i as of the given time, sorted by id. Unknown users
    /// yield an empty set.
    std::vector<UserId> friends(UserId i, Timestamp as_of) const {
        require_sealed();
        std::vector<UserId> result;
        auto consider = [&](UserId u) {
            if (u != i) result.push_back(u);
        };
        layer(LayerKind::SocialListening).for_each_out_neighbor(i, as_of, consider);
        layer(LayerKind::CollabPlaylist).for_each_out_neighbor(i, as_of, consider);
        const Layer& link = layer(LayerKind::LinkShare);
        link.for_each_out_neighbor(i, as_of, [&](UserId u) {
            if (u != i && link.any_before(u, i, as_of)) result.push_back(u);
        });
        std::sort(result.begin(), result.end());
        result.erase(std::unique(result.begin(), result.end()), result.end());
        return result;
    }

    /// Fraction of friend pairs that are themselves friends; 0 with fewer
    /// than two friends (degenerate case flagged via `defined`).
    double clustering_coefficient(UserId i, Timestamp as_of,
                                  bool* defined = nullptr) const {
        std::vector<UserId> fs = friends(i, as_of);
        const std::size_t k = fs.size();
        if (k < 2) {
            if (defined != nullptr) *defined = false;
            return 0.0;
        }
        if (defined != nullptr) *defined = true;
        std::size_t connected = 0;
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b)
                if (is_friend(fs[a], fs[b], as_of)) ++connected;
        return static_cast<double>(connected) /
               (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
    }

    /// Jaccard overlap of the two friend sets, excluding the endpoints
    /// themselves; 0 when the union is empty.
    double edge_overlap(UserId i, UserId j, Timestamp as_of) const {
        std::vector<UserId> fi = friends(i, as_of);
        std::vector<UserId> fj = friends(j, as_of);
        auto drop = [&](std::vector<UserId>& v) {
            std::erase_if(v, [&](UserId u) { return u == i || u == j; });
        };
        drop(fi);
        drop(fj);
        std::vector<UserId> inter, uni;
        std::set_intersection(fi.begin(), fi.end(), fj.begin(), fj.end(),
                              std::back_inserter(inter));
        std::set_union(fi.begin(), fi.end(), fj.begin(), fj.end(),
                       std::back_inserter(uni));
        if (uni.empty()) return 0.0;
        return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    }

    /// Distinct counterparties across all layers, any direction, any time.
    std::vector<UserId> all_neighbors(UserId i) const {
        require_sealed();
        constexpr Timestamp far_future = std::numeric_limits<Timestamp>::max();
        std::vector<UserId> result;
        auto consider = [&](UserId u) {
            if (u != i) result.push_back(u);
        };
        for (const Layer& l : layers_) {
            l.for_each_out_neighbor(i, far_future, consider);
            l.for_each_in_neighbor(i, far_future, consider);
        }
        std::sort(result.begin(), result.end());
        result.erase(std::unique(result.begin(), result.end()), result.end());
        return result;
    }

    std::size_t event_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers_) n += l.event_count();
        return n;
    }

    std::size_t user_count() const { return users_.size(); }

    /// Lossless snapshot: canonical JSONL, one event per line, sorted by
    /// (layer, src, dst, ts). Same schema as the raw interaction log.
    void save_jsonl(const std::filesystem::path& path) const {
        io::JsonlWriter out(path);
        for (int k = 0; k < kLayerCount; ++k) {
            LayerKind kind = static_cast<LayerKind>(k);
            for (const auto& [src, dst, ts] : layers_[static_cast<std::size_t>(k)].sorted_events()) {
                std::string line = "{\"layer\":\"";
                line += layer_name(kind);
                line += "\",\"src\":";
                line += std::to_string(src);
                line += ",\"dst\":";
                line += std::to_string(dst);
                line += ",\"ts\":";
                line += std::to_string(ts);
                line += "}";
                out.write_raw(line);
            }
        }
    }

    static MultiplexNetwork load_jsonl(const std::filesystem::path& path) {
        MultiplexNetwork net;
        io::JsonlReader in(path);
        io::json record;
        while (in.next(record)) {
            try {
                InteractionEvent ev;
                ev.layer = layer_from_name(record.at("layer").get<std::string>());
                ev.src = UserId{record.at("src").get<std::uint64_t>()};
                ev.dst = UserId{record.at("dst").get<std::uint64_t>()};
                ev.ts = record.at("ts").get<Timestamp>();
                net.ingest_event(ev);
            } catch (const io::json::exception& e) {
                throw DataError(in.path() + ":" + std::to_string(in.line()) +
                                ": bad interaction record: " + e.what());
            }
        }
        net.seal();
        return net;
    }

  private:
    Layer& layer(LayerKind kind) { return layers_[static_cast<std::size_t>(kind)]; }
    const Layer& layer(LayerKind kind) const {
        return layers_[static_cast<std::size_t>(kind)];
    }
    void require_sealed() const {
        if (!sealed_ && !streaming_)
            throw std::logic_error("network queried before seal()");
    }

    static void validate_event(const InteractionEvent& ev) {
        if (ev.src == ev.dst)
            throw DataError("self-loop interaction rejected (user " +
                            std::to_string(ev.src.value) + ")");
    }

    std::array<Layer, 3> layers_;
    std::unordered_set<UserId> users_;
    Timestamp last_ordered_ts_ = std::numeric_limits<Timestamp>::min();
    bool sealed_ = false;
    bool streaming_ = false;
};

}  // namespace tunecast::net
