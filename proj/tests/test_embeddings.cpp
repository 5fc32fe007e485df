#include "tunecast/embeddings.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tunecast/rng.hpp"

using namespace tunecast;
using embed::EmbeddingConfig;
using embed::EmbeddingSpace;
using embed::PlaylistCorpus;

namespace {

/// Two disjoint "genres": tracks only co-listed within their own genre.
PlaylistCorpus planted_two_genre_corpus(std::size_t tracks_per_genre,
                                        std::size_t playlists_per_genre,
                                        std::size_t playlist_len, std::uint64_t seed) {
    PlaylistCorpus corpus;
    rng::Engine eng = rng::make_engine(seed, 0);
    for (int genre = 0; genre < 2; ++genre) {
        TrackId base = genre == 0 ? 0 : 1000;
        for (std::size_t p = 0; p < playlists_per_genre; ++p) {
            embed::Playlist playlist;
            for (std::size_t i = 0; i < playlist_len; ++i)
                playlist.push_back(base + rng::uniform_below(eng, tracks_per_genre));
            corpus.push_back(std::move(playlist));
        }
    }
    return corpus;
}

double mean_pairwise_cosine(const EmbeddingSpace& space, TrackId base_a, TrackId base_b,
                            std::size_t count) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < count; ++j) {
            if (base_a == base_b && j <= i) continue;
            sum += embed::cosine_similarity(space.vector_of(base_a + i),
                                            space.vector_of(base_b + j));
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

}  // namespace

TEST(Cosine, IdenticalVectorsGiveOne) {
    std::vector<float> a{0.3f, -0.7f, 2.0f};
    EXPECT_NEAR(embed::cosine_similarity(a, a), 1.0, 1e-12);
}

TEST(Cosine, OrthogonalVectorsGiveZero) {
    std::vector<float> a{1.0f, 0.0f};
    std::vector<float> b{0.0f, 1.0f};
    EXPECT_DOUBLE_EQ(embed::cosine_similarity(a, b), 0.0);
}

TEST(Cosine, HandComputedDiagonal) {
    std::vector<float> a{1.0f, 1.0f};
    std::vector<float> b{1.0f, 0.0f};
    EXPECT_NEAR(embed::cosine_similarity(a, b), 0.707107, 1e-6);
}

TEST(Cosine, ErrorsOnBadInput) {
    std::vector<float> a{1.0f, 2.0f};
    std::vector<float> b{1.0f};
    EXPECT_THROW(embed::cosine_similarity(a, b), std::invalid_argument);
    std::vector<float> zero{0.0f, 0.0f};
    EXPECT_THROW(embed::cosine_similarity(a, zero), std::invalid_argument);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
    rng::Engine eng = rng::make_engine(51, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> a(8), b(8);
        for (std::size_t i = 0; i < 8; ++i) {
            a[i] = static_cast<float>(rng::normal(eng));
            b[i] = static_cast<float>(rng::normal(eng));
        }
        double ab = embed::cosine_similarity(a, b);
        EXPECT_NEAR(ab, embed::cosine_similarity(b, a), 1e-12);
        // Power-of-two scaling is exact in float, so invariance is exact.
        std::vector<float> a_pow2 = a;
        for (float& v : a_pow2) v *= 8.0f;
        EXPECT_DOUBLE_EQ(ab, embed::cosine_similarity(a_pow2, b));
        // General positive scaling re-rounds the floats; invariance holds
        // to float precision.
        std::vector<float> a_scaled = a;
        for (float& v : a_scaled) v *= 7.5f;
        EXPECT_NEAR(ab, embed::cosine_similarity(a_scaled, b), 1e-6);
        EXPECT_GE(ab, -1.0);
        EXPECT_LE(ab, 1.0);
    }
}

TEST(Training, PlantedGenresSeparate) {
    PlaylistCorpus corpus = planted_two_genre_corpus(30, 120, 12, 3);
    EmbeddingConfig config;
    config.dim = 16;
    config.epochs = 8;
    config.seed = 5;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    double within = (mean_pairwise_cosine(space, 0, 0, 30) +
                     mean_pairwise_cosine(space, 1000, 1000, 30)) /
                    2.0;
    double across = mean_pairwise_cosine(space, 0, 1000, 30);
    EXPECT_GE(within - across, 0.2);
}

TEST(Training, RequestedDimensionHonoured) {
    PlaylistCorpus corpus = planted_two_genre_corpus(5, 10, 6, 3);
    EmbeddingConfig config;
    config.dim = 80;
    config.epochs = 1;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    EXPECT_EQ(space.dim(), 80u);
    for (TrackId t : space.vocab()) EXPECT_EQ(space.vector_of(t).size(), 80u);
}

TEST(Training, SingleTrackPlaylistsLeaveInitialisationAndWarn) {
    PlaylistCorpus corpus{{1}, {2}, {3}};
    EmbeddingConfig config;
    config.dim = 4;
    config.seed = 9;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    auto warnings = space.metadata().at("warnings").get<std::vector<std::string>>();
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("no training pairs"), std::string::npos);
    // Init vectors are reproduced exactly by re-deriving the init stream.
    rng::Engine init_eng = rng::make_engine(9, 0x696e6974);
    float scale = 0.5f / 4.0f;
    for (TrackId t : space.vocab()) {
        for (float v : space.vector_of(t)) {
            float expected = (static_cast<float>(rng::uniform(init_eng)) * 2.0f - 1.0f) * scale;
            EXPECT_FLOAT_EQ(v, expected);
        }
    }
}

TEST(Training, RejectsDegenerateInput) {
    EmbeddingConfig config;
    EXPECT_THROW(embed::train_track_embeddings({}, config), std::invalid_argument);
    config.dim = 1;
    EXPECT_THROW(embed::train_track_embeddings({{1, 2}}, config), std::invalid_argument);
}

TEST(Training, DeterministicGivenSeed) {
    PlaylistCorpus corpus = planted_two_genre_corpus(10, 30, 8, 7);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 2;
    config.seed = 42;
    EmbeddingSpace a = embed::train_track_embeddings(corpus, config);
    EmbeddingSpace b = embed::train_track_embeddings(corpus, config);
    ASSERT_EQ(a.vocab(), b.vocab());
    for (TrackId t : a.vocab()) {
        auto va = a.vector_of(t);
        auto vb = b.vector_of(t);
        for (std::size_t d = 0; d < va.size(); ++d) EXPECT_EQ(va[d], vb[d]);
    }
}

TEST(UserVector, SingletonMeanEqualsTrackVector) {
    PlaylistCorpus corpus = planted_two_genre_corpus(5, 10, 6, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 1;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    TrackId t = space.vocab()[0];
    std::vector<std::pair<TrackId, Timestamp>> listens{{t, 100}};
    embed::UserTasteVector v = embed::user_vector(UserId{1}, listens, space, 0, 1000);
    auto tv = space.vector_of(t);
    for (std::size_t d = 0; d < space.dim(); ++d) EXPECT_FLOAT_EQ(v.vector[d], tv[d]);
}

TEST(UserVector, TwoTrackMean) {
    PlaylistCorpus corpus = planted_two_genre_corpus(5, 10, 6, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 1;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    TrackId u = space.vocab()[0], w = space.vocab()[1];
    std::vector<std::pair<TrackId, Timestamp>> listens{{u, 100}, {w, 200}};
    embed::UserTasteVector v = embed::user_vector(UserId{1}, listens, space, 0, 1000);
    auto vu = space.vector_of(u);
    auto vw = space.vector_of(w);
    for (std::size_t d = 0; d < space.dim(); ++d)
        EXPECT_NEAR(v.vector[d], (vu[d] + vw[d]) / 2.0f, 1e-6);
}

TEST(UserVector, OutOfWindowListensAreCold) {
    PlaylistCorpus corpus = planted_two_genre_corpus(5, 10, 6, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 1;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    std::vector<std::pair<TrackId, Timestamp>> listens{{space.vocab()[0], 5000}};
    EXPECT_THROW(embed::user_vector(UserId{1}, listens, space, 0, 1000), ColdUserError);
}

TEST(UserVector, PermutationInvariant) {
    PlaylistCorpus corpus = planted_two_genre_corpus(8, 15, 6, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 1;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    std::vector<std::pair<TrackId, Timestamp>> listens;
    for (std::size_t i = 0; i < 6; ++i) listens.emplace_back(space.vocab()[i], 100 + i);
    embed::UserTasteVector a = embed::user_vector(UserId{1}, listens, space, 0, 1000);
    std::reverse(listens.begin(), listens.end());
    embed::UserTasteVector b = embed::user_vector(UserId{1}, listens, space, 0, 1000);
    for (std::size_t d = 0; d < space.dim(); ++d) EXPECT_FLOAT_EQ(a.vector[d], b.vector[d]);
}

TEST(UserVector, RepeatsWeightUnlessDeduped) {
    PlaylistCorpus corpus = planted_two_genre_corpus(5, 10, 6, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 1;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    TrackId u = space.vocab()[0], w = space.vocab()[1];
    std::vector<std::pair<TrackId, Timestamp>> listens{{u, 1}, {u, 2}, {w, 3}};
    embed::UserTasteVector weighted = embed::user_vector(UserId{1}, listens, space, 0, 10);
    embed::UserTasteVector deduped =
        embed::user_vector(UserId{1}, listens, space, 0, 10, true);
    auto vu = space.vector_of(u);
    auto vw = space.vector_of(w);
    for (std::size_t d = 0; d < space.dim(); ++d) {
        EXPECT_NEAR(weighted.vector[d], (2.0 * vu[d] + vw[d]) / 3.0, 1e-6);
        EXPECT_NEAR(deduped.vector[d], (vu[d] + vw[d]) / 2.0, 1e-6);
    }
}

TEST(Snapshot, TextRoundTripIsExact) {
    PlaylistCorpus corpus = planted_two_genre_corpus(10, 20, 8, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 2;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    auto dir = std::filesystem::temp_directory_path() / "tunecast_embed_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "emb.txt";
    space.save_text(path);
    EmbeddingSpace loaded = EmbeddingSpace::load_text(path);
    ASSERT_EQ(loaded.vocab(), space.vocab());
    for (TrackId t : space.vocab()) {
        auto a = space.vector_of(t);
        auto b = loaded.vector_of(t);
        for (std::size_t d = 0; d < a.size(); ++d) EXPECT_EQ(a[d], b[d]);
    }
    std::filesystem::remove_all(dir);
}

TEST(Snapshot, BinaryRoundTripIsExact) {
    PlaylistCorpus corpus = planted_two_genre_corpus(10, 20, 8, 3);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 2;
    EmbeddingSpace space = embed::train_track_embeddings(corpus, config);
    auto dir = std::filesystem::temp_directory_path() / "tunecast_embed_test_bin";
    std::filesystem::create_directories(dir);
    auto path = dir / "emb.bin";
    space.save_binary(path);
    EmbeddingSpace loaded = EmbeddingSpace::load_binary(path);
    ASSERT_EQ(loaded.vocab(), space.vocab());
    for (TrackId t : space.vocab()) {
        auto a = space.vector_of(t);
        auto b = loaded.vector_of(t);
        for (std::size_t d = 0; d < a.size(); ++d) EXPECT_EQ(a[d], b[d]);
    }
    EXPECT_EQ(loaded.metadata().at("seed"), space.metadata().at("seed"));
    std::filesystem::remove_all(dir);
}

TEST(Corpus, JsonlRoundTripAndValidation) {
    auto dir = std::filesystem::temp_directory_path() / "tunecast_corpus_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "corpus.jsonl";
    PlaylistCorpus corpus{{1, 2, 3}, {4, 5}};
    embed::save_corpus_jsonl(path, corpus);
    PlaylistCorpus loaded = embed::load_corpus_jsonl(path);
    EXPECT_EQ(loaded, corpus);
    io::write_file(path, "[]\n");
    EXPECT_THROW(embed::load_corpus_jsonl(path), DataError);
    std::filesystem::remove_all(dir);
}
