#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "ants/errors.hpp"
#include "ants/model.hpp"
#include "support/test_support.hpp"

using namespace ants;
using ants::testkit::TempDir;

namespace {

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) {
        s += static_cast<double>(x) * x;
    }
    return std::sqrt(s);
}

} // namespace

TEST(EmbeddingMatrix, NormalizesRows) {
    EmbeddingMatrix m({2.0F, 2.0F, 2.0F, 2.0F, 0.5F, 0.5F, 0.5F, 0.5F}, 4, {"a", "b"});
    for (std::size_t r = 0; r < 2; ++r) {
        EXPECT_NEAR(norm(m.row(r)), 1.0, 1e-7);
    }
    EXPECT_EQ(m.row(0)[0], 0.5F);
}

TEST(EmbeddingFile, LoadNormalizesRawRows) {
    TempDir dir("model");
    const auto file = dir / "raw.nspc";
    {
        std::ofstream out(file, std::ios::binary);
        const std::uint32_t version = 1, dim = 4;
        const std::uint64_t rows = 2;
        out.write("NSPC", 4);
        out.write(reinterpret_cast<const char*>(&version), 4);
        out.write(reinterpret_cast<const char*>(&rows), 8);
        out.write(reinterpret_cast<const char*>(&dim), 4);
        for (float x : {3.0F, 3.0F, 3.0F, 3.0F, 0.5F, 0.5F, 0.5F, 0.5F}) {
            out.write(reinterpret_cast<const char*>(&x), 4);
        }
    }
    testkit::write_bytes(sidecar_path(file), R"(["p","q"])");
    const auto m = load_embeddings(file);
    ASSERT_EQ(m.rows(), 2U);
    EXPECT_NEAR(norm(m.row(0)), 1.0, 1e-7);
    EXPECT_NEAR(norm(m.row(1)), 1.0, 1e-7);
    EXPECT_EQ(m.id(1), "q");
}

TEST(EmbeddingMatrix, RejectsBadData) {
    EXPECT_THROW(EmbeddingMatrix({1.0F, NAN}, 2, {"a"}), DataError);
    EXPECT_THROW(EmbeddingMatrix({0.0F, 0.0F}, 2, {"a"}), DataError);
    EXPECT_THROW(EmbeddingMatrix({1.0F, 0.0F, 0.0F, 1.0F}, 2, {"a", "a"}), DataError);
    EXPECT_THROW(EmbeddingMatrix({1.0F, 0.0F}, 2, {"a", "b"}), DataError);
    EXPECT_THROW(EmbeddingMatrix({1.0F, 0.0F}, 0, {}), DataError);
}

TEST(EmbeddingMatrix, NormalizationIsIdempotent) {
    std::mt19937_64 rng(7);
    const auto m = testkit::random_matrix(rng, 20, 16);
    const EmbeddingMatrix again(std::vector<float>(m.data().begin(), m.data().end()), m.dim(),
                                m.ids());
    EXPECT_EQ(m, again);
}

TEST(EmbeddingMatrix, SelectAndRelabel) {
    std::mt19937_64 rng(3);
    const auto m = testkit::random_matrix(rng, 5, 4);
    const std::vector<std::size_t> rows{4, 1};
    const auto s = m.select(rows);
    ASSERT_EQ(s.rows(), 2U);
    EXPECT_EQ(s.id(0), "r4");
    EXPECT_TRUE(std::equal(s.row(1).begin(), s.row(1).end(), m.row(1).begin()));
    const auto r = s.relabeled({"x", "y"});
    EXPECT_EQ(r.id(1), "y");
    EXPECT_TRUE(std::equal(r.data().begin(), r.data().end(), s.data().begin()));
}

TEST(Cosine, IdentityAndAntipodal) {
    std::mt19937_64 rng(11);
    const auto m = testkit::random_matrix(rng, 1, 32);
    std::vector<float> neg(m.row(0).begin(), m.row(0).end());
    for (auto& x : neg) {
        x = -x;
    }
    EXPECT_NEAR(cosine(m.row(0), m.row(0)), 1.0, 1e-7);
    EXPECT_NEAR(cosine(m.row(0), neg), -1.0, 1e-7);
    EXPECT_LE(cosine(m.row(0), m.row(0)), 1.0);
    const std::vector<float> short_vec(3, 1.0F);
    EXPECT_THROW(cosine(m.row(0), short_vec), DimError);
}

TEST(Cosine, MatchesExtendedPrecisionOracle) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 500; ++t) {
        const auto m = testkit::random_matrix(rng, 2, 64);
        const long double want = testkit::dot_oracle(m.row(0), m.row(1));
        EXPECT_LT(std::fabs(static_cast<long double>(cosine(m.row(0), m.row(1))) - want), 1e-12L);
    }
}

TEST(EmbeddingFile, RoundTripIsBitwise) {
    TempDir dir("model");
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto m = testkit::random_matrix(rng, 1 + t * 7, 3 + t);
        const auto file = dir / ("m" + std::to_string(t) + ".nspc");
        save_embeddings(file, m);
        const auto back = load_embeddings(file);
        EXPECT_EQ(back, m);
        save_embeddings(file, back);
        EXPECT_EQ(load_embeddings(file), m);
    }
}

TEST(EmbeddingFile, RejectsBadHeaderAndPayload) {
    TempDir dir("model");
    std::mt19937_64 rng(5);
    const auto m = testkit::random_matrix(rng, 3, 4);
    const auto file = dir / "m.nspc";
    save_embeddings(file, m);
    auto bytes = testkit::read_bytes(file);

    auto bad = bytes;
    bad[0] = 'X';
    testkit::write_bytes(file, bad);
    EXPECT_THROW(load_embeddings(file), FormatError);

    testkit::write_bytes(file, bytes.substr(0, bytes.size() - 2));
    EXPECT_THROW(load_embeddings(file), FormatError);

    testkit::write_bytes(file, bytes);
    EXPECT_THROW(load_embeddings(file, 5), DataError);
    EXPECT_EQ(load_embeddings(file, 4), m);

    EXPECT_THROW(load_embeddings(dir / "missing.nspc"), IoError);
}

TEST(EmbeddingFile, RejectsSidecarMismatch) {
    TempDir dir("model");
    std::mt19937_64 rng(6);
    const auto file = dir / "m.nspc";
    save_embeddings(file, testkit::random_matrix(rng, 3, 4));
    testkit::write_bytes(sidecar_path(file), R"(["a","b"])");
    EXPECT_THROW(load_embeddings(file), DataError);
}

TEST(LabelSpace, ContainsIsCaseAndSpaceInsensitive) {
    std::mt19937_64 rng(1);
    LabelSpace ids({"golden retriever", "cat"}, testkit::random_matrix(rng, 2, 8));
    EXPECT_TRUE(ids.contains("  Golden   Retriever "));
    EXPECT_FALSE(ids.contains("retriever"));
    EXPECT_THROW(LabelSpace({"a", "A"}, testkit::random_matrix(rng, 2, 8)), DataError);
    EXPECT_THROW(LabelSpace({"a"}, testkit::random_matrix(rng, 1, 8), "no placeholder"), DataError);
}

TEST(LabelSpace, ManifestRoundTrip) {
    TempDir dir("model");
    std::mt19937_64 rng(2);
    LabelSpace ids({"cat", "dog", "owl"}, testkit::random_matrix(rng, 3, 8), "a photo of a <label>");
    save_label_space(dir / "labels.json", ids, dir / "labels.nspc");
    const auto back = load_label_space(dir / "labels.json");
    EXPECT_EQ(back.labels(), ids.labels());
    EXPECT_EQ(back.features(), ids.features());
    EXPECT_EQ(back.prompt_template(), "a photo of a <label>");
}

TEST(NegativeSpace, DisjointnessAndGroups) {
    std::mt19937_64 rng(4);
    LabelSpace ids({"cat", "dog"}, testkit::random_matrix(rng, 2, 8));
    NegativeSpace ok(NegativeKind::NL, {"x", "y", "z"}, testkit::random_matrix(rng, 3, 8), 2);
    EXPECT_EQ(ok.group_count(), 2U);
    EXPECT_NO_THROW(ok.check_disjoint(ids));
    NegativeSpace bad(NegativeKind::VSNL, {"x", "Cat"}, testkit::random_matrix(rng, 2, 8), 1);
    EXPECT_THROW(bad.check_disjoint(ids), DataError);
    NegativeSpace wrong_dim(NegativeKind::ENS, {"x"}, testkit::random_matrix(rng, 1, 4), 1);
    EXPECT_THROW(wrong_dim.check_disjoint(ids), DimError);
    EXPECT_THROW(NegativeSpace(NegativeKind::NL, {"x"}, testkit::random_matrix(rng, 1, 8), 0),
                 ConfigError);
}

TEST(Enums, StringRoundTrip) {
    for (auto k : {NegativeKind::NL, NegativeKind::ENS, NegativeKind::VSNL}) {
        EXPECT_EQ(negative_kind_from_string(to_string(k)), k);
    }
    EXPECT_EQ(tag_from_string(to_string(Tag::OOD)), Tag::OOD);
    EXPECT_THROW(tag_from_string("maybe"), FormatError);
}
