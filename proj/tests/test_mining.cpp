#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ants/errors.hpp"
#include "ants/mining.hpp"
#include "support/test_support.hpp"

using namespace ants;

TEST(RatioCount, FloorWithMinimumOne) {
    EXPECT_EQ(ratio_count(0.5, 0), 0U);
    EXPECT_EQ(ratio_count(0.5, 1), 1U);
    EXPECT_EQ(ratio_count(0.5, 4), 2U);
    EXPECT_EQ(ratio_count(0.5, 5), 2U);
    EXPECT_EQ(ratio_count(0.01, 50), 1U);
    EXPECT_EQ(ratio_count(0.29, 100), 29U);
    EXPECT_EQ(ratio_count(0.99, 3), 2U);
    for (std::size_t k = 1; k < 100; ++k) {
        for (std::size_t n : {1U, 7U, 100U, 1000U, 12345U}) {
            const std::size_t want = std::max<std::size_t>(1, k * n / 100);
            ASSERT_EQ(ratio_count(static_cast<double>(k) / 100.0, n), want) << k << " " << n;
        }
    }
}

TEST(SelectNegatives, WorkedExample) {
    const std::vector<double> s{0.95, 0.2, 0.5, 0.1, 0.8};
    const auto m = select_negatives(s, 0.9, 0.5);
    EXPECT_EQ(m.positions, (std::vector<std::size_t>{3, 1}));
    ASSERT_TRUE(m.gamma_star.has_value());
    EXPECT_EQ(*m.gamma_star, 0.2);
}

TEST(SelectNegatives, EdgeCases) {
    const std::vector<double> high{0.95, 0.9, 0.99};
    const auto none = select_negatives(high, 0.9, 0.5);
    EXPECT_TRUE(none.empty());
    EXPECT_FALSE(none.gamma_star.has_value());

    const std::vector<double> one{0.95, 0.3};
    const auto single = select_negatives(one, 0.9, 0.999);
    EXPECT_EQ(single.positions, std::vector<std::size_t>{1});
    EXPECT_EQ(*single.gamma_star, 0.3);

    EXPECT_TRUE(select_negatives({}, 0.9, 0.5).empty());
}

TEST(SelectNegatives, TiesKeepStreamOrder) {
    const std::vector<double> s{0.4, 0.2, 0.4, 0.2, 0.4, 0.1};
    const auto m = select_negatives(s, 0.9, 0.67);
    // Candidates: all six; keep 4 = {5, 1, 3, 0}.
    EXPECT_EQ(m.positions, (std::vector<std::size_t>{5, 1, 3, 0}));
    EXPECT_EQ(*m.gamma_star, 0.4);
}

TEST(SelectNegatives, RandomLaws) {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> s(1 + rng() % 200);
        for (auto& x : s) {
            x = static_cast<double>(rng() % 21) / 20.0;
        }
        const double eta = static_cast<double>(1 + rng() % 99) / 100.0;
        const auto m = select_negatives(s, 0.9, eta);

        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] < 0.9) {
                cand.push_back(i);
            }
        }
        if (cand.empty()) {
            ASSERT_TRUE(m.empty());
            continue;
        }
        std::stable_sort(cand.begin(), cand.end(), [&](auto a, auto b) { return s[a] < s[b]; });
        const std::size_t k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(eta * 100)) * cand.size() / 100);
        cand.resize(k);
        ASSERT_EQ(m.positions, cand);
        ASSERT_EQ(*m.gamma_star, s[cand.back()]);
    }
}

TEST(SimilarClasses, WorkedExample) {
    const std::vector<std::size_t> preds{0, 0, 0, 0, 0, 1, 1, 1, 2, 2};
    const auto sub = similar_classes(preds, 5, 0.4);
    EXPECT_EQ(sub.class_indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(sub.frequencies, (std::vector<double>{0.5, 0.3, 0.2, 0.0, 0.0}));
}

TEST(SimilarClasses, MinimumOneAndDegenerate) {
    const std::vector<std::size_t> preds{2, 1, 2};
    EXPECT_EQ(similar_classes(preds, 5, 0.1).class_indices, std::vector<std::size_t>{2});
    const std::vector<std::size_t> mono(7, 3);
    EXPECT_EQ(similar_classes(mono, 5, 0.6).class_indices.front(), 3U);
    // Ties: lower index first.
    const std::vector<std::size_t> tie{4, 1, 4, 1};
    EXPECT_EQ(similar_classes(tie, 5, 0.4).class_indices, (std::vector<std::size_t>{1, 4}));
    EXPECT_THROW(similar_classes({}, 5, 0.4), InputError);
    EXPECT_THROW(similar_classes(std::vector<std::size_t>{5}, 5, 0.4), InputError);
}

TEST(ClassifyId, IdentityTiesAndOracle) {
    std::mt19937_64 rng(10);
    auto feats = testkit::random_matrix(rng, 6, 12);
    LabelSpace ids({"a", "b", "c", "d", "e", "f"}, feats);
    EXPECT_EQ(classify_id(feats.row(3), ids), 3U);

    std::vector<float> dup(feats.data().begin(), feats.data().end());
    std::copy(feats.row(2).begin(), feats.row(2).end(), dup.begin() + 5 * 12);
    LabelSpace dup_ids({"a", "b", "c", "d", "e", "f"}, EmbeddingMatrix(dup, 12, feats.ids()));
    EXPECT_EQ(classify_id(feats.row(2), dup_ids), 2U);

    for (int t = 0; t < 200; ++t) {
        const auto v = testkit::random_matrix(rng, 1, 12, "v");
        std::size_t best = 0;
        long double best_sim = -2;
        for (std::size_t c = 0; c < 6; ++c) {
            const auto s = testkit::dot_oracle(v.row(0), feats.row(c));
            if (s > best_sim) {
                best_sim = s;
                best = c;
            }
        }
        EXPECT_EQ(classify_id(v.row(0), ids), best);
    }
}

namespace {

EmbeddingMatrix batch(std::size_t n, std::size_t first, std::size_t dim = 4) {
    std::vector<float> data(n * dim, 0.0F);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        data[i * dim + (first + i) % dim] = 1.0F;
        ids.push_back("img" + std::to_string(first + i));
    }
    return {std::move(data), dim, std::move(ids)};
}

void append(HistoryCache& c, std::size_t n, std::size_t first) {
    const std::vector<double> s(n, 0.5);
    const std::vector<std::size_t> p(n, 0);
    c.append(batch(n, first), s, p);
}

} // namespace

TEST(HistoryCache, UnderAndOverCapacity) {
    HistoryCache small(4, 10, 1);
    append(small, 4, 0);
    append(small, 4, 4);
    EXPECT_EQ(small.size(), 8U);
    EXPECT_EQ(small.entry(7).id, "img7");

    HistoryCache bounded_cache(4, 8, 1);
    append(bounded_cache, 16, 0);
    EXPECT_EQ(bounded_cache.size(), 8U);
    EXPECT_EQ(bounded_cache.streamed(), 16U);
}

TEST(HistoryCache, Contracts) {
    HistoryCache c(4, 8, 1);
    const std::vector<double> s(2, 0.5);
    const std::vector<std::size_t> p(2, 0);
    EXPECT_THROW(c.append(batch(2, 0, 5), s, p), DimError);
    EXPECT_THROW(c.append(batch(3, 0), s, std::vector<std::size_t>(3, 0)), InputError);
    EXPECT_THROW(HistoryCache(4, 0, 1), ConfigError);
}

TEST(HistoryCache, ReservoirIsUniform) {
    constexpr std::size_t kTrials = 10000, kCap = 8, kStream = 16;
    std::vector<std::size_t> kept(kStream, 0);
    for (std::size_t t = 0; t < kTrials; ++t) {
        HistoryCache c(4, kCap, t);
        append(c, 5, 0);
        append(c, kStream - 5, 5);
        for (const auto& e : c.entries()) {
            ++kept[std::stoul(e.id.substr(3))];
        }
    }
    const double p = static_cast<double>(kCap) / kStream;
    const double mean = kTrials * p;
    const double sigma = std::sqrt(kTrials * p * (1 - p));
    for (std::size_t i = 0; i < kStream; ++i) {
        EXPECT_LE(std::fabs(kept[i] - mean), 3 * sigma) << "item " << i;
    }
}

TEST(HistoryCache, BatchSplitDoesNotMatter) {
    HistoryCache a(4, 5, 77), b(4, 5, 77);
    append(a, 30, 0);
    for (std::size_t i = 0; i < 30; i += 7) {
        append(b, std::min<std::size_t>(7, 30 - i), i);
    }
    EXPECT_EQ(a, b);
}

TEST(HistoryCache, RestoreRoundTrip) {
    HistoryCache a(4, 5, 3);
    append(a, 12, 0);
    const auto r = HistoryCache::restore(4, 5, 3, a.streamed(), a.entries());
    EXPECT_EQ(r, a);
    auto a2 = a;
    auto r2 = r;
    append(a2, 6, 12);
    append(r2, 6, 12);
    EXPECT_EQ(a2, r2);
    EXPECT_THROW(HistoryCache::restore(4, 5, 3, 2, a.entries()), DataError);
}

TEST(Mining, CacheWrappersFillIds) {
    HistoryCache c(4, 10, 1);
    const std::vector<double> s{0.95, 0.2, 0.5, 0.1, 0.8};
    const std::vector<std::size_t> p{0, 1, 1, 2, 1};
    c.append(batch(5, 0), s, p);
    MiningConfig cfg;
    const auto m = mine_negative_images(c, cfg);
    EXPECT_EQ(m.image_ids, (std::vector<std::string>{"img3", "img1"}));

    std::mt19937_64 rng(1);
    LabelSpace ids({"a", "b", "c"}, testkit::random_matrix(rng, 3, 4));
    cfg.class_ratio = 0.34;
    EXPECT_EQ(mine_similar_classes(c, ids, cfg).class_indices, std::vector<std::size_t>{1});
}

TEST(MiningConfig, Validate) {
    MiningConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.selection_ratio = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.class_ratio = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.initial_threshold = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}
