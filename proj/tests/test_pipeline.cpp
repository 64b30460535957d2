#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ants/config.hpp"
#include "ants/errors.hpp"
#include "ants/pipeline.hpp"
#include "ants/synth.hpp"
#include "support/fake_client.hpp"
#include "support/test_support.hpp"

using namespace ants;

namespace {

// One small far-OOD world shared by the tests in this file.
struct Env {
    synth::World world = synth::World::build({});
    LabelSpace ids = world.id_space();
    CorpusCandidates corpus = world.corpus();
    synth::SyntheticStream stream = synth::make_stream(world, synth::Scenario::Far, {300, 300, 3, 42});
    PipelineConfig cfg = synth::scenario_pipeline_config(world);
};

const Env& env() {
    static const Env e;
    return e;
}

std::vector<ScoreRecord> slice(const std::vector<ScoreRecord>& r, std::size_t n) {
    return {r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n)};
}

/// Fails every call once armed.
class FailingClient final : public GenerationClient {
  public:
    explicit FailingClient(GenerationClient& inner) : inner_(inner) {}
    bool armed = false;
    std::string describe_image(const DescribeRequest& r) override {
        check();
        return inner_.describe_image(r);
    }
    std::vector<std::string> similar_labels(const SimilarRequest& r) override {
        check();
        return inner_.similar_labels(r);
    }
    EmbeddingMatrix embed_texts(std::span<const std::string> t) override {
        check();
        return inner_.embed_texts(t);
    }

  private:
    void check() const {
        if (armed) {
            throw ClientError("endpoint down");
        }
    }
    GenerationClient& inner_;
};

} // namespace

TEST(InitStream, AliasesAndDefaults) {
    const auto& e = env();
    const auto s = init_stream(e.ids, e.corpus, e.cfg);
    EXPECT_EQ(s.lambda, 0.5);
    EXPECT_EQ(s.epoch, 0U);
    EXPECT_EQ(s.nl_space.size(), 200U);
    EXPECT_EQ(s.ens_space.features(), s.nl_space.features());
    EXPECT_EQ(s.vsnl_space.features(), s.nl_space.features());
    EXPECT_EQ(init_stream(e.ids, e.corpus, e.cfg), s);

    const auto recs = score_batch(s, e.stream.batches[0].images, e.ids, e.cfg.score, 0.5);
    for (const auto& r : recs) {
        ASSERT_EQ(r.s_ens, r.s_nl);
        ASSERT_EQ(r.s_vsnl, r.s_nl);
        ASSERT_EQ(r.s_ada, r.s_nl);
    }
}

TEST(ProcessBatch, NothingMinedKeepsInitialSpaces) {
    const auto& e = env();
    auto cfg = e.cfg;
    cfg.mining.initial_threshold = 1e-300;
    synth::SyntheticClient client(e.world);
    auto s = init_stream(e.ids, e.corpus, cfg);
    const auto r = process_batch(s, e.stream.batches[0], e.ids, client, cfg);
    EXPECT_FALSE(r.summary.regenerated);
    EXPECT_EQ(r.summary.mined, 0U);
    EXPECT_EQ(s.lambda, 0.5);
    for (const auto& rec : r.records) {
        ASSERT_EQ(rec.s_ens, rec.s_nl);
        ASSERT_EQ(rec.s_vsnl, rec.s_nl);
    }
}

TEST(ProcessBatch, ModeEndpoints) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    for (auto mode : {ScoreMode::EnsOnly, ScoreMode::VsnlOnly, ScoreMode::FixedLambda}) {
        auto cfg = e.cfg;
        cfg.mode = mode;
        cfg.score.lambda_override = 0.25;
        const auto out = run_stream(e.stream.batches, e.ids, e.corpus, client, cfg);
        for (const auto& r : out.records) {
            if (mode == ScoreMode::EnsOnly) {
                ASSERT_EQ(r.s_ada, r.s_ens);
            } else if (mode == ScoreMode::VsnlOnly) {
                ASSERT_EQ(r.s_ada, r.s_vsnl);
            } else {
                ASSERT_EQ(r.s_ada, fused_score(r.s_ens, r.s_vsnl, 0.25));
            }
        }
        for (const auto& h : out.state.history) {
            EXPECT_EQ(h.lambda_used, effective_lambda(cfg, h.lambda));
        }
    }
}

TEST(ProcessBatch, FarWorldLambdaAboveHalf) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    const auto out = run_stream(e.stream.batches, e.ids, e.corpus, client, e.cfg);
    ASSERT_EQ(out.state.history.size(), 3U);
    for (std::size_t i = 1; i < out.state.history.size(); ++i) {
        EXPECT_GT(out.state.history[i].lambda, 0.5) << i;
        EXPECT_TRUE(out.state.history[i].regenerated);
    }
    EXPECT_FALSE(out.state.degraded);
    EXPECT_EQ(out.state.ens_space.epoch(), 3U);
}

TEST(RunStream, SingleBatchEqualsProcessBatch) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    auto s = init_stream(e.ids, e.corpus, e.cfg);
    const auto r = process_batch(s, e.stream.batches[0], e.ids, client, e.cfg);
    const auto out = run_stream(std::span(e.stream.batches).first(1), e.ids, e.corpus, client, e.cfg);
    EXPECT_EQ(out.records, r.records);
    EXPECT_EQ(out.state, s);
}

TEST(RunStream, PermutingWithinBatchPermutesRecords) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    const auto& b = e.stream.batches[0];
    std::vector<std::size_t> perm(b.images.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    TestBatch shuffled{b.images.select(perm), {}};
    for (std::size_t i : perm) {
        shuffled.ground_truth.push_back(b.ground_truth[i]);
    }
    auto s1 = init_stream(e.ids, e.corpus, e.cfg);
    auto s2 = init_stream(e.ids, e.corpus, e.cfg);
    const auto r1 = process_batch(s1, b, e.ids, client, e.cfg).records;
    const auto r2 = process_batch(s2, shuffled, e.ids, client, e.cfg).records;
    for (std::size_t k = 0; k < perm.size(); ++k) {
        ASSERT_EQ(r2[k], r1[perm[k]]);
    }
}

TEST(RunStream, TruncationReproducesPrefix) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    const auto full = run_stream(e.stream.batches, e.ids, e.corpus, client, e.cfg);
    std::size_t n = 0;
    for (std::size_t t = 1; t < e.stream.batches.size(); ++t) {
        n += e.stream.batches[t - 1].images.rows();
        const auto part =
            run_stream(std::span(e.stream.batches).first(t), e.ids, e.corpus, client, e.cfg);
        EXPECT_EQ(part.records, slice(full.records, n)) << t;
    }
}

TEST(RunStream, ReplayRerunIsBitIdentical) {
    const auto& e = env();
    testkit::TempDir dir("pipeline");
    synth::SyntheticClient inner(e.world);
    std::vector<ScoreRecord> recorded;
    {
        ReplayClient rec(dir.path(), FixtureMode::Record, &inner);
        recorded = run_stream(e.stream.batches, e.ids, e.corpus, rec, e.cfg).records;
    }
    ReplayClient replay(dir.path(), FixtureMode::Replay);
    const auto a = run_stream(e.stream.batches, e.ids, e.corpus, replay, e.cfg);
    const auto b = run_stream(e.stream.batches, e.ids, e.corpus, replay, e.cfg);
    EXPECT_EQ(a.records, recorded);
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(a.state, b.state);
}

TEST(ProcessBatch, GenerationFailureDegrades) {
    const auto& e = env();
    synth::SyntheticClient inner(e.world);
    FailingClient client(inner);
    auto s = init_stream(e.ids, e.corpus, e.cfg);
    process_batch(s, e.stream.batches[0], e.ids, client, e.cfg);
    const auto ens_before = s.ens_space;
    const double lambda_before = s.lambda;
    client.armed = true;
    const auto r = process_batch(s, e.stream.batches[1], e.ids, client, e.cfg);
    EXPECT_TRUE(r.summary.degraded);
    EXPECT_FALSE(r.summary.regenerated);
    EXPECT_FALSE(r.summary.degraded_reason.empty());
    EXPECT_TRUE(s.degraded);
    EXPECT_EQ(s.ens_space, ens_before);
    EXPECT_EQ(s.lambda, lambda_before);
    EXPECT_EQ(r.records.size(), e.stream.batches[1].images.rows());
}

TEST(ProcessBatch, RegenerationSchedule) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    auto cfg = e.cfg;
    cfg.regen_every = 2;
    const auto out = run_stream(e.stream.batches, e.ids, e.corpus, client, cfg);
    EXPECT_TRUE(out.state.history[0].regenerated);
    EXPECT_FALSE(out.state.history[1].regenerated);
    EXPECT_TRUE(out.state.history[2].regenerated);
    EXPECT_EQ(out.state.history[1].lambda, out.state.history[0].lambda);
}

TEST(ProcessBatch, LambdaSmoothing) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    const auto raw = run_stream(e.stream.batches, e.ids, e.corpus, client, e.cfg);
    auto cfg = e.cfg;
    cfg.lambda_ema = 0.5;
    const auto smooth = run_stream(e.stream.batches, e.ids, e.corpus, client, cfg);
    // Mining depends only on the frozen NL space, so the raw estimates coincide.
    EXPECT_EQ(smooth.state.history[0].lambda, raw.state.history[0].lambda);
    const double want = 0.5 * smooth.state.history[0].lambda + 0.5 * raw.state.history[1].lambda;
    EXPECT_DOUBLE_EQ(smooth.state.history[1].lambda, want);
}

TEST(ProcessBatch, DeferredCacheAppend) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    auto cfg = e.cfg;
    cfg.include_current_batch = false;
    auto s = init_stream(e.ids, e.corpus, cfg);
    const auto r = process_batch(s, e.stream.batches[0], e.ids, client, cfg);
    EXPECT_FALSE(r.summary.regenerated);
    EXPECT_EQ(s.cache.size(), e.stream.batches[0].images.rows());
    const auto r2 = process_batch(s, e.stream.batches[1], e.ids, client, cfg);
    EXPECT_TRUE(r2.summary.regenerated);
}

TEST(ProcessBatch, Contracts) {
    const auto& e = env();
    synth::SyntheticClient client(e.world);
    auto s = init_stream(e.ids, e.corpus, e.cfg);
    std::mt19937_64 rng(1);
    TestBatch wrong{testkit::random_matrix(rng, 2, 5), {}};
    EXPECT_THROW(process_batch(s, wrong, e.ids, client, e.cfg), DimError);
    TestBatch bad_truth{e.stream.batches[0].images, {Tag::ID}};
    EXPECT_THROW(process_batch(s, bad_truth, e.ids, client, e.cfg), InputError);
}

TEST(Checkpoint, RoundTripAndResume) {
    const auto& e = env();
    testkit::TempDir dir("ckpt");
    synth::SyntheticClient client(e.world);
    const auto full = run_stream(e.stream.batches, e.ids, e.corpus, client, e.cfg);

    auto s = init_stream(e.ids, e.corpus, e.cfg);
    std::vector<ScoreRecord> records = process_batch(s, e.stream.batches[0], e.ids, client, e.cfg).records;
    save_checkpoint(dir / "c.ants", s, e.cfg);
    auto restored = load_checkpoint(dir / "c.ants", e.cfg);
    EXPECT_EQ(restored, s);
    for (std::size_t t = 1; t < e.stream.batches.size(); ++t) {
        auto r = process_batch(restored, e.stream.batches[t], e.ids, client, e.cfg).records;
        records.insert(records.end(), r.begin(), r.end());
    }
    EXPECT_EQ(records, full.records);
    EXPECT_EQ(restored, full.state);
}

TEST(Checkpoint, RejectsOtherConfigAndCorruption) {
    const auto& e = env();
    testkit::TempDir dir("ckpt");
    const auto s = init_stream(e.ids, e.corpus, e.cfg);
    save_checkpoint(dir / "c.ants", s, e.cfg);
    auto other = e.cfg;
    other.score.temperature = 0.02;
    EXPECT_THROW(load_checkpoint(dir / "c.ants", other), ConfigError);

    const auto bytes = testkit::read_bytes(dir / "c.ants");
    testkit::write_bytes(dir / "bad.ants", "NOTACKPT" + bytes.substr(8));
    EXPECT_THROW(load_checkpoint(dir / "bad.ants", e.cfg), FormatError);
    testkit::write_bytes(dir / "short.ants", bytes.substr(0, bytes.size() - 5));
    EXPECT_THROW(load_checkpoint(dir / "short.ants", e.cfg), FormatError);
    EXPECT_THROW(load_checkpoint(dir / "none.ants", e.cfg), IoError);
}

TEST(PipelineConfig, ValidateAndJson) {
    PipelineConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    auto bad = cfg;
    bad.negatives = 50;  // fewer than one group
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.mode = ScoreMode::FixedLambda;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad.score.lambda_override = 0.3;
    EXPECT_NO_THROW(bad.validate());
    bad = cfg;
    bad.lambda_ema = 1.0;
    EXPECT_THROW(bad.validate(), ConfigError);

    cfg.mode = ScoreMode::VsnlOnly;
    cfg.score.lambda_override = 0.75;
    cfg.generation.ens_prompt = "describe <y_i>";
    cfg.seed = 99;
    EXPECT_EQ(to_json(pipeline_config_from_json(to_json(cfg))), to_json(cfg));
    EXPECT_EQ(config_hash(pipeline_config_from_json(to_json(cfg))), config_hash(cfg));
    EXPECT_NE(config_hash(cfg), config_hash(PipelineConfig{}));

    const auto partial = pipeline_config_from_json(nlohmann::json::parse(R"({"score": {"temperature": 0.5}})"));
    EXPECT_EQ(partial.score.temperature, 0.5);
    EXPECT_EQ(partial.negatives, PipelineConfig{}.negatives);
    EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"scroe": {}})")), ConfigError);
    EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"mode": "sometimes"})")),
                 ConfigError);
    for (auto m : {ScoreMode::Adaptive, ScoreMode::EnsOnly, ScoreMode::VsnlOnly, ScoreMode::FixedLambda}) {
        EXPECT_EQ(score_mode_from_string(to_string(m)), m);
    }
}

TEST(EffectiveLambda, Modes) {
    PipelineConfig cfg;
    EXPECT_EQ(effective_lambda(cfg, 0.3), 0.3);
    cfg.mode = ScoreMode::EnsOnly;
    EXPECT_EQ(effective_lambda(cfg, 0.3), 1.0);
    cfg.mode = ScoreMode::VsnlOnly;
    EXPECT_EQ(effective_lambda(cfg, 0.3), 0.0);
    cfg.mode = ScoreMode::FixedLambda;
    cfg.score.lambda_override = 0.8;
    EXPECT_EQ(effective_lambda(cfg, 0.3), 0.8);
}
