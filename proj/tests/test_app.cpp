#include <sstream>

#include <gtest/gtest.h>

#include "ants/app.hpp"
#include "ants/config.hpp"
#include "ants/errors.hpp"
#include "support/test_support.hpp"

using namespace ants;
using namespace ants::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutputs[] = {"records.csv", "histogram.csv", "metrics.json", "lambda.csv",
                                    "checkpoint.ants"};

fs::path synth_world(const testkit::TempDir& dir, synth::Scenario scenario,
                     synth::StreamSpec stream = {600, 600, 3, 42}) {
    SynthWorldOptions opts;
    opts.scenario = scenario;
    opts.stream = stream;
    return cmd_synth_world(dir.path(), opts);
}

/// Rewrites fields of a manifest in place.
void patch_manifest(const fs::path& file, const json& patch) {
    auto j = json::parse(testkit::read_bytes(file));
    j.merge_patch(patch);
    testkit::write_bytes(file, j.dump(2));
}

int run(const fs::path& manifest, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int rc = cmd_run(manifest, {}, out, err);
    if (err_text != nullptr) {
        *err_text = err.str();
    }
    return rc;
}

} // namespace

TEST(Run, SyntheticHappyPath) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_run(manifest, {}, out, err), kExitOk) << err.str();
    for (const char* f : kOutputs) {
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    }
    const auto summary = json::parse(out.str());
    EXPECT_TRUE(summary.contains("metrics"));
    const auto lambda_csv = testkit::read_bytes(dir / "out" / "lambda.csv");
    EXPECT_EQ(std::count(lambda_csv.begin(), lambda_csv.end(), '\n'), 4);
}

TEST(Run, MissingEmbeddingFileFailsBeforeOutput) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    fs::remove(dir / "batches" / "batch_001.nspc");
    std::string err;
    EXPECT_EQ(run(manifest, &err), kExitError);
    EXPECT_NE(err.find("batch_001.nspc"), std::string::npos) << err;
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Run, BadManifest) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    patch_manifest(manifest, {{"extra", 1}});
    EXPECT_EQ(run(manifest), kExitError);
    EXPECT_EQ(run(dir / "nope.json"), kExitError);
}

TEST(Run, OverridesAndThreads) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    CommonOptions opts;
    opts.overrides = {"mode=\"ens_only\"", "score.temperature=0.02"};
    opts.threads = 1;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_run(manifest, opts, out, err), kExitOk) << err.str();
    const auto recs = read_records_csv(dir / "out" / "records.csv");
    for (const auto& r : recs) {
        ASSERT_EQ(r.s_ada, r.s_ens);
    }
    opts.overrides = {"score.nonsense=3"};
    EXPECT_EQ(cmd_run(manifest, opts, out, err), kExitError);
}

TEST(Fixtures, RecordThenReplayIsByteIdentical) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_fixtures(manifest, true, {}, out, err), kExitOk) << err.str();
    std::map<std::string, std::string> recorded;
    for (const char* f : kOutputs) {
        recorded[f] = testkit::read_bytes(dir / "out" / f);
    }
    fs::remove_all(dir / "out");
    for (int rep = 0; rep < 2; ++rep) {
        ASSERT_EQ(cmd_fixtures(manifest, false, {}, out, err), kExitOk) << err.str();
        for (const char* f : kOutputs) {
            EXPECT_EQ(testkit::read_bytes(dir / "out" / f), recorded[f]) << f;
        }
    }
    // Replay without fixtures cannot generate: the run degrades but still scores.
    fs::remove_all(dir / "fixtures");
    fs::create_directories(dir / "fixtures");
    EXPECT_EQ(cmd_fixtures(manifest, false, {}, out, err), kExitDegraded);
}

TEST(Eval, RoundTripMatchesRun) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Mixed);
    ASSERT_EQ(run(manifest), kExitOk);
    const auto in_process =
        metric_report_from_json(json::parse(testkit::read_bytes(dir / "out" / "metrics.json")));
    EXPECT_EQ(cmd_eval(dir / "out" / "records.csv", dir / "truth.csv"), in_process);
    EXPECT_EQ(in_process.per_dataset.size(), 2U);

    testkit::write_bytes(dir / "id_only.csv", "image_id,tag\nid-0,ID\n");
    EXPECT_THROW(cmd_eval(dir / "out" / "records.csv", dir / "id_only.csv"), InputError);
}

TEST(Sweep, LambdaEndpointsMatchSingleModes) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Mixed);
    const auto m = RunManifest::load(manifest);
    const auto base = resolve_config(m);
    std::ostringstream csv;
    const auto rows = run_sweep(m, base, SweepAxis::Lambda, {0.0, 0.5, 1.0}, csv);
    ASSERT_EQ(rows.size(), 3U);
    const auto text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);

    const auto inputs = load_inputs(m);
    const auto client = make_client(m);
    for (auto [mode, row] : {std::pair{ScoreMode::VsnlOnly, 0}, std::pair{ScoreMode::EnsOnly, 2}}) {
        auto cfg = base;
        cfg.mode = mode;
        const auto r = run_stream(inputs.batches, inputs.ids, inputs.corpus, client.get(), cfg);
        EXPECT_EQ(evaluate(r.records, inputs.truth), *rows[row].report);
    }
}

TEST(Sweep, DeltaHasInteriorOptimumInNearWorld) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Near, {2000, 2000, 5, 42});
    const auto m = RunManifest::load(manifest);
    std::ostringstream csv;
    const auto rows = run_sweep(m, resolve_config(m), SweepAxis::Delta, {0.05, 0.2, 1.0}, csv);
    ASSERT_TRUE(rows[0].report && rows[1].report && rows[2].report);
    EXPECT_LT(rows[1].report->fpr95, rows[0].report->fpr95);
    EXPECT_LT(rows[1].report->fpr95, rows[2].report->fpr95);
}

TEST(Sweep, UsageErrors) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    std::ostringstream out, err;
    EXPECT_EQ(cmd_sweep(manifest, SweepAxis::Eta, {}, std::nullopt, {}, out, err), kExitError);
    EXPECT_EQ(cmd_sweep(manifest, SweepAxis::Eta, {0.5}, std::nullopt, {}, out, err), kExitError);
    EXPECT_THROW(sweep_axis_from_string("gamma"), ConfigError);

    // A failing row is reported in the CSV and makes the command fail after all rows.
    ASSERT_EQ(cmd_sweep(manifest, SweepAxis::Eta, {0.5, 1.5}, dir / "s.csv", {}, out, err),
              kExitError);
    const auto rows = csv::parse(testkit::read_bytes(dir / "s.csv"));
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_TRUE(rows[1][6].empty());
    EXPECT_FALSE(rows[2][6].empty());
}

TEST(SweepConfig, Axes) {
    PipelineConfig cfg;
    EXPECT_EQ(sweep_config(cfg, SweepAxis::Delta, 0.3).mining.class_ratio, 0.3);
    EXPECT_EQ(sweep_config(cfg, SweepAxis::Eta, 0.3).mining.selection_ratio, 0.3);
    const auto l = sweep_config(cfg, SweepAxis::Lambda, 0.7);
    EXPECT_EQ(l.mode, ScoreMode::FixedLambda);
    EXPECT_EQ(*l.score.lambda_override, 0.7);
    const auto len = sweep_config(cfg, SweepAxis::Length, 2);
    EXPECT_EQ(len.generation.len_max, 2U);
    EXPECT_LE(len.generation.len_min, 2U);
}

TEST(Overrides, ParseValues) {
    PipelineConfig cfg;
    cfg = apply_override(cfg, "negatives=500");
    cfg = apply_override(cfg, "generation.ens_prompt=describe it");
    cfg = apply_override(cfg, "score.lambda_override=0.4");
    EXPECT_EQ(cfg.negatives, 500U);
    EXPECT_EQ(cfg.generation.ens_prompt, "describe it");
    EXPECT_EQ(*cfg.score.lambda_override, 0.4);
    EXPECT_THROW(apply_override(cfg, "novalue"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "score.bogus=1"), ConfigError);
}

TEST(Ingest, CsvAndNspc) {
    testkit::TempDir dir("app");
    testkit::write_bytes(dir / "e.csv", "id,x1,x2,x3\na,3,0,4\nb,0,2,0\n");
    EXPECT_EQ(cmd_ingest(dir / "e.csv", dir / "e.nspc", 3), 2U);
    const auto m = load_embeddings(dir / "e.nspc");
    EXPECT_EQ(m.ids(), (std::vector<std::string>{"a", "b"}));
    EXPECT_FLOAT_EQ(m.row(0)[0], 0.6F);
    EXPECT_EQ(cmd_ingest(dir / "e.nspc", dir / "f.nspc"), 2U);
    EXPECT_EQ(load_embeddings(dir / "f.nspc"), m);
    EXPECT_THROW(cmd_ingest(dir / "e.csv", dir / "g.nspc", 4), DataError);
    testkit::write_bytes(dir / "bad.csv", "a,1,2\nb,1\n");
    EXPECT_ANY_THROW(cmd_ingest(dir / "bad.csv", dir / "h.nspc"));
}

TEST(Manifest, RelativePathsAndRoundTrip) {
    testkit::TempDir dir("app");
    const auto manifest = synth_world(dir, synth::Scenario::Far);
    const auto m = RunManifest::load(manifest);
    EXPECT_EQ(m.labels, dir / "labels.json");
    EXPECT_EQ(m.output_dir, dir / "out");
    EXPECT_EQ(m.batches.size(), 3U);
    EXPECT_EQ(m.client.mode, ClientMode::Synthetic);
    EXPECT_NO_THROW(m.check_paths());
    EXPECT_EQ(resolve_config(m).seed, 42U);
}
