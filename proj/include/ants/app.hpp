#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ants/clients.hpp"
#include "ants/eval.hpp"
#include "ants/pipeline.hpp"
#include "ants/synth.hpp"

// Command implementations behind the `ants` executable. Each returns a process exit code:
// 0 success, 2 success with degraded generation, 1 error (diagnostic on the error stream).

namespace ants::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDegraded = 2;

enum class ClientMode { Replay, Http, Synthetic };

std::string_view to_string(ClientMode mode);
ClientMode client_mode_from_string(std::string_view s);

struct ClientSpec {
    ClientMode mode = ClientMode::Replay;
    /// Replay fixtures directory (replay mode, and the target of `fixtures record`).
    std::filesystem::path fixtures;
    /// World directory written by `synth-world` (synthetic mode).
    std::filesystem::path world;
};

/// Everything one `run` needs. Relative paths resolve against the manifest's directory.
///
/// {
///   "config": "config.json",          optional PipelineConfig JSON
///   "labels": "labels.json",          label-space manifest
///   "corpus": "corpus.nspc",          candidate words (ids are the words)
///   "batches": ["b0.nspc", ...],      test batches in arrival order
///   "truth": "truth.csv",             optional ground truth
///   "client": {"mode": "replay" | "http" | "synthetic", "fixtures": "...", "world": "..."},
///   "output_dir": "out",
///   "seed": 42                        optional; overrides the config seed
/// }
struct RunManifest {
    std::filesystem::path base_dir;
    std::optional<std::filesystem::path> config;
    std::filesystem::path labels;
    std::filesystem::path corpus;
    std::vector<std::filesystem::path> batches;
    std::optional<std::filesystem::path> truth;
    ClientSpec client;
    std::filesystem::path output_dir;
    std::optional<std::uint64_t> seed;

    static RunManifest load(const std::filesystem::path& file);
    [[nodiscard]] nlohmann::json to_json() const;

    /// Throws InputError naming every input path that does not exist.
    void check_paths() const;
};

/// Manifest config file (if any), then `key.path=value` overrides, then the manifest seed.
PipelineConfig resolve_config(const RunManifest& manifest,
                              const std::vector<std::string>& overrides = {});

/// Applies one "section.field=value" override; the value is parsed as JSON when possible and
/// taken as a string otherwise.
PipelineConfig apply_override(const PipelineConfig& cfg, const std::string& assignment);

/// Loaded inputs of a manifest.
struct RunInputs {
    LabelSpace ids;
    CorpusCandidates corpus;
    std::vector<TestBatch> batches;
    std::vector<TruthRow> truth;
};

RunInputs load_inputs(const RunManifest& manifest);

/// Owns whatever the manifest's client mode needs (world, inner client, replay wrapper).
struct ClientHandle {
    std::unique_ptr<synth::World> world;
    std::unique_ptr<GenerationClient> inner;
    std::unique_ptr<GenerationClient> outer;

    [[nodiscard]] GenerationClient& get() const { return outer ? *outer : *inner; }
};

/// Builds the client. With `record` set, the manifest's http/synthetic client is wrapped in a
/// recording ReplayClient writing to client.fixtures.
ClientHandle make_client(const RunManifest& manifest, bool record = false);

struct RunOutcome {
    StreamResult stream;
    std::optional<MetricReport> report;
};

/// Runs the stream and writes records.csv, histogram.csv, lambda.csv, checkpoint.ants and,
/// with ground truth, metrics.json into the output directory.
RunOutcome execute_run(const RunManifest& manifest, const PipelineConfig& cfg,
                       GenerationClient& client, const RunInputs& inputs);

struct CommonOptions {
    /// Caps kernel threads and generation fan-out; 0 keeps defaults.
    std::size_t threads = 0;
    std::vector<std::string> overrides;
};

int cmd_run(const std::filesystem::path& manifest, const CommonOptions& opts, std::ostream& out,
            std::ostream& err);

int cmd_fixtures(const std::filesystem::path& manifest, bool record, const CommonOptions& opts,
                 std::ostream& out, std::ostream& err);

/// Recomputes metrics from an exported records CSV and a truth CSV.
MetricReport cmd_eval(const std::filesystem::path& records, const std::filesystem::path& truth);

enum class SweepAxis { Delta, Lambda, Eta, Length };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view s);

/// Config with the swept parameter set: delta -> mining.class_ratio, eta ->
/// mining.selection_ratio, lambda -> fixed-lambda mode with that weight, length ->
/// generation.len_max (len_min lowered to fit).
PipelineConfig sweep_config(PipelineConfig cfg, SweepAxis axis, double value);

struct SweepRow {
    double value = 0.0;
    std::optional<MetricReport> report;
    double final_lambda = 0.5;
    bool degraded = false;
    std::string error;
};

/// One pipeline run per value, shared seed; each row is written to `csv_out` as soon as it is
/// known. Needs at least two values and ground truth.
std::vector<SweepRow> run_sweep(const RunManifest& manifest, const PipelineConfig& base,
                                SweepAxis axis, const std::vector<double>& values,
                                std::ostream& csv_out, std::size_t threads = 0);

int cmd_sweep(const std::filesystem::path& manifest, SweepAxis axis,
              const std::vector<double>& values, const std::optional<std::filesystem::path>& output,
              const CommonOptions& opts, std::ostream& out, std::ostream& err);

/// Converts a CSV (id followed by the vector components, optional header) or an NSPC file into
/// a normalized NSPC file with sidecar. Returns the number of rows written.
std::size_t cmd_ingest(const std::filesystem::path& input, const std::filesystem::path& output,
                       std::optional<std::size_t> expected_dim = std::nullopt);

struct SynthWorldOptions {
    synth::WorldConfig world;
    synth::Scenario scenario = synth::Scenario::Far;
    synth::StreamSpec stream;
};

/// Writes a synthetic world plus a ready-to-run manifest (synthetic client) into `dir`.
/// Returns the manifest path.
std::filesystem::path cmd_synth_world(const std::filesystem::path& dir,
                                      const SynthWorldOptions& opts);

} // namespace ants::app
