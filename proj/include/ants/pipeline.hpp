#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ants/mining.hpp"
#include "ants/model.hpp"
#include "ants/negspace.hpp"
#include "ants/scoring.hpp"

namespace ants {

enum class ScoreMode {
    Adaptive,
    EnsOnly,
    VsnlOnly,
    FixedLambda,
};

std::string_view to_string(ScoreMode mode);
ScoreMode score_mode_from_string(std::string_view s);

struct PipelineConfig {
    ScoreConfig score;
    MiningConfig mining;
    GenerationConfig generation;
    /// Size of each negative space (M).
    std::size_t negatives = 10000;
    /// Regenerate ENS/VSNL every this many batches.
    std::size_t regen_every = 1;
    ScoreMode mode = ScoreMode::Adaptive;
    /// When false the current batch is mined only after it has been scored (ablation).
    bool include_current_batch = true;
    /// Weight of the previous lambda in an exponential moving average; 0 disables smoothing.
    double lambda_ema = 0.0;
    /// False freezes every space at the initial NL selection (the NL-only baseline).
    bool adapt = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// What happened during one processed batch.
struct EpochSummary {
    std::uint64_t epoch = 0;
    /// Adaptive weight estimate after this batch.
    double lambda = 0.5;
    /// Weight actually used to fuse this batch's scores.
    double lambda_used = 0.5;
    std::optional<double> gamma_star;
    std::size_t mined = 0;
    std::vector<std::size_t> similar_classes;
    bool regenerated = false;
    bool degraded = false;
    std::string degraded_reason;

    friend bool operator==(const EpochSummary&, const EpochSummary&) = default;
};

struct StreamState {
    HistoryCache cache;
    NegativeSpace nl_space;
    NegativeSpace ens_space;
    NegativeSpace vsnl_space;
    /// Adaptive weight; 0.5 until the first successful regeneration.
    double lambda = 0.5;
    /// Number of batches processed.
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    /// Set once any regeneration failed; the previous spaces stayed in force.
    bool degraded = false;
    std::vector<EpochSummary> history;

    friend bool operator==(const StreamState&, const StreamState&) = default;
};

/// Initial NL selection; ENS and VSNL start as copies of it.
StreamState init_stream(const LabelSpace& ids, const CorpusCandidates& corpus,
                        const PipelineConfig& cfg);

struct BatchResult {
    std::vector<ScoreRecord> records;
    EpochSummary summary;
};

/// One step of the streaming loop: cache update, mining, regeneration of both spaces, scoring
/// and fusion. Generation failures keep the previous spaces and mark the state degraded.
BatchResult process_batch(StreamState& state, const TestBatch& batch, const LabelSpace& ids,
                          GenerationClient& client, const PipelineConfig& cfg);

struct StreamResult {
    std::vector<ScoreRecord> records;
    StreamState state;
};

StreamResult run_stream(std::span<const TestBatch> batches, const LabelSpace& ids,
                        const CorpusCandidates& corpus, GenerationClient& client,
                        const PipelineConfig& cfg);

/// Weight the mode prescribes given the current adaptive estimate.
double effective_lambda(const PipelineConfig& cfg, double adaptive);

/// Scores `images` against the three current spaces and fuses with `lambda`.
std::vector<ScoreRecord> score_batch(const StreamState& state, const EmbeddingMatrix& images,
                                     const LabelSpace& ids, const ScoreConfig& cfg, double lambda);

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "ANTSCKPT"            8 bytes
//   header length         u64 LE
//   header                JSON (epoch, lambda, seed, config hash, spaces, cache metadata, history)
//   blobs                 NSPC blobs: nl, ens, vsnl
//   cache                 "CACH", u64 rows, u64 dim, float32 LE row-major

std::string config_hash(const PipelineConfig& cfg);

void save_checkpoint(const std::filesystem::path& file, const StreamState& state,
                     const PipelineConfig& cfg);

/// Throws ConfigError when the checkpoint was written under a different configuration.
StreamState load_checkpoint(const std::filesystem::path& file, const PipelineConfig& cfg);

} // namespace ants
