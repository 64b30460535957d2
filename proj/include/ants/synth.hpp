#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ants/eval.hpp"
#include "ants/model.hpp"
#include "ants/negspace.hpp"
#include "ants/pipeline.hpp"

// Synthetic embedding world. Every concept (ID class, sibling of an ID class, far cluster,
// corpus word, coarse description) has a visual prototype and a text feature on the unit
// sphere. Images are prototypes plus angular noise; text features are prototypes rotated by a
// fixed angle in a random direction. SyntheticClient plays the MLLM and the text encoder.

namespace ants::synth {

struct WorldConfig {
    std::size_t dim = 64;
    std::size_t n_id_classes = 20;
    /// Mean angular distance (radians) between an image and its concept prototype.
    double id_spread = 0.5;

    /// ID classes that have near-OOD siblings in the test stream, and how many per class.
    std::size_t near_parents = 4;
    std::size_t near_per_parent = 3;
    /// Angle between a near-OOD sibling and its parent prototype.
    double near_offset = 0.5;
    /// Sibling concepts per ID class (near-OOD ones first); the rest spread out to
    /// sibling_max_offset. They are what a similar-label query returns.
    std::size_t siblings_per_class = 60;
    double sibling_max_offset = 1.3;

    std::size_t far_clusters = 12;
    /// Far cluster f sits at exactly this angle from ID prototype f mod N, tilted out of the ID
    /// span, so every ID prototype is at least this far from it.
    double far_min_angle = 0.7;

    /// Angle between a concept's prototype and its text feature.
    double text_noise = 0.9;
    /// Per-string rotation of text features, so repeated phrases embed to distinct rows.
    double text_jitter = 0.05;
    /// Angle between a class's text feature and its coarse description's text feature.
    double coarse_angle = 0.9;

    std::size_t corpus_words = 3000;
    /// Fraction of corpus words placed near a far cluster, at corpus_far_angle from it.
    double corpus_far_fraction = 0.1;
    double corpus_far_angle = 1.2;

    /// Probability that a description names a random non-ID concept instead of the truth.
    double corruption = 0.0;
    std::uint64_t seed = 42;

    /// Throws ConfigError when the world is ill-posed (e.g. far_min_angle <= near_offset).
    void validate() const;
};

nlohmann::json to_json(const WorldConfig& cfg);
WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig base = {});

enum class ConceptKind { Id, Sibling, Far, Word, Coarse };

std::string_view to_string(ConceptKind kind);
ConceptKind concept_kind_from_string(std::string_view s);

struct Concept {
    std::string name;
    ConceptKind kind = ConceptKind::Word;
    /// Owning ID class for siblings and coarse concepts.
    std::size_t parent = std::numeric_limits<std::size_t>::max();

    friend bool operator==(const Concept&, const Concept&) = default;
};

class World {
  public:
    static World build(const WorldConfig& cfg);

    [[nodiscard]] const WorldConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const std::vector<Concept>& concepts() const noexcept { return concepts_; }
    [[nodiscard]] const EmbeddingMatrix& prototypes() const noexcept { return prototypes_; }
    [[nodiscard]] const EmbeddingMatrix& texts() const noexcept { return texts_; }

    /// Concept index by name; npos when unknown.
    [[nodiscard]] std::size_t find(std::string_view name) const;
    [[nodiscard]] std::vector<std::size_t> concepts_of(ConceptKind kind) const;
    /// Near-OOD sibling concepts (the first near_per_parent siblings of each parent class).
    [[nodiscard]] std::vector<std::size_t> near_concepts() const;
    [[nodiscard]] std::size_t coarse_of(std::size_t id_class) const;

    /// Text encoder: concept names found in a text contribute their text features; a text naming
    /// no concept gets a hash-seeded random direction. Rows are positional.
    [[nodiscard]] EmbeddingMatrix embed(std::span<const std::string> texts) const;

    [[nodiscard]] LabelSpace id_space(
        const std::string& prompt_template = std::string(kDefaultPromptTemplate)) const;
    [[nodiscard]] CorpusCandidates corpus(
        const std::string& prompt_template = std::string(kDefaultPromptTemplate)) const;

    /// One image per entry of `concepts`, ids "<prefix>-<n>" numbered from `first`.
    [[nodiscard]] EmbeddingMatrix sample_images(std::span<const std::size_t> concepts,
                                                std::uint64_t stream, const std::string& prefix,
                                                std::size_t first = 0) const;

    /// Writes world.json, prototypes.nspc and texts.nspc (with id sidecars) into `dir`.
    void dump(const std::filesystem::path& dir) const;
    static World load(const std::filesystem::path& dir);

    friend bool operator==(const World& a, const World& b) {
        return a.cfg_.seed == b.cfg_.seed && a.concepts_ == b.concepts_ &&
               a.prototypes_ == b.prototypes_ && a.texts_ == b.texts_;
    }

  private:
    World(WorldConfig cfg, std::vector<Concept> concepts, EmbeddingMatrix prototypes,
          EmbeddingMatrix texts);

    WorldConfig cfg_;
    std::vector<Concept> concepts_;
    EmbeddingMatrix prototypes_;
    EmbeddingMatrix texts_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Oracle generation client over a World. Stateless apart from the world, hence thread-safe.
///  - describe_image: names the concept whose prototype is nearest the image. Far clusters are
///    named exactly; ID classes and their siblings only get the class's coarse description.
///  - similar_labels: the non-ID, non-word concepts nearest the class prototype.
///  - embed_texts: World::embed.
class SyntheticClient final : public GenerationClient {
  public:
    explicit SyntheticClient(const World& world);

    std::string describe_image(const DescribeRequest& request) override;
    std::vector<std::string> similar_labels(const SimilarRequest& request) override;
    EmbeddingMatrix embed_texts(std::span<const std::string> texts) override;

    /// Concept index the image is described as, before corruption.
    [[nodiscard]] std::size_t perceived_concept(std::span<const float> image) const;

  private:
    const World& world_;
    std::vector<std::size_t> visual_;
    std::vector<std::size_t> similar_pool_;
};

enum class Scenario { Far, Near, Mixed };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

struct StreamSpec {
    std::size_t n_id = 2000;
    std::size_t n_ood = 2000;
    std::size_t batches = 5;
    std::uint64_t seed = 42;
};

struct SyntheticStream {
    std::vector<TestBatch> batches;
    /// Ground truth with dataset "far" or "near" for OOD rows, in stream order.
    std::vector<TruthRow> truth;
};

/// ID images uniformly over ID classes, OOD images uniformly over the scenario's OOD concepts
/// (mixed: half far, half near), shuffled and cut into equal batches.
SyntheticStream make_stream(const World& world, Scenario scenario, const StreamSpec& spec);

/// Pipeline settings matched to the synthetic scale (M = 200, g = 100, delta covering the
/// near-OOD parents).
PipelineConfig scenario_pipeline_config(const World& world);

struct ScenarioResult {
    MetricReport baseline;
    MetricReport ants;
    /// Adaptive lambda after each batch.
    std::vector<double> lambda_trajectory;
    std::vector<ScoreRecord> baseline_records;
    std::vector<ScoreRecord> ants_records;
    bool degraded = false;
};

/// Runs the same stream frozen at initialization (NL-only baseline) and with full adaptation.
ScenarioResult run_scenario(const World& world, Scenario scenario, const PipelineConfig& cfg,
                            const StreamSpec& spec = {});

} // namespace ants::synth
