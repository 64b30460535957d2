#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ants/mining.hpp"
#include "ants/model.hpp"

namespace ants {

/// A test image handed to the generation client. The embedding is what the engine holds; a
/// client that talks to a real MLLM resolves the id to pixels on its own side.
struct ImageRef {
    std::string id;
    std::span<const float> embedding;
};

struct DescribeRequest {
    ImageRef image;
    /// Predicted ID label the description must not use.
    std::string exclude;
    /// Fully rendered instruction text.
    std::string prompt;
    /// Distinguishes repeated requests for the same image; part of the replay key.
    std::uint64_t nonce = 0;
};

struct SimilarRequest {
    std::string class_name;
    std::size_t count = 0;
    std::string prompt;
};

/// Boundary to the multimodal LLM and the text encoder. Implementations must be safe to call
/// concurrently; the engine fans requests out and reassembles results by request index.
/// Transport failures are reported as ClientError.
class GenerationClient {
  public:
    virtual ~GenerationClient() = default;

    /// One short description of the image's visual content.
    virtual std::string describe_image(const DescribeRequest& request) = 0;

    /// Up to `count` category names that look like `class_name` but are different categories.
    virtual std::vector<std::string> similar_labels(const SimilarRequest& request) = 0;

    /// Text features for the given (already templated) texts, one row per text in order.
    virtual EmbeddingMatrix embed_texts(std::span<const std::string> texts) = 0;
};

inline constexpr std::string_view kDefaultEnsPrompt =
    "Describe the distinctive visual content of this image in one short phrase; do not use the "
    "word '<y_i>'.";
inline constexpr std::string_view kDefaultVsnlPrompt =
    "List <k> object categories that look visually similar to '<y_i>' but are different "
    "categories.";

struct GenerationConfig {
    std::string ens_prompt = std::string(kDefaultEnsPrompt);
    std::string vsnl_prompt = std::string(kDefaultVsnlPrompt);
    /// Accepted sentence length window, in words.
    std::size_t len_min = 3;
    std::size_t len_max = 15;
    /// Attempts per sentence before an out-of-window sentence is truncated/kept or a sentence
    /// naming the excluded label is dropped.
    std::size_t attempts = 3;
    /// Maximum concurrent client requests.
    std::size_t fanout = 4;

    void validate() const;
};

struct CorpusCandidates {
    std::vector<std::string> words;
    EmbeddingMatrix features;

    /// Words are taken from the matrix ids.
    static CorpusCandidates from_matrix(EmbeddingMatrix features);
};

/// The M corpus words least similar to every ID label (ascending max cosine, corpus order on
/// ties), skipping exact ID-label matches. Throws InputError when fewer than M words remain.
NegativeSpace select_initial_nls(const CorpusCandidates& corpus, const LabelSpace& ids,
                                 std::size_t m, std::size_t group_size);

/// A mined negative image plus the ID class it was predicted as.
struct NegativeImage {
    ImageRef image;
    std::size_t predicted = 0;
};

/// Expressive negative sentences: one description per mined image (M sampled uniformly when
/// there are at least M images, round-robin repetition otherwise), filtered by the label and
/// length rules, then embedded verbatim.
NegativeSpace generate_ens(std::span<const NegativeImage> negatives, const LabelSpace& ids,
                           GenerationClient& client, std::size_t m, std::size_t group_size,
                           const GenerationConfig& cfg, std::uint64_t seed, std::uint64_t epoch);

/// Visually similar negative labels: ceil(M / |subset|) candidates per subset class, deduplicated
/// (case-folded), ID labels removed, truncated to M in generation order, embedded through the
/// label-space prompt template.
NegativeSpace generate_vsnl(const SimilarClassSubset& subset, const LabelSpace& ids,
                            GenerationClient& client, std::size_t m, std::size_t group_size,
                            const GenerationConfig& cfg, std::uint64_t epoch);

/// Embeds texts through `tmpl` (empty template: verbatim) and attaches `row_ids`.
/// Throws InputError on empty input, GenerationError on client failure or a row-count mismatch.
EmbeddingMatrix embed_space(std::span<const std::string> texts, std::string_view tmpl,
                            GenerationClient& client, std::vector<std::string> row_ids);

/// Renders the ENS / VSNL instruction templates.
std::string render_ens_prompt(const GenerationConfig& cfg, std::string_view label);
std::string render_vsnl_prompt(const GenerationConfig& cfg, std::string_view label,
                               std::size_t count);

} // namespace ants
