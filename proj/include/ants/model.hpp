#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ants {

/// Rows whose norm is already within this distance of 1 are stored untouched, so that
/// normalization is idempotent and save/load round trips are bitwise.
inline constexpr double kUnitTolerance = 1e-6;

/// Row-major matrix of unit-norm float vectors with one unique string id per row.
/// Immutable once constructed.
class EmbeddingMatrix {
  public:
    EmbeddingMatrix() = default;

    /// Validates finiteness and id uniqueness, then L2-normalizes every row.
    /// Throws DataError on NaN/Inf, zero rows, duplicate ids or an id/row count mismatch.
    EmbeddingMatrix(std::vector<float> data, std::size_t dim, std::vector<std::string> ids);

    /// Positional ids "0", "1", ... for matrices whose rows carry no external identity.
    static EmbeddingMatrix with_positional_ids(std::vector<float> data, std::size_t dim);

    [[nodiscard]] std::size_t rows() const noexcept { return ids_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] bool empty() const noexcept { return ids_.empty(); }

    [[nodiscard]] std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
    [[nodiscard]] const std::string& id(std::size_t i) const { return ids_.at(i); }

    /// Copies the listed rows (in the given order) into a new matrix.
    [[nodiscard]] EmbeddingMatrix select(std::span<const std::size_t> rows) const;

    /// Same vectors under new ids.
    [[nodiscard]] EmbeddingMatrix relabeled(std::vector<std::string> ids) const;

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

  private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
    std::vector<std::string> ids_;
};

/// Dot product accumulated in double, left to right.
double dot(std::span<const float> a, std::span<const float> b);

/// Cosine of two unit vectors, clamped to [-1, 1]. Throws DimError on length mismatch.
double cosine(std::span<const float> a, std::span<const float> b);

// ---------------------------------------------------------------------------
// Binary embedding format
//
//   magic   "NSPC"        4 bytes
//   version u32 LE        (currently 1)
//   rows    u64 LE
//   dim     u32 LE
//   payload rows*dim float32 LE, row-major
//
// Row ids live in the JSON sidecar "<file>.ids.json" (array of strings).
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFormatVersion = 1;

std::filesystem::path sidecar_path(const std::filesystem::path& file);

/// Loads a matrix and its sidecar. Throws FormatError on a bad header or truncated payload,
/// DataError on non-finite values, a sidecar/row-count mismatch, or when `expected_dim` is set
/// and differs from the stored dim.
EmbeddingMatrix load_embeddings(const std::filesystem::path& file,
                                std::optional<std::size_t> expected_dim = std::nullopt);

void save_embeddings(const std::filesystem::path& file, const EmbeddingMatrix& m);

/// Header + payload only, for embedding matrices inside larger containers.
void write_embedding_blob(std::ostream& out, const EmbeddingMatrix& m);

/// Reads one blob written by write_embedding_blob and attaches `ids`.
EmbeddingMatrix read_embedding_blob(std::istream& in, std::vector<std::string> ids);

// ---------------------------------------------------------------------------
// Label and negative spaces
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultPromptTemplate = "The nice <label>.";

/// In-distribution labels with their text features; row i of `features` belongs to labels[i].
class LabelSpace {
  public:
    LabelSpace(std::vector<std::string> labels, EmbeddingMatrix features,
               std::string prompt_template = std::string(kDefaultPromptTemplate));

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return features_.dim(); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] const std::string& label(std::size_t i) const { return labels_.at(i); }
    [[nodiscard]] const EmbeddingMatrix& features() const noexcept { return features_; }
    [[nodiscard]] const std::string& prompt_template() const noexcept { return prompt_template_; }

    /// Case-folded, whitespace-normalized exact match against any ID label.
    [[nodiscard]] bool contains(std::string_view text) const;

  private:
    std::vector<std::string> labels_;
    std::vector<std::string> normalized_;
    EmbeddingMatrix features_;
    std::string prompt_template_;
};

/// Manifest: {"labels": [...], "prompt_template": "...", "features": "<path>"}.
/// A relative features path resolves against the manifest's directory.
LabelSpace load_label_space(const std::filesystem::path& manifest);
void save_label_space(const std::filesystem::path& manifest, const LabelSpace& space,
                      const std::filesystem::path& features_file);

enum class NegativeKind { NL, ENS, VSNL };

std::string_view to_string(NegativeKind kind);
NegativeKind negative_kind_from_string(std::string_view s);

class NegativeSpace {
  public:
    NegativeSpace(NegativeKind kind, std::vector<std::string> texts, EmbeddingMatrix features,
                  std::size_t group_size, std::uint64_t epoch = 0);

    [[nodiscard]] NegativeKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t size() const noexcept { return texts_.size(); }
    [[nodiscard]] const std::vector<std::string>& texts() const noexcept { return texts_; }
    [[nodiscard]] const EmbeddingMatrix& features() const noexcept { return features_; }
    [[nodiscard]] std::size_t group_size() const noexcept { return group_size_; }
    [[nodiscard]] std::uint64_t epoch() const noexcept { return epoch_; }
    [[nodiscard]] std::size_t group_count() const noexcept {
        return (texts_.size() + group_size_ - 1) / group_size_;
    }

    /// Throws DataError if any text matches an ID label or the dims disagree.
    void check_disjoint(const LabelSpace& ids) const;

    friend bool operator==(const NegativeSpace&, const NegativeSpace&) = default;

  private:
    NegativeKind kind_;
    std::vector<std::string> texts_;
    EmbeddingMatrix features_;
    std::size_t group_size_;
    std::uint64_t epoch_;
};

enum class Tag { ID, OOD };

std::string_view to_string(Tag tag);
Tag tag_from_string(std::string_view s);

struct TestBatch {
    EmbeddingMatrix images;
    /// Per-row ground truth, evaluation only. Empty or exactly images.rows() long.
    std::vector<Tag> ground_truth;
};

} // namespace ants
