#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ants/model.hpp"

namespace ants {

struct MiningConfig {
    /// Images with an NL score below this are negative-image candidates.
    double initial_threshold = 0.9;
    /// Fraction of candidates (lowest NL score first) kept as negative images.
    double selection_ratio = 0.5;
    /// Fraction of ID classes kept as the visually similar subset.
    double class_ratio = 0.08;
    std::size_t cache_capacity = 20000;

    void validate() const;
};

/// max(1, floor(ratio * n)) for n >= 1; 0 for n == 0. A 1e-9 slack absorbs products such as
/// 0.29 * 100 landing just below an integer.
std::size_t ratio_count(double ratio, std::size_t n);

struct MinedNegatives {
    /// Positions in the scored sequence (cache slots), ordered by ascending NL score.
    std::vector<std::size_t> positions;
    std::vector<std::string> image_ids;
    /// Largest NL score among the selection; unset when nothing was selected.
    std::optional<double> gamma_star;

    [[nodiscard]] bool empty() const noexcept { return positions.empty(); }
};

/// Filters scores below `threshold`, then keeps the ratio_count(selection_ratio, candidates)
/// lowest. Ties keep their original order. image_ids are left empty.
MinedNegatives select_negatives(std::span<const double> nl_scores, double threshold,
                                double selection_ratio);

struct SimilarClassSubset {
    /// Top classes by frequency, highest first, lowest index on ties.
    std::vector<std::size_t> class_indices;
    /// Fraction of cached images predicted as each class; sums to 1.
    std::vector<double> frequencies;
};

/// Frequencies of `predictions` over `n_classes` and the top ratio_count(class_ratio, N) classes.
/// Throws InputError on empty predictions or an out-of-range class index.
SimilarClassSubset similar_classes(std::span<const std::size_t> predictions, std::size_t n_classes,
                                   double class_ratio);

/// Argmax cosine against the ID features, lowest index on ties.
std::size_t classify_id(std::span<const float> v, const LabelSpace& ids);

/// Bounded history of test images with their fixed-NL scores and ID predictions.
/// Past capacity it keeps a uniform sample of everything streamed (reservoir sampling).
/// Replacement draws are a pure function of (seed, stream position), so the cache carries no
/// RNG state.
class HistoryCache {
  public:
    HistoryCache(std::size_t dim, std::size_t capacity, std::uint64_t seed);

    struct Entry {
        std::string id;
        std::vector<float> embedding;
        double nl_score = 1.0;
        std::size_t predicted = 0;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    /// Appends every row of `images` in order. Throws DimError on dim mismatch, InputError when
    /// the score/prediction vectors do not match the row count.
    void append(const EmbeddingMatrix& images, std::span<const double> nl_scores,
                std::span<const std::size_t> predicted);

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::uint64_t streamed() const noexcept { return streamed_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const Entry& entry(std::size_t slot) const { return entries_.at(slot); }
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }

    [[nodiscard]] std::vector<double> nl_scores() const;
    [[nodiscard]] std::vector<std::size_t> predictions() const;
    /// The cached images at the given slots as a matrix.
    [[nodiscard]] EmbeddingMatrix images(std::span<const std::size_t> slots) const;

    /// Rebuilds a cache from checkpointed contents.
    static HistoryCache restore(std::size_t dim, std::size_t capacity, std::uint64_t seed,
                                std::uint64_t streamed, std::vector<Entry> entries);

    friend bool operator==(const HistoryCache&, const HistoryCache&) = default;

  private:
    std::size_t dim_;
    std::size_t capacity_;
    std::uint64_t seed_;
    std::uint64_t streamed_ = 0;
    std::vector<Entry> entries_;
};

/// Negative-image mining over the cache's fixed-NL scores; fills image_ids.
MinedNegatives mine_negative_images(const HistoryCache& cache, const MiningConfig& cfg);

/// Visually similar ID-class subset over every cached image's prediction.
SimilarClassSubset mine_similar_classes(const HistoryCache& cache, const LabelSpace& ids,
                                        const MiningConfig& cfg);

} // namespace ants
