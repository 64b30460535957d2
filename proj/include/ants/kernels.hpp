#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ants/model.hpp"

// Batch scoring kernels. The default namespace holds the OpenMP implementations;
// ants::kernels::serial holds the single-threaded reference they are tested against.
// Both produce bitwise-identical results: every per-image quantity is computed by the same
// sequence of floating-point operations regardless of thread count.

namespace ants::kernels {

/// One negative space as seen by the kernels.
struct SpaceRef {
    const EmbeddingMatrix* features = nullptr;
    std::size_t group_size = 1;
};

struct BatchScores {
    std::size_t images = 0;
    std::size_t spaces = 0;
    /// Argmax over ID similarities, lowest index on ties.
    std::vector<std::size_t> predicted;
    /// Row-major images x spaces grouped scores.
    std::vector<double> scores;

    [[nodiscard]] double score(std::size_t image, std::size_t space) const {
        return scores[image * spaces + space];
    }
};

/// Grouped softmax score of every image against every space, plus the ID prediction.
/// Throws DimError when dimensions disagree.
BatchScores score_images(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features,
                         std::span<const SpaceRef> spaces, double tau);

/// For every row of `rows`, the maximum cosine to any row of `against`.
std::vector<double> max_similarity(const EmbeddingMatrix& rows, const EmbeddingMatrix& against);

/// Argmax cosine class per image.
std::vector<std::size_t> classify(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features);

namespace serial {

BatchScores score_images(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features,
                         std::span<const SpaceRef> spaces, double tau);

std::vector<double> max_similarity(const EmbeddingMatrix& rows, const EmbeddingMatrix& against);

std::vector<std::size_t> classify(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features);

} // namespace serial

/// Caps the OpenMP team size for all kernels; 0 restores the runtime default.
void set_thread_limit(int threads);

} // namespace ants::kernels
