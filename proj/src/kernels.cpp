#include "ants/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <string>

#include "ants/errors.hpp"
#include "ants/scoring.hpp"

namespace ants::kernels {

namespace {

void check_inputs(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features,
                  std::span<const SpaceRef> spaces, double tau) {
    if (!(tau > 0.0)) {
        throw ConfigError("score_images: temperature must be positive");
    }
    if (id_features.empty()) {
        throw InputError("score_images: empty ID feature matrix");
    }
    if (!images.empty() && images.dim() != id_features.dim()) {
        throw DimError("score_images: image dim " + std::to_string(images.dim()) +
                       " vs ID dim " + std::to_string(id_features.dim()));
    }
    for (const auto& s : spaces) {
        if (s.features == nullptr || s.group_size == 0) {
            throw InputError("score_images: invalid negative space reference");
        }
        if (s.features->dim() != id_features.dim()) {
            throw DimError("score_images: negative space dim " + std::to_string(s.features->dim()) +
                           " vs ID dim " + std::to_string(id_features.dim()));
        }
    }
}

void check_dims(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    if (!a.empty() && !b.empty() && a.dim() != b.dim()) {
        throw DimError("dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()) + ")");
    }
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

void similarities(std::span<const float> v, const EmbeddingMatrix& m, std::vector<double>& out) {
    out.resize(m.rows());
    for (std::size_t j = 0; j < m.rows(); ++j) {
        out[j] = cosine(v, m.row(j));
    }
}

} // namespace

BatchScores score_images(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features,
                         std::span<const SpaceRef> spaces, double tau) {
    check_inputs(images, id_features, spaces, tau);
    BatchScores out;
    out.images = images.rows();
    out.spaces = spaces.size();
    out.predicted.resize(out.images);
    out.scores.resize(out.images * out.spaces);
    const auto n = static_cast<std::ptrdiff_t>(out.images);

#pragma omp parallel
    {
        std::vector<double> sim_id;
        std::vector<double> sim_neg;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto v = images.row(static_cast<std::size_t>(i));
            similarities(v, id_features, sim_id);
            out.predicted[i] = argmax(sim_id);
            const IdTerm term = make_id_term(sim_id, tau);
            for (std::size_t s = 0; s < spaces.size(); ++s) {
                similarities(v, *spaces[s].features, sim_neg);
                out.scores[i * out.spaces + s] =
                    grouped_from_id_term(term, sim_neg, spaces[s].group_size, tau);
            }
        }
    }
    return out;
}

std::vector<double> max_similarity(const EmbeddingMatrix& rows, const EmbeddingMatrix& against) {
    check_dims(rows, against);
    if (against.empty()) {
        throw InputError("max_similarity: empty reference matrix");
    }
    std::vector<double> out(rows.rows());
    const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto v = rows.row(static_cast<std::size_t>(i));
        double best = cosine(v, against.row(0));
        for (std::size_t j = 1; j < against.rows(); ++j) {
            best = std::max(best, cosine(v, against.row(j)));
        }
        out[i] = best;
    }
    return out;
}

std::vector<std::size_t> classify(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features) {
    check_dims(images, id_features);
    if (id_features.empty()) {
        throw InputError("classify: empty ID feature matrix");
    }
    std::vector<std::size_t> out(images.rows());
    const auto n = static_cast<std::ptrdiff_t>(images.rows());
#pragma omp parallel
    {
        std::vector<double> sim;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            similarities(images.row(static_cast<std::size_t>(i)), id_features, sim);
            out[i] = argmax(sim);
        }
    }
    return out;
}

void set_thread_limit(int threads) {
    if (threads > 0) {
        omp_set_num_threads(threads);
    } else {
        omp_set_num_threads(omp_get_num_procs());
    }
}

namespace serial {

BatchScores score_images(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features,
                         std::span<const SpaceRef> spaces, double tau) {
    check_inputs(images, id_features, spaces, tau);
    BatchScores out;
    out.images = images.rows();
    out.spaces = spaces.size();
    for (std::size_t i = 0; i < images.rows(); ++i) {
        std::vector<double> sim_id(id_features.rows());
        for (std::size_t k = 0; k < id_features.rows(); ++k) {
            sim_id[k] = cosine(images.row(i), id_features.row(k));
        }
        out.predicted.push_back(argmax(sim_id));
        for (const auto& space : spaces) {
            std::vector<double> sim_neg(space.features->rows());
            for (std::size_t j = 0; j < sim_neg.size(); ++j) {
                sim_neg[j] = cosine(images.row(i), space.features->row(j));
            }
            out.scores.push_back(grouped_softmax(sim_id, sim_neg, space.group_size, tau));
        }
    }
    return out;
}

std::vector<double> max_similarity(const EmbeddingMatrix& rows, const EmbeddingMatrix& against) {
    check_dims(rows, against);
    if (against.empty()) {
        throw InputError("max_similarity: empty reference matrix");
    }
    std::vector<double> out;
    out.reserve(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        double best = cosine(rows.row(i), against.row(0));
        for (std::size_t j = 1; j < against.rows(); ++j) {
            best = std::max(best, cosine(rows.row(i), against.row(j)));
        }
        out.push_back(best);
    }
    return out;
}

std::vector<std::size_t> classify(const EmbeddingMatrix& images, const EmbeddingMatrix& id_features) {
    check_dims(images, id_features);
    if (id_features.empty()) {
        throw InputError("classify: empty ID feature matrix");
    }
    std::vector<std::size_t> out;
    out.reserve(images.rows());
    for (std::size_t i = 0; i < images.rows(); ++i) {
        std::vector<double> sim(id_features.rows());
        for (std::size_t k = 0; k < sim.size(); ++k) {
            sim[k] = cosine(images.row(i), id_features.row(k));
        }
        out.push_back(argmax(sim));
    }
    return out;
}

} // namespace serial

} // namespace ants::kernels
