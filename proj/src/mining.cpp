#include "ants/mining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ants/errors.hpp"
#include "ants/hash.hpp"

namespace ants {

void MiningConfig::validate() const {
    if (!(initial_threshold > 0.0 && initial_threshold < 1.0)) {
        throw ConfigError("initial_threshold must lie in (0, 1)");
    }
    if (!(selection_ratio > 0.0 && selection_ratio < 1.0)) {
        throw ConfigError("selection_ratio must lie in (0, 1)");
    }
    if (!(class_ratio > 0.0 && class_ratio <= 1.0)) {
        throw ConfigError("class_ratio must lie in (0, 1]");
    }
    if (cache_capacity == 0) {
        throw ConfigError("cache_capacity must be positive");
    }
}

std::size_t ratio_count(double ratio, std::size_t n) {
    if (n == 0) {
        return 0;
    }
    const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

MinedNegatives select_negatives(std::span<const double> nl_scores, double threshold,
                                double selection_ratio) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < nl_scores.size(); ++i) {
        if (nl_scores[i] < threshold) {
            candidates.push_back(i);
        }
    }
    MinedNegatives out;
    if (candidates.empty()) {
        return out;
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return nl_scores[a] < nl_scores[b]; });
    candidates.resize(ratio_count(selection_ratio, candidates.size()));
    out.gamma_star = nl_scores[candidates.back()];
    out.positions = std::move(candidates);
    return out;
}

SimilarClassSubset similar_classes(std::span<const std::size_t> predictions, std::size_t n_classes,
                                   double class_ratio) {
    if (predictions.empty()) {
        throw InputError("similar_classes: no cached predictions");
    }
    if (n_classes == 0) {
        throw InputError("similar_classes: no ID classes");
    }
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t p : predictions) {
        if (p >= n_classes) {
            throw InputError("similar_classes: class index " + std::to_string(p) + " out of range");
        }
        ++counts[p];
    }
    SimilarClassSubset out;
    out.frequencies.resize(n_classes);
    const auto total = static_cast<double>(predictions.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        out.frequencies[c] = static_cast<double>(counts[c]) / total;
    }
    std::vector<std::size_t> order(n_classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    order.resize(ratio_count(class_ratio, n_classes));
    out.class_indices = std::move(order);
    return out;
}

std::size_t classify_id(std::span<const float> v, const LabelSpace& ids) {
    if (v.size() != ids.dim()) {
        throw DimError("classify_id: dimension mismatch");
    }
    std::size_t best = 0;
    double best_sim = cosine(v, ids.features().row(0));
    for (std::size_t i = 1; i < ids.size(); ++i) {
        const double s = cosine(v, ids.features().row(i));
        if (s > best_sim) {
            best_sim = s;
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// HistoryCache

HistoryCache::HistoryCache(std::size_t dim, std::size_t capacity, std::uint64_t seed)
    : dim_(dim), capacity_(capacity), seed_(seed) {
    if (capacity_ == 0) {
        throw ConfigError("history cache capacity must be positive");
    }
}

void HistoryCache::append(const EmbeddingMatrix& images, std::span<const double> nl_scores,
                          std::span<const std::size_t> predicted) {
    if (!images.empty() && images.dim() != dim_) {
        throw DimError("history cache: image dim " + std::to_string(images.dim()) +
                       " vs cache dim " + std::to_string(dim_));
    }
    if (nl_scores.size() != images.rows() || predicted.size() != images.rows()) {
        throw InputError("history cache: scores/predictions do not match the batch size");
    }
    for (std::size_t r = 0; r < images.rows(); ++r) {
        const auto row = images.row(r);
        Entry e{images.id(r), std::vector<float>(row.begin(), row.end()), nl_scores[r],
                predicted[r]};
        if (entries_.size() < capacity_) {
            entries_.push_back(std::move(e));
        } else {
            // Item number `streamed_` (0-based) survives with probability capacity/(streamed_+1).
            const std::uint64_t slot = bounded(derive_seed(seed_, streamed_), streamed_ + 1);
            if (slot < capacity_) {
                entries_[slot] = std::move(e);
            }
        }
        ++streamed_;
    }
}

std::vector<double> HistoryCache::nl_scores() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        out.push_back(e.nl_score);
    }
    return out;
}

std::vector<std::size_t> HistoryCache::predictions() const {
    std::vector<std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        out.push_back(e.predicted);
    }
    return out;
}

EmbeddingMatrix HistoryCache::images(std::span<const std::size_t> slots) const {
    std::vector<float> data;
    data.reserve(slots.size() * dim_);
    std::vector<std::string> ids;
    ids.reserve(slots.size());
    for (std::size_t s : slots) {
        const auto& e = entries_.at(s);
        data.insert(data.end(), e.embedding.begin(), e.embedding.end());
        ids.push_back(e.id);
    }
    return {std::move(data), dim_, std::move(ids)};
}

HistoryCache HistoryCache::restore(std::size_t dim, std::size_t capacity, std::uint64_t seed,
                                   std::uint64_t streamed, std::vector<Entry> entries) {
    HistoryCache c(dim, capacity, seed);
    if (entries.size() > capacity || entries.size() > streamed) {
        throw DataError("history cache: restored entries exceed capacity or streamed count");
    }
    for (const auto& e : entries) {
        if (e.embedding.size() != dim) {
            throw DimError("history cache: restored entry '" + e.id + "' has wrong dim");
        }
    }
    c.streamed_ = streamed;
    c.entries_ = std::move(entries);
    return c;
}

MinedNegatives mine_negative_images(const HistoryCache& cache, const MiningConfig& cfg) {
    const auto scores = cache.nl_scores();
    auto mined = select_negatives(scores, cfg.initial_threshold, cfg.selection_ratio);
    mined.image_ids.reserve(mined.positions.size());
    for (std::size_t p : mined.positions) {
        mined.image_ids.push_back(cache.entry(p).id);
    }
    return mined;
}

SimilarClassSubset mine_similar_classes(const HistoryCache& cache, const LabelSpace& ids,
                                        const MiningConfig& cfg) {
    return similar_classes(cache.predictions(), ids.size(), cfg.class_ratio);
}

} // namespace ants
