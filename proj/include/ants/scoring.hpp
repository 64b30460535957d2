#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "ants/model.hpp"

namespace ants {

struct ScoreConfig {
    double temperature = 0.01;
    /// Group size used when building negative spaces.
    std::size_t group_size = 100;
    /// Weight used by the fixed-lambda pipeline mode.
    std::optional<double> lambda_override;

    /// Throws ConfigError when temperature <= 0, group_size == 0 or the override is outside [0, 1].
    void validate() const;
};

struct ScoreRecord {
    std::string image_id;
    double s_nl = 1.0;
    double s_ens = 1.0;
    double s_vsnl = 1.0;
    double s_ada = 1.0;
    std::size_t predicted_class = 0;
    std::optional<Tag> tag;

    friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

/// Max-shifted ID half of the softmax: max similarity and sum of exp((s - max) / tau).
struct IdTerm {
    double max = 0.0;
    double sum = 0.0;
};

IdTerm make_id_term(std::span<const double> sim_id, double tau);

/// Score of one negative group given a precomputed ID term. An empty group yields exactly 1.
double group_score(const IdTerm& id, std::span<const double> sim_neg, double tau);

/// Mean group_score over contiguous groups of `group_size`; no argument validation.
double grouped_from_id_term(const IdTerm& id, std::span<const double> sim_neg,
                            std::size_t group_size, double tau);

/// sum_i e^{id_i/tau} / (sum_i e^{id_i/tau} + sum_j e^{neg_j/tau}), evaluated with a max shift.
/// Exactly 1.0 when sim_neg is empty. Throws ConfigError for tau <= 0, InputError for empty sim_id.
double softmax_score(std::span<const double> sim_id, std::span<const double> sim_neg, double tau);

/// Mean of softmax_score over contiguous groups of `group_size` negatives (last group may be
/// short). Each group sees the full ID similarity vector.
double grouped_softmax(std::span<const double> sim_id, std::span<const double> sim_neg,
                       std::size_t group_size, double tau);

/// Grouped score of image `v` against an ID space and a negative space, using the negative
/// space's own group size and `cfg.temperature`.
double grouped_score(std::span<const float> v, const LabelSpace& ids, const NegativeSpace& neg,
                     const ScoreConfig& cfg);

/// F(a, b) = (1 - a) / ((1 - a) + (1 - b)); F(1, 1) is defined as 0.5.
double lambda_from_means(double mean_ens, double mean_vsnl);

/// F applied to the means of the two score vectors. Throws InputError on empty or
/// length-mismatched input.
double adaptive_lambda(std::span<const double> ens_scores, std::span<const double> vsnl_scores);

/// lambda * s_ens + (1 - lambda) * s_vsnl. Throws InputError when lambda is outside [0, 1].
double fused_score(double s_ens, double s_vsnl, double lambda);

/// ID iff score >= gamma.
Tag detect(double score, double gamma) noexcept;

} // namespace ants
