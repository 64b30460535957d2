#include "ants/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ants/errors.hpp"

namespace ants {

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ConfigError("temperature must be positive and finite");
    }
}

} // namespace

void ScoreConfig::validate() const {
    check_tau(temperature);
    if (group_size == 0) {
        throw ConfigError("group_size must be at least 1");
    }
    if (lambda_override && !(*lambda_override >= 0.0 && *lambda_override <= 1.0)) {
        throw ConfigError("lambda_override must lie in [0, 1]");
    }
}

IdTerm make_id_term(std::span<const double> sim_id, double tau) {
    IdTerm t;
    t.max = *std::max_element(sim_id.begin(), sim_id.end());
    for (double s : sim_id) {
        t.sum += std::exp((s - t.max) / tau);
    }
    return t;
}

double group_score(const IdTerm& id, std::span<const double> sim_neg, double tau) {
    double shift = id.max;
    for (double s : sim_neg) {
        shift = std::max(shift, s);
    }
    const double numerator = id.sum * std::exp((id.max - shift) / tau);
    double negatives = 0.0;
    for (double s : sim_neg) {
        negatives += std::exp((s - shift) / tau);
    }
    return numerator / (numerator + negatives);
}

double softmax_score(std::span<const double> sim_id, std::span<const double> sim_neg, double tau) {
    check_tau(tau);
    if (sim_id.empty()) {
        throw InputError("softmax_score: ID similarity vector is empty");
    }
    return group_score(make_id_term(sim_id, tau), sim_neg, tau);
}

double grouped_softmax(std::span<const double> sim_id, std::span<const double> sim_neg,
                       std::size_t group_size, double tau) {
    check_tau(tau);
    if (sim_id.empty()) {
        throw InputError("grouped_softmax: ID similarity vector is empty");
    }
    if (group_size == 0) {
        throw ConfigError("grouped_softmax: group size must be positive");
    }
    return grouped_from_id_term(make_id_term(sim_id, tau), sim_neg, group_size, tau);
}

double grouped_from_id_term(const IdTerm& id, std::span<const double> sim_neg,
                            std::size_t group_size, double tau) {
    if (sim_neg.empty()) {
        return group_score(id, sim_neg, tau);
    }
    double total = 0.0;
    std::size_t groups = 0;
    for (std::size_t begin = 0; begin < sim_neg.size(); begin += group_size) {
        const std::size_t len = std::min(group_size, sim_neg.size() - begin);
        total += group_score(id, sim_neg.subspan(begin, len), tau);
        ++groups;
    }
    return total / static_cast<double>(groups);
}

double grouped_score(std::span<const float> v, const LabelSpace& ids, const NegativeSpace& neg,
                     const ScoreConfig& cfg) {
    if (v.size() != ids.dim() || neg.features().dim() != ids.dim()) {
        throw DimError("grouped_score: dimension mismatch");
    }
    std::vector<double> sim_id(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        sim_id[i] = cosine(v, ids.features().row(i));
    }
    std::vector<double> sim_neg(neg.size());
    for (std::size_t j = 0; j < neg.size(); ++j) {
        sim_neg[j] = cosine(v, neg.features().row(j));
    }
    return grouped_softmax(sim_id, sim_neg, neg.group_size(), cfg.temperature);
}

double lambda_from_means(double mean_ens, double mean_vsnl) {
    const double ens_gap = 1.0 - mean_ens;
    const double vsnl_gap = 1.0 - mean_vsnl;
    const double denom = ens_gap + vsnl_gap;
    if (denom == 0.0) {
        return 0.5;
    }
    return ens_gap / denom;
}

double adaptive_lambda(std::span<const double> ens_scores, std::span<const double> vsnl_scores) {
    if (ens_scores.empty() || vsnl_scores.empty()) {
        throw InputError("adaptive_lambda: score vectors must be non-empty");
    }
    if (ens_scores.size() != vsnl_scores.size()) {
        throw InputError("adaptive_lambda: score vectors differ in length");
    }
    const auto n = static_cast<double>(ens_scores.size());
    const double a = std::accumulate(ens_scores.begin(), ens_scores.end(), 0.0) / n;
    const double b = std::accumulate(vsnl_scores.begin(), vsnl_scores.end(), 0.0) / n;
    return lambda_from_means(a, b);
}

double fused_score(double s_ens, double s_vsnl, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw InputError("fused_score: lambda must lie in [0, 1]");
    }
    return lambda * s_ens + (1.0 - lambda) * s_vsnl;
}

Tag detect(double score, double gamma) noexcept { return score >= gamma ? Tag::ID : Tag::OOD; }

} // namespace ants
