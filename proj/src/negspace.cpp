#include "ants/negspace.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <unordered_set>

#include "ants/errors.hpp"
#include "ants/fanout.hpp"
#include "ants/hash.hpp"
#include "ants/kernels.hpp"
#include "ants/text.hpp"

namespace ants {

void GenerationConfig::validate() const {
    if (len_min == 0 || len_min > len_max) {
        throw ConfigError("sentence length window must satisfy 1 <= len_min <= len_max");
    }
    if (attempts == 0) {
        throw ConfigError("generation attempts must be at least 1");
    }
    if (fanout == 0) {
        throw ConfigError("generation fanout must be at least 1");
    }
}

CorpusCandidates CorpusCandidates::from_matrix(EmbeddingMatrix features) {
    CorpusCandidates c;
    c.words = features.ids();
    c.features = std::move(features);
    return c;
}

std::string render_ens_prompt(const GenerationConfig& cfg, std::string_view label) {
    return text::replace_all(cfg.ens_prompt, "<y_i>", label);
}

std::string render_vsnl_prompt(const GenerationConfig& cfg, std::string_view label,
                               std::size_t count) {
    return text::replace_all(text::replace_all(cfg.vsnl_prompt, "<y_i>", label), "<k>",
                             std::to_string(count));
}

NegativeSpace select_initial_nls(const CorpusCandidates& corpus, const LabelSpace& ids,
                                 std::size_t m, std::size_t group_size) {
    if (m == 0) {
        throw InputError("select_initial_nls: M must be positive");
    }
    if (corpus.words.size() != corpus.features.rows()) {
        throw InputError("select_initial_nls: corpus words and features disagree");
    }
    if (corpus.features.dim() != ids.dim()) {
        throw DimError("select_initial_nls: corpus dim differs from label space dim");
    }
    const auto max_sim = kernels::max_similarity(corpus.features, ids.features());
    std::vector<std::size_t> order;
    order.reserve(corpus.words.size());
    for (std::size_t k = 0; k < corpus.words.size(); ++k) {
        if (!ids.contains(corpus.words[k])) {
            order.push_back(k);
        }
    }
    if (order.size() < m) {
        throw InputError("select_initial_nls: only " + std::to_string(order.size()) +
                         " corpus words remain after excluding ID labels; need " +
                         std::to_string(m));
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return max_sim[a] < max_sim[b]; });
    order.resize(m);
    std::vector<std::string> texts;
    texts.reserve(m);
    for (std::size_t k : order) {
        texts.push_back(corpus.words[k]);
    }
    return {NegativeKind::NL, std::move(texts), corpus.features.select(order), group_size, 0};
}

EmbeddingMatrix embed_space(std::span<const std::string> texts, std::string_view tmpl,
                            GenerationClient& client, std::vector<std::string> row_ids) {
    if (texts.empty()) {
        throw InputError("embed_space: no texts to embed");
    }
    if (row_ids.size() != texts.size()) {
        throw InputError("embed_space: row id count differs from text count");
    }
    std::vector<std::string> requests;
    requests.reserve(texts.size());
    for (const auto& t : texts) {
        requests.push_back(text::apply_template(tmpl, t));
    }
    EmbeddingMatrix raw;
    try {
        raw = client.embed_texts(requests);
    } catch (const ClientError& e) {
        throw GenerationError(texts.front(), std::string("text embedding failed: ") + e.what());
    }
    if (raw.rows() != texts.size()) {
        throw GenerationError(texts.front(), "text embedding returned " +
                                                 std::to_string(raw.rows()) + " rows for " +
                                                 std::to_string(texts.size()) + " texts");
    }
    return raw.relabeled(std::move(row_ids));
}

namespace {

/// Uniform sample of k of n indices without replacement, returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(rng(), n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

} // namespace

NegativeSpace generate_ens(std::span<const NegativeImage> negatives, const LabelSpace& ids,
                           GenerationClient& client, std::size_t m, std::size_t group_size,
                           const GenerationConfig& cfg, std::uint64_t seed, std::uint64_t epoch) {
    if (negatives.empty()) {
        throw InputError("generate_ens: no negative images");
    }
    if (m == 0) {
        throw InputError("generate_ens: M must be positive");
    }
    cfg.validate();

    std::vector<std::size_t> chosen;
    if (negatives.size() >= m) {
        chosen = sample_indices(negatives.size(), m, seed);
    } else {
        chosen.resize(negatives.size());
        std::iota(chosen.begin(), chosen.end(), 0);
    }

    auto describe = [&](std::uint64_t request) -> std::optional<std::string> {
        const auto& neg = negatives[chosen[request % chosen.size()]];
        const auto& label = ids.label(neg.predicted);
        const auto prompt = render_ens_prompt(cfg, label);
        std::optional<std::string> out_of_window;
        for (std::size_t attempt = 0; attempt < cfg.attempts; ++attempt) {
            std::string sentence;
            try {
                sentence = trim(client.describe_image(
                    {neg.image, label, prompt, request * cfg.attempts + attempt}));
            } catch (const ClientError& e) {
                throw GenerationError(neg.image.id, std::string("describe_image failed: ") + e.what());
            }
            if (sentence.empty() || text::contains_whole_word(sentence, label) ||
                ids.contains(sentence)) {
                continue;
            }
            const auto words = text::word_count(sentence);
            if (words >= cfg.len_min && words <= cfg.len_max) {
                return sentence;
            }
            out_of_window = std::move(sentence);
        }
        if (out_of_window && text::word_count(*out_of_window) > cfg.len_max) {
            return text::truncate_words(*out_of_window, cfg.len_max);
        }
        return out_of_window;
    };

    // Each wave asks for exactly the missing number of sentences; dropped requests are replaced
    // by further round-robin requests, up to 2M requests in total.
    const std::uint64_t request_cap = 2 * static_cast<std::uint64_t>(std::max(m, chosen.size()));
    std::vector<std::string> sentences;
    std::uint64_t next_request = 0;
    while (sentences.size() < m && next_request < request_cap) {
        const auto wave = std::min<std::uint64_t>(m - sentences.size(), request_cap - next_request);
        std::vector<std::optional<std::string>> results(wave);
        bounded_for(wave, cfg.fanout, [&](std::size_t k) { results[k] = describe(next_request + k); });
        for (auto& r : results) {
            if (r) {
                sentences.push_back(std::move(*r));
            }
        }
        next_request += wave;
    }
    if (sentences.empty()) {
        throw GenerationError(negatives.front().image.id,
                              "no description passed the label and length filters");
    }

    std::vector<std::string> row_ids(sentences.size());
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        row_ids[i] = "ens:" + std::to_string(epoch) + ":" + std::to_string(i);
    }
    auto features = embed_space(sentences, "", client, std::move(row_ids));
    NegativeSpace space(NegativeKind::ENS, std::move(sentences), std::move(features), group_size,
                        epoch);
    space.check_disjoint(ids);
    return space;
}

NegativeSpace generate_vsnl(const SimilarClassSubset& subset, const LabelSpace& ids,
                            GenerationClient& client, std::size_t m, std::size_t group_size,
                            const GenerationConfig& cfg, std::uint64_t epoch) {
    if (subset.class_indices.empty()) {
        throw InputError("generate_vsnl: empty class subset");
    }
    if (m == 0) {
        throw InputError("generate_vsnl: M must be positive");
    }
    cfg.validate();
    const std::size_t classes = subset.class_indices.size();
    const std::size_t per_class = (m + classes - 1) / classes;

    std::vector<std::vector<std::string>> results(classes);
    bounded_for(classes, cfg.fanout, [&](std::size_t k) {
        const auto& name = ids.label(subset.class_indices[k]);
        try {
            results[k] = client.similar_labels({name, per_class, render_vsnl_prompt(cfg, name, per_class)});
        } catch (const ClientError& e) {
            throw GenerationError(name, std::string("similar_labels failed: ") + e.what());
        }
    });

    std::vector<std::string> labels;
    std::unordered_set<std::string> seen;
    for (const auto& batch : results) {
        const std::size_t take = std::min(per_class, batch.size());
        for (std::size_t i = 0; i < take && labels.size() < m; ++i) {
            auto label = trim(batch[i]);
            auto key = text::normalize_label(label);
            if (key.empty() || ids.contains(key) || !seen.insert(key).second) {
                continue;
            }
            labels.push_back(std::move(label));
        }
    }
    if (labels.empty()) {
        throw GenerationError(ids.label(subset.class_indices.front()),
                              "no visually similar label survived deduplication");
    }
    auto features = embed_space(labels, ids.prompt_template(), client, labels);
    NegativeSpace space(NegativeKind::VSNL, std::move(labels), std::move(features), group_size,
                        epoch);
    space.check_disjoint(ids);
    return space;
}

} // namespace ants
