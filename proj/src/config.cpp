#include "ants/config.hpp"

#include <set>

#include "ants/errors.hpp"

namespace ants {

using nlohmann::json;

json to_json(const PipelineConfig& cfg) {
    json score = {{"temperature", cfg.score.temperature}, {"group_size", cfg.score.group_size}};
    score["lambda_override"] =
        cfg.score.lambda_override ? json(*cfg.score.lambda_override) : json(nullptr);
    return {
        {"score", score},
        {"mining",
         {{"initial_threshold", cfg.mining.initial_threshold},
          {"selection_ratio", cfg.mining.selection_ratio},
          {"class_ratio", cfg.mining.class_ratio},
          {"cache_capacity", cfg.mining.cache_capacity}}},
        {"generation",
         {{"ens_prompt", cfg.generation.ens_prompt},
          {"vsnl_prompt", cfg.generation.vsnl_prompt},
          {"len_min", cfg.generation.len_min},
          {"len_max", cfg.generation.len_max},
          {"attempts", cfg.generation.attempts},
          {"fanout", cfg.generation.fanout}}},
        {"negatives", cfg.negatives},
        {"regen_every", cfg.regen_every},
        {"mode", std::string(to_string(cfg.mode))},
        {"include_current_batch", cfg.include_current_batch},
        {"lambda_ema", cfg.lambda_ema},
        {"adapt", cfg.adapt},
        {"seed", cfg.seed},
    };
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected a JSON object");
    }
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) {
            throw ConfigError(where + ": unknown key '" + k + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

} // namespace

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig cfg) {
    try {
        reject_unknown(j,
                       {"score", "mining", "generation", "negatives", "regen_every", "mode",
                        "include_current_batch", "lambda_ema", "adapt", "seed"},
                       "config");
        if (j.contains("score")) {
            const auto& s = j.at("score");
            reject_unknown(s, {"temperature", "group_size", "lambda_override"}, "config.score");
            read(s, "temperature", cfg.score.temperature);
            read(s, "group_size", cfg.score.group_size);
            if (s.contains("lambda_override")) {
                const auto& v = s.at("lambda_override");
                cfg.score.lambda_override =
                    v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            }
        }
        if (j.contains("mining")) {
            const auto& m = j.at("mining");
            reject_unknown(m, {"initial_threshold", "selection_ratio", "class_ratio", "cache_capacity"},
                           "config.mining");
            read(m, "initial_threshold", cfg.mining.initial_threshold);
            read(m, "selection_ratio", cfg.mining.selection_ratio);
            read(m, "class_ratio", cfg.mining.class_ratio);
            read(m, "cache_capacity", cfg.mining.cache_capacity);
        }
        if (j.contains("generation")) {
            const auto& g = j.at("generation");
            reject_unknown(g, {"ens_prompt", "vsnl_prompt", "len_min", "len_max", "attempts", "fanout"},
                           "config.generation");
            read(g, "ens_prompt", cfg.generation.ens_prompt);
            read(g, "vsnl_prompt", cfg.generation.vsnl_prompt);
            read(g, "len_min", cfg.generation.len_min);
            read(g, "len_max", cfg.generation.len_max);
            read(g, "attempts", cfg.generation.attempts);
            read(g, "fanout", cfg.generation.fanout);
        }
        read(j, "negatives", cfg.negatives);
        read(j, "regen_every", cfg.regen_every);
        if (j.contains("mode")) {
            cfg.mode = score_mode_from_string(j.at("mode").get<std::string>());
        }
        read(j, "include_current_batch", cfg.include_current_batch);
        read(j, "lambda_ema", cfg.lambda_ema);
        read(j, "adapt", cfg.adapt);
        read(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

} // namespace ants
