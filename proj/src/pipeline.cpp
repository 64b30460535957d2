#include "ants/pipeline.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ants/config.hpp"
#include "ants/errors.hpp"
#include "ants/hash.hpp"
#include "ants/kernels.hpp"

namespace ants {

using nlohmann::json;

std::string_view to_string(ScoreMode mode) {
    switch (mode) {
    case ScoreMode::Adaptive: return "adaptive";
    case ScoreMode::EnsOnly: return "ens_only";
    case ScoreMode::VsnlOnly: return "vsnl_only";
    case ScoreMode::FixedLambda: return "fixed_lambda";
    }
    return "adaptive";
}

ScoreMode score_mode_from_string(std::string_view s) {
    if (s == "adaptive") return ScoreMode::Adaptive;
    if (s == "ens_only") return ScoreMode::EnsOnly;
    if (s == "vsnl_only") return ScoreMode::VsnlOnly;
    if (s == "fixed_lambda") return ScoreMode::FixedLambda;
    throw ConfigError("unknown score mode '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
    score.validate();
    mining.validate();
    generation.validate();
    if (negatives == 0) {
        throw ConfigError("negatives must be positive");
    }
    if (negatives < score.group_size) {
        throw ConfigError("negatives (" + std::to_string(negatives) +
                          ") must be at least the group size (" +
                          std::to_string(score.group_size) + ")");
    }
    if (regen_every == 0) {
        throw ConfigError("regen_every must be positive");
    }
    if (!(lambda_ema >= 0.0 && lambda_ema < 1.0)) {
        throw ConfigError("lambda_ema must lie in [0, 1)");
    }
    if (mode == ScoreMode::FixedLambda && !score.lambda_override) {
        throw ConfigError("fixed_lambda mode needs score.lambda_override");
    }
}

StreamState init_stream(const LabelSpace& ids, const CorpusCandidates& corpus,
                        const PipelineConfig& cfg) {
    cfg.validate();
    auto nl = select_initial_nls(corpus, ids, cfg.negatives, cfg.score.group_size);
    return StreamState{
        .cache = HistoryCache(ids.dim(), cfg.mining.cache_capacity, derive_seed(cfg.seed, 0x636163)),
        .nl_space = nl,
        .ens_space = nl,
        .vsnl_space = nl,
        .lambda = 0.5,
        .epoch = 0,
        .seed = cfg.seed,
        .degraded = false,
        .history = {},
    };
}

double effective_lambda(const PipelineConfig& cfg, double adaptive) {
    switch (cfg.mode) {
    case ScoreMode::Adaptive: return adaptive;
    case ScoreMode::EnsOnly: return 1.0;
    case ScoreMode::VsnlOnly: return 0.0;
    case ScoreMode::FixedLambda: return cfg.score.lambda_override.value_or(0.5);
    }
    return adaptive;
}

namespace {

std::array<kernels::SpaceRef, 3> space_refs(const StreamState& state) {
    return {kernels::SpaceRef{&state.nl_space.features(), state.nl_space.group_size()},
            kernels::SpaceRef{&state.ens_space.features(), state.ens_space.group_size()},
            kernels::SpaceRef{&state.vsnl_space.features(), state.vsnl_space.group_size()}};
}

} // namespace

std::vector<ScoreRecord> score_batch(const StreamState& state, const EmbeddingMatrix& images,
                                     const LabelSpace& ids, const ScoreConfig& cfg, double lambda) {
    const auto refs = space_refs(state);
    const auto sc = kernels::score_images(images, ids.features(), refs, cfg.temperature);
    std::vector<ScoreRecord> out;
    out.reserve(images.rows());
    for (std::size_t i = 0; i < images.rows(); ++i) {
        ScoreRecord r;
        r.image_id = images.id(i);
        r.s_nl = sc.score(i, 0);
        r.s_ens = sc.score(i, 1);
        r.s_vsnl = sc.score(i, 2);
        r.s_ada = fused_score(r.s_ens, r.s_vsnl, lambda);
        r.predicted_class = sc.predicted[i];
        out.push_back(std::move(r));
    }
    return out;
}

BatchResult process_batch(StreamState& state, const TestBatch& batch, const LabelSpace& ids,
                          GenerationClient& client, const PipelineConfig& cfg) {
    if (!batch.images.empty() && batch.images.dim() != ids.dim()) {
        throw DimError("batch dim " + std::to_string(batch.images.dim()) + " vs ID dim " +
                       std::to_string(ids.dim()));
    }
    if (!batch.ground_truth.empty() && batch.ground_truth.size() != batch.images.rows()) {
        throw InputError("ground truth length does not match the batch");
    }
    const std::uint64_t batch_index = state.epoch;

    const std::array<kernels::SpaceRef, 1> nl_ref{
        kernels::SpaceRef{&state.nl_space.features(), state.nl_space.group_size()}};
    const auto nl = kernels::score_images(batch.images, ids.features(), nl_ref,
                                          cfg.score.temperature);
    if (cfg.include_current_batch) {
        state.cache.append(batch.images, nl.scores, nl.predicted);
    }

    EpochSummary summary;
    if (cfg.adapt && batch_index % cfg.regen_every == 0 && !state.cache.empty()) {
        const auto mined = mine_negative_images(state.cache, cfg.mining);
        summary.gamma_star = mined.gamma_star;
        summary.mined = mined.positions.size();
        if (!mined.empty()) {
            try {
                std::vector<NegativeImage> negatives;
                negatives.reserve(mined.positions.size());
                for (std::size_t p : mined.positions) {
                    const auto& e = state.cache.entry(p);
                    negatives.push_back({ImageRef{e.id, e.embedding}, e.predicted});
                }
                auto ens = generate_ens(negatives, ids, client, cfg.negatives, cfg.score.group_size,
                                        cfg.generation, derive_seed(state.seed, batch_index),
                                        batch_index + 1);
                const auto subset = mine_similar_classes(state.cache, ids, cfg.mining);
                summary.similar_classes = subset.class_indices;
                auto vsnl = generate_vsnl(subset, ids, client, cfg.negatives, cfg.score.group_size,
                                          cfg.generation, batch_index + 1);

                const auto neg_images = state.cache.images(mined.positions);
                const std::array<kernels::SpaceRef, 2> refs{
                    kernels::SpaceRef{&ens.features(), ens.group_size()},
                    kernels::SpaceRef{&vsnl.features(), vsnl.group_size()}};
                const auto sc = kernels::score_images(neg_images, ids.features(), refs,
                                                      cfg.score.temperature);
                std::vector<double> s_ens(sc.images), s_vsnl(sc.images);
                for (std::size_t i = 0; i < sc.images; ++i) {
                    s_ens[i] = sc.score(i, 0);
                    s_vsnl[i] = sc.score(i, 1);
                }
                double lambda = adaptive_lambda(s_ens, s_vsnl);
                bool had_estimate = false;
                for (const auto& h : state.history) {
                    had_estimate = had_estimate || h.regenerated;
                }
                if (cfg.lambda_ema > 0.0 && had_estimate) {
                    lambda = cfg.lambda_ema * state.lambda + (1.0 - cfg.lambda_ema) * lambda;
                }
                state.ens_space = std::move(ens);
                state.vsnl_space = std::move(vsnl);
                state.lambda = lambda;
                summary.regenerated = true;
            } catch (const GenerationError& e) {
                state.degraded = true;
                summary.degraded = true;
                summary.degraded_reason = e.what();
            }
        }
    }
    if (!cfg.include_current_batch) {
        state.cache.append(batch.images, nl.scores, nl.predicted);
    }

    summary.lambda_used = effective_lambda(cfg, state.lambda);
    auto records = score_batch(state, batch.images, ids, cfg.score, summary.lambda_used);
    for (std::size_t i = 0; i < batch.ground_truth.size(); ++i) {
        records[i].tag = batch.ground_truth[i];
    }
    ++state.epoch;
    summary.epoch = state.epoch;
    summary.lambda = state.lambda;
    state.history.push_back(summary);
    return {std::move(records), std::move(summary)};
}

StreamResult run_stream(std::span<const TestBatch> batches, const LabelSpace& ids,
                        const CorpusCandidates& corpus, GenerationClient& client,
                        const PipelineConfig& cfg) {
    StreamResult out{{}, init_stream(ids, corpus, cfg)};
    for (const auto& b : batches) {
        auto r = process_batch(out.state, b, ids, client, cfg);
        out.records.insert(out.records.end(), std::make_move_iterator(r.records.begin()),
                           std::make_move_iterator(r.records.end()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::array<char, 8> kCheckpointMagic{'A', 'N', 'T', 'S', 'C', 'K', 'P', 'T'};
constexpr int kCheckpointVersion = 1;

json summary_to_json(const EpochSummary& s) {
    return {{"epoch", s.epoch},
            {"lambda", s.lambda},
            {"lambda_used", s.lambda_used},
            {"gamma_star", s.gamma_star ? json(*s.gamma_star) : json(nullptr)},
            {"mined", s.mined},
            {"similar_classes", s.similar_classes},
            {"regenerated", s.regenerated},
            {"degraded", s.degraded},
            {"degraded_reason", s.degraded_reason}};
}

EpochSummary summary_from_json(const json& j) {
    EpochSummary s;
    s.epoch = j.at("epoch").get<std::uint64_t>();
    s.lambda = j.at("lambda").get<double>();
    s.lambda_used = j.at("lambda_used").get<double>();
    if (!j.at("gamma_star").is_null()) {
        s.gamma_star = j.at("gamma_star").get<double>();
    }
    s.mined = j.at("mined").get<std::size_t>();
    s.similar_classes = j.at("similar_classes").get<std::vector<std::size_t>>();
    s.regenerated = j.at("regenerated").get<bool>();
    s.degraded = j.at("degraded").get<bool>();
    s.degraded_reason = j.at("degraded_reason").get<std::string>();
    return s;
}

json space_to_json(const NegativeSpace& s) {
    return {{"kind", std::string(to_string(s.kind()))},
            {"texts", s.texts()},
            {"ids", s.features().ids()},
            {"group_size", s.group_size()},
            {"epoch", s.epoch()}};
}

NegativeSpace space_from_json(const json& j, std::istream& in) {
    auto features = read_embedding_blob(in, j.at("ids").get<std::vector<std::string>>());
    return {negative_kind_from_string(j.at("kind").get<std::string>()),
            j.at("texts").get<std::vector<std::string>>(), std::move(features),
            j.at("group_size").get<std::size_t>(), j.at("epoch").get<std::uint64_t>()};
}

void write_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(b.data(), b.size());
}

std::uint64_t read_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), b.size());
    if (!in) {
        throw FormatError("checkpoint: truncated header");
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

} // namespace

std::string config_hash(const PipelineConfig& cfg) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    return sha256_hex(to_json(cfg).dump());
}

void save_checkpoint(const std::filesystem::path& file, const StreamState& state,
                     const PipelineConfig& cfg) {
    const auto& c = state.cache;
    std::vector<std::string> cache_ids;
    std::vector<double> cache_scores;
    std::vector<std::size_t> cache_pred;
    std::vector<float> cache_data;
    cache_data.reserve(c.size() * c.dim());
    for (const auto& e : c.entries()) {
        cache_ids.push_back(e.id);
        cache_scores.push_back(e.nl_score);
        cache_pred.push_back(e.predicted);
        cache_data.insert(cache_data.end(), e.embedding.begin(), e.embedding.end());
    }
    json history = json::array();
    for (const auto& h : state.history) {
        history.push_back(summary_to_json(h));
    }
    const json header = {
        {"version", kCheckpointVersion},
        {"epoch", state.epoch},
        {"lambda", state.lambda},
        {"seed", state.seed},
        {"degraded", state.degraded},
        {"config_hash", config_hash(cfg)},
        {"spaces", {space_to_json(state.nl_space), space_to_json(state.ens_space),
                    space_to_json(state.vsnl_space)}},
        {"cache",
         {{"dim", c.dim()},
          {"capacity", c.capacity()},
          {"seed", c.seed()},
          {"streamed", c.streamed()},
          {"ids", cache_ids},
          {"nl_scores", cache_scores},
          {"predicted", cache_pred}}},
        {"history", history},
    };

    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write checkpoint " + tmp.string());
        }
        const auto text = header.dump();
        out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
        write_u64(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        write_embedding_blob(out, state.nl_space.features());
        write_embedding_blob(out, state.ens_space.features());
        write_embedding_blob(out, state.vsnl_space.features());
        // Cached embeddings are stored raw; they were normalized on the way in.
        std::uint64_t rows = c.size();
        auto dim = static_cast<std::uint32_t>(c.dim());
        out.write("CACH", 4);
        write_u64(out, rows);
        write_u64(out, dim);
        for (float f : cache_data) {
            const auto bits = std::bit_cast<std::uint32_t>(f);
            std::array<char, 4> b{};
            for (int i = 0; i < 4; ++i) {
                b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
            }
            out.write(b.data(), 4);
        }
        if (!out) {
            throw IoError("failed writing checkpoint " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, file);
}

StreamState load_checkpoint(const std::filesystem::path& file, const PipelineConfig& cfg) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + file.string());
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kCheckpointMagic) {
        throw FormatError("not a checkpoint file: " + file.string());
    }
    const auto len = read_u64(in);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) {
        throw FormatError("checkpoint: truncated header");
    }
    try {
        const auto h = json::parse(text);
        if (h.at("version").get<int>() != kCheckpointVersion) {
            throw FormatError("checkpoint: unsupported version");
        }
        if (h.at("config_hash").get<std::string>() != config_hash(cfg)) {
            throw ConfigError("checkpoint " + file.string() +
                              " was written under a different configuration");
        }
        const auto& spaces = h.at("spaces");
        auto nl = space_from_json(spaces.at(0), in);
        auto ens = space_from_json(spaces.at(1), in);
        auto vsnl = space_from_json(spaces.at(2), in);

        const auto& cj = h.at("cache");
        const auto ids = cj.at("ids").get<std::vector<std::string>>();
        const auto scores = cj.at("nl_scores").get<std::vector<double>>();
        const auto pred = cj.at("predicted").get<std::vector<std::size_t>>();
        const auto dim = cj.at("dim").get<std::size_t>();
        std::array<char, 4> tag{};
        in.read(tag.data(), 4);
        if (!in || std::memcmp(tag.data(), "CACH", 4) != 0) {
            throw FormatError("checkpoint: missing cache block");
        }
        const auto rows = read_u64(in);
        const auto stored_dim = read_u64(in);
        if (rows != ids.size() || stored_dim != dim || scores.size() != rows ||
            pred.size() != rows) {
            throw FormatError("checkpoint: cache block disagrees with header");
        }
        std::vector<HistoryCache::Entry> entries;
        entries.reserve(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<float> v(dim);
            for (auto& f : v) {
                std::array<unsigned char, 4> b{};
                in.read(reinterpret_cast<char*>(b.data()), 4);
                const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) |
                                           (static_cast<std::uint32_t>(b[3]) << 24);
                f = std::bit_cast<float>(bits);
            }
            entries.push_back({ids[r], std::move(v), scores[r], pred[r]});
        }
        if (!in) {
            throw FormatError("checkpoint: truncated cache block");
        }
        std::vector<EpochSummary> history;
        for (const auto& s : h.at("history")) {
            history.push_back(summary_from_json(s));
        }
        return StreamState{
            .cache = HistoryCache::restore(dim, cj.at("capacity").get<std::size_t>(),
                                           cj.at("seed").get<std::uint64_t>(),
                                           cj.at("streamed").get<std::uint64_t>(),
                                           std::move(entries)),
            .nl_space = std::move(nl),
            .ens_space = std::move(ens),
            .vsnl_space = std::move(vsnl),
            .lambda = h.at("lambda").get<double>(),
            .epoch = h.at("epoch").get<std::uint64_t>(),
            .seed = h.at("seed").get<std::uint64_t>(),
            .degraded = h.at("degraded").get<bool>(),
            .history = std::move(history),
        };
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
}

} // namespace ants
