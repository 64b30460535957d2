#include "ants/app.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ants/config.hpp"
#include "ants/errors.hpp"
#include "ants/kernels.hpp"

namespace ants::app {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ClientMode mode) {
    switch (mode) {
    case ClientMode::Replay: return "replay";
    case ClientMode::Http: return "http";
    case ClientMode::Synthetic: return "synthetic";
    }
    return "replay";
}

ClientMode client_mode_from_string(std::string_view s) {
    if (s == "replay") return ClientMode::Replay;
    if (s == "http") return ClientMode::Http;
    if (s == "synthetic") return ClientMode::Synthetic;
    throw ConfigError("unknown client mode '" + std::string(s) + "' (replay, http, synthetic)");
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open " + file.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

void write_file(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + file.string());
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + file.string());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_relative() ? base / path : path;
}

} // namespace

RunManifest RunManifest::load(const fs::path& file) {
    const auto j = read_json(file);
    RunManifest m;
    m.base_dir = file.parent_path();
    try {
        static const std::vector<std::string> known = {"config", "labels", "corpus", "batches",
                                                       "truth",  "client", "output_dir", "seed"};
        for (const auto& [k, v] : j.items()) {
            if (std::find(known.begin(), known.end(), k) == known.end()) {
                throw ConfigError(file.string() + ": unknown manifest key '" + k + "'");
            }
        }
        if (j.contains("config") && !j.at("config").is_null()) {
            m.config = resolve(m.base_dir, j.at("config").get<std::string>());
        }
        m.labels = resolve(m.base_dir, j.at("labels").get<std::string>());
        m.corpus = resolve(m.base_dir, j.at("corpus").get<std::string>());
        for (const auto& b : j.at("batches")) {
            m.batches.push_back(resolve(m.base_dir, b.get<std::string>()));
        }
        if (j.contains("truth") && !j.at("truth").is_null()) {
            m.truth = resolve(m.base_dir, j.at("truth").get<std::string>());
        }
        const auto& c = j.at("client");
        m.client.mode = client_mode_from_string(c.at("mode").get<std::string>());
        if (c.contains("fixtures")) {
            m.client.fixtures = resolve(m.base_dir, c.at("fixtures").get<std::string>());
        }
        if (c.contains("world")) {
            m.client.world = resolve(m.base_dir, c.at("world").get<std::string>());
        }
        m.output_dir = resolve(m.base_dir, j.at("output_dir").get<std::string>());
        if (j.contains("seed") && !j.at("seed").is_null()) {
            m.seed = j.at("seed").get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    if (m.batches.empty()) {
        throw ConfigError(file.string() + ": at least one batch is required");
    }
    return m;
}

json RunManifest::to_json() const {
    json j;
    j["config"] = config ? json(config->string()) : json(nullptr);
    j["labels"] = labels.string();
    j["corpus"] = corpus.string();
    j["batches"] = json::array();
    for (const auto& b : batches) {
        j["batches"].push_back(b.string());
    }
    j["truth"] = truth ? json(truth->string()) : json(nullptr);
    j["client"] = {{"mode", std::string(app::to_string(client.mode))},
                   {"fixtures", client.fixtures.string()},
                   {"world", client.world.string()}};
    j["output_dir"] = output_dir.string();
    j["seed"] = seed ? json(*seed) : json(nullptr);
    return j;
}

void RunManifest::check_paths() const {
    std::vector<fs::path> required = {labels, corpus};
    required.insert(required.end(), batches.begin(), batches.end());
    if (config) {
        required.push_back(*config);
    }
    if (truth) {
        required.push_back(*truth);
    }
    if (client.mode == ClientMode::Replay) {
        if (client.fixtures.empty()) {
            throw InputError("replay client needs client.fixtures");
        }
        required.push_back(client.fixtures);
    }
    if (client.mode == ClientMode::Synthetic) {
        if (client.world.empty()) {
            throw InputError("synthetic client needs client.world");
        }
        required.push_back(client.world / "world.json");
    }
    std::string missing;
    for (const auto& p : required) {
        if (!fs::exists(p)) {
            missing += "\n  " + p.string();
        }
    }
    if (!missing.empty()) {
        throw InputError("missing input path(s):" + missing);
    }
}

PipelineConfig apply_override(const PipelineConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const auto key = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    auto j = to_json(cfg);
    json* node = &j;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        parts.push_back(part);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i])) {
            throw ConfigError("override: unknown config key '" + key + "'");
        }
        node = &(*node)[parts[i]];
    }
    *node = value;
    return pipeline_config_from_json(j);
}

PipelineConfig resolve_config(const RunManifest& manifest, const std::vector<std::string>& overrides) {
    PipelineConfig cfg;
    if (manifest.config) {
        cfg = pipeline_config_from_json(read_json(*manifest.config));
    }
    for (const auto& o : overrides) {
        cfg = apply_override(cfg, o);
    }
    if (manifest.seed) {
        cfg.seed = *manifest.seed;
    }
    cfg.validate();
    return cfg;
}

RunInputs load_inputs(const RunManifest& manifest) {
    auto ids = load_label_space(manifest.labels);
    auto corpus = CorpusCandidates::from_matrix(load_embeddings(manifest.corpus, ids.dim()));
    std::vector<TruthRow> truth;
    std::unordered_map<std::string, Tag> tags;
    if (manifest.truth) {
        truth = read_truth_csv(*manifest.truth);
        for (const auto& t : truth) {
            tags.emplace(t.image_id, t.tag);
        }
    }
    std::vector<TestBatch> batches;
    std::vector<std::string> unknown;
    for (const auto& b : manifest.batches) {
        TestBatch batch{load_embeddings(b, ids.dim()), {}};
        if (manifest.truth) {
            for (const auto& id : batch.images.ids()) {
                const auto it = tags.find(id);
                if (it == tags.end()) {
                    unknown.push_back(id);
                    continue;
                }
                batch.ground_truth.push_back(it->second);
            }
        }
        batches.push_back(std::move(batch));
    }
    if (!unknown.empty()) {
        std::string msg = std::to_string(unknown.size()) + " image id(s) missing from the truth file:";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, unknown.size()); ++i) {
            msg += " " + unknown[i];
        }
        throw InputError(msg);
    }
    return {std::move(ids), std::move(corpus), std::move(batches), std::move(truth)};
}

ClientHandle make_client(const RunManifest& manifest, bool record) {
    ClientHandle h;
    switch (manifest.client.mode) {
    case ClientMode::Replay:
        if (record) {
            throw ConfigError("fixtures record needs an http or synthetic client");
        }
        h.inner = std::make_unique<ReplayClient>(manifest.client.fixtures, FixtureMode::Replay);
        return h;
    case ClientMode::Http:
        h.inner = std::make_unique<HttpGenerationClient>(HttpClientConfig::from_env());
        break;
    case ClientMode::Synthetic:
        h.world = std::make_unique<synth::World>(synth::World::load(manifest.client.world));
        h.inner = std::make_unique<synth::SyntheticClient>(*h.world);
        break;
    }
    if (record) {
        if (manifest.client.fixtures.empty()) {
            throw ConfigError("fixtures record needs client.fixtures");
        }
        fs::create_directories(manifest.client.fixtures);
        h.outer = std::make_unique<ReplayClient>(manifest.client.fixtures, FixtureMode::Record,
                                                 h.inner.get());
    }
    return h;
}

namespace {

void write_lambda_csv(const fs::path& file, const std::vector<EpochSummary>& history) {
    std::string text = "epoch,lambda,lambda_used,gamma_star,mined,regenerated,degraded\n";
    for (const auto& h : history) {
        text += std::to_string(h.epoch) + ',' + csv::format_score(h.lambda) + ',' +
                csv::format_score(h.lambda_used) + ',' +
                (h.gamma_star ? csv::format_score(*h.gamma_star) : std::string()) + ',' +
                std::to_string(h.mined) + ',' + (h.regenerated ? "1" : "0") + ',' +
                (h.degraded ? "1" : "0") + '\n';
    }
    write_file(file, text);
}

void apply_threads(PipelineConfig& cfg, std::size_t threads) {
    if (threads > 0) {
        kernels::set_thread_limit(static_cast<int>(threads));
        cfg.generation.fanout = std::min(cfg.generation.fanout, threads);
    }
}

} // namespace

RunOutcome execute_run(const RunManifest& manifest, const PipelineConfig& cfg,
                       GenerationClient& client, const RunInputs& inputs) {
    RunOutcome out{run_stream(inputs.batches, inputs.ids, inputs.corpus, client, cfg), {}};
    const auto& dir = manifest.output_dir;
    out.report = export_results(out.stream.records, inputs.truth, dir);
    write_lambda_csv(dir / "lambda.csv", out.stream.state.history);
    save_checkpoint(dir / "checkpoint.ants", out.stream.state, cfg);
    return out;
}

namespace {

json run_summary(const RunOutcome& r, const fs::path& dir) {
    json j = {{"records", r.stream.records.size()},
              {"epochs", r.stream.state.epoch},
              {"lambda", r.stream.state.lambda},
              {"degraded", r.stream.state.degraded},
              {"output_dir", dir.string()}};
    if (r.report) {
        j["metrics"] = to_json(*r.report);
    }
    return j;
}

int run_impl(const fs::path& manifest_path, bool record, bool force_replay,
             const CommonOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        auto manifest = RunManifest::load(manifest_path);
        if (force_replay) {
            manifest.client.mode = ClientMode::Replay;
        }
        manifest.check_paths();
        auto cfg = resolve_config(manifest, opts.overrides);
        apply_threads(cfg, opts.threads);
        const auto inputs = load_inputs(manifest);
        const auto client = make_client(manifest, record);
        const auto result = execute_run(manifest, cfg, client.get(), inputs);
        out << run_summary(result, manifest.output_dir).dump(2) << "\n";
        if (result.stream.state.degraded) {
            for (const auto& h : result.stream.state.history) {
                if (h.degraded) {
                    err << "warning: epoch " << h.epoch << ": " << h.degraded_reason << "\n";
                }
            }
            return kExitDegraded;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace

int cmd_run(const fs::path& manifest, const CommonOptions& opts, std::ostream& out,
            std::ostream& err) {
    return run_impl(manifest, false, false, opts, out, err);
}

int cmd_fixtures(const fs::path& manifest, bool record, const CommonOptions& opts,
                 std::ostream& out, std::ostream& err) {
    return run_impl(manifest, record, !record, opts, out, err);
}

MetricReport cmd_eval(const fs::path& records, const fs::path& truth) {
    const auto recs = read_records_csv(records);
    const auto rows = read_truth_csv(truth);
    return evaluate(recs, rows);
}

// ---------------------------------------------------------------------------
// Sweep

std::string_view to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::Delta: return "delta";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Eta: return "eta";
    case SweepAxis::Length: return "length";
    }
    return "delta";
}

SweepAxis sweep_axis_from_string(std::string_view s) {
    if (s == "delta") return SweepAxis::Delta;
    if (s == "lambda") return SweepAxis::Lambda;
    if (s == "eta") return SweepAxis::Eta;
    if (s == "length") return SweepAxis::Length;
    throw ConfigError("unknown sweep axis '" + std::string(s) + "' (delta, lambda, eta, length)");
}

PipelineConfig sweep_config(PipelineConfig cfg, SweepAxis axis, double value) {
    switch (axis) {
    case SweepAxis::Delta:
        cfg.mining.class_ratio = value;
        break;
    case SweepAxis::Eta:
        cfg.mining.selection_ratio = value;
        break;
    case SweepAxis::Lambda:
        cfg.mode = ScoreMode::FixedLambda;
        cfg.score.lambda_override = value;
        break;
    case SweepAxis::Length: {
        if (!(value >= 1.0) || value != std::floor(value)) {
            throw ConfigError("length sweep values must be positive integers");
        }
        cfg.generation.len_max = static_cast<std::size_t>(value);
        cfg.generation.len_min = std::min(cfg.generation.len_min, cfg.generation.len_max);
        break;
    }
    }
    cfg.validate();
    return cfg;
}

std::vector<SweepRow> run_sweep(const RunManifest& manifest, const PipelineConfig& base,
                                SweepAxis axis, const std::vector<double>& values,
                                std::ostream& csv_out, std::size_t threads) {
    if (values.size() < 2) {
        throw InputError("sweep needs at least two values");
    }
    if (!manifest.truth) {
        throw InputError("sweep needs ground truth in the manifest");
    }
    const auto inputs = load_inputs(manifest);
    const auto client = make_client(manifest);
    csv_out << "axis,value,auroc,fpr95,final_lambda,degraded,error\n" << std::flush;
    std::vector<SweepRow> rows;
    for (double v : values) {
        SweepRow row;
        row.value = v;
        try {
            auto cfg = sweep_config(base, axis, v);
            apply_threads(cfg, threads);
            const auto r = run_stream(inputs.batches, inputs.ids, inputs.corpus, client.get(), cfg);
            row.report = evaluate(r.records, inputs.truth);
            row.final_lambda = r.state.lambda;
            row.degraded = r.state.degraded;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        csv_out << to_string(axis) << ',' << csv::format_score(v) << ',';
        if (row.report) {
            csv_out << csv::format_score(row.report->auroc) << ','
                    << csv::format_score(row.report->fpr95);
        } else {
            csv_out << ',';
        }
        csv_out << ',' << csv::format_score(row.final_lambda) << ',' << (row.degraded ? 1 : 0)
                << ',' << csv::quote(row.error) << '\n'
                << std::flush;
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_sweep(const fs::path& manifest_path, SweepAxis axis, const std::vector<double>& values,
              const std::optional<fs::path>& output, const CommonOptions& opts, std::ostream& out,
              std::ostream& err) {
    try {
        if (values.size() < 2) {
            throw InputError("sweep needs at least two values");
        }
        const auto manifest = RunManifest::load(manifest_path);
        manifest.check_paths();
        const auto cfg = resolve_config(manifest, opts.overrides);
        const auto file = output.value_or(manifest.output_dir /
                                          ("sweep_" + std::string(to_string(axis)) + ".csv"));
        if (file.has_parent_path()) {
            fs::create_directories(file.parent_path());
        }
        std::ofstream csv_file(file, std::ios::trunc);
        if (!csv_file) {
            throw IoError("cannot write " + file.string());
        }
        const auto rows = run_sweep(manifest, cfg, axis, values, csv_file, opts.threads);
        out << file.string() << "\n";
        bool failed = false;
        bool degraded = false;
        for (const auto& r : rows) {
            if (!r.error.empty()) {
                err << "error: " << to_string(axis) << "=" << r.value << ": " << r.error << "\n";
                failed = true;
            }
            degraded = degraded || r.degraded;
        }
        return failed ? kExitError : (degraded ? kExitDegraded : kExitOk);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

// ---------------------------------------------------------------------------
// Ingest / synth-world

std::size_t cmd_ingest(const fs::path& input, const fs::path& output,
                       std::optional<std::size_t> expected_dim) {
    if (input.extension() == ".nspc") {
        const auto m = load_embeddings(input, expected_dim);
        save_embeddings(output, m);
        return m.rows();
    }
    std::ifstream in(input, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + input.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    auto rows = csv::parse(ss.str());
    auto numeric = [](const std::string& s) {
        try {
            std::size_t pos = 0;
            std::stod(s, &pos);
            return pos == s.size();
        } catch (const std::exception&) {
            return false;
        }
    };
    std::size_t first = 0;
    if (!rows.empty() && rows[0].size() > 1 && !numeric(rows[0][1])) {
        first = 1;
    }
    if (rows.size() <= first) {
        throw DataError(input.string() + ": no embedding rows");
    }
    const std::size_t dim = rows[first].size() - 1;
    if (dim == 0) {
        throw FormatError(input.string() + ": rows need an id and at least one component");
    }
    if (expected_dim && *expected_dim != dim) {
        throw DataError(input.string() + ": dim " + std::to_string(dim) + " but expected " +
                        std::to_string(*expected_dim));
    }
    std::vector<float> data;
    std::vector<std::string> ids;
    for (std::size_t r = first; r < rows.size(); ++r) {
        if (rows[r].size() != dim + 1) {
            throw DataError(input.string() + ":" + std::to_string(r + 1) + ": expected " +
                            std::to_string(dim) + " components");
        }
        ids.push_back(rows[r][0]);
        for (std::size_t c = 1; c <= dim; ++c) {
            if (!numeric(rows[r][c])) {
                throw FormatError(input.string() + ":" + std::to_string(r + 1) + ": bad number '" +
                                  rows[r][c] + "'");
            }
            data.push_back(std::stof(rows[r][c]));
        }
    }
    const EmbeddingMatrix m(std::move(data), dim, std::move(ids));
    save_embeddings(output, m);
    return m.rows();
}

fs::path cmd_synth_world(const fs::path& dir, const SynthWorldOptions& opts) {
    const auto world = synth::World::build(opts.world);
    fs::create_directories(dir / "batches");
    world.dump(dir / "world");
    const auto ids = world.id_space();
    save_label_space(dir / "labels.json", ids, dir / "labels.nspc");
    save_embeddings(dir / "corpus.nspc", world.corpus().features);
    const auto stream = synth::make_stream(world, opts.scenario, opts.stream);
    json batches = json::array();
    for (std::size_t i = 0; i < stream.batches.size(); ++i) {
        std::ostringstream name;
        name << "batches/batch_" << std::setw(3) << std::setfill('0') << i << ".nspc";
        save_embeddings(dir / name.str(), stream.batches[i].images);
        batches.push_back(name.str());
    }
    write_truth_csv(dir / "truth.csv", stream.truth);
    write_file(dir / "config.json", to_json(synth::scenario_pipeline_config(world)).dump(2) + "\n");
    const json manifest = {
        {"config", "config.json"},
        {"labels", "labels.json"},
        {"corpus", "corpus.nspc"},
        {"batches", batches},
        {"truth", "truth.csv"},
        {"client", {{"mode", "synthetic"}, {"world", "world"}, {"fixtures", "fixtures"}}},
        {"output_dir", "out"},
        {"seed", opts.world.seed},
    };
    const auto path = dir / "manifest.json";
    write_file(path, manifest.dump(2) + "\n");
    return path;
}

} // namespace ants::app
