#include "ants/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ants/errors.hpp"
#include "ants/hash.hpp"
#include "ants/text.hpp"

namespace ants::synth {

using nlohmann::json;

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1p-53; }

    // Box-Muller; one draw per call keeps the stream position easy to reason about.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t below(std::uint64_t bound) { return bounded(gen_(), bound); }

  private:
    std::mt19937_64 gen_;
};

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void normalize(Vec& v) {
    const double n = std::sqrt(dot(v, v));
    for (auto& x : v) {
        x /= n;
    }
}

Vec gaussian(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (auto& x : v) {
        x = rng.normal();
    }
    return v;
}

Vec random_unit(Rng& rng, std::size_t dim) {
    auto v = gaussian(rng, dim);
    normalize(v);
    return v;
}

/// Unit vector at `angle` from unit `v`, in a uniformly random direction.
Vec rotate(const Vec& v, double angle, Rng& rng) {
    auto u = gaussian(rng, v.size());
    const double p = dot(u, v);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] -= p * v[i];
    }
    normalize(u);
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::cos(angle) * v[i] + std::sin(angle) * u[i];
    }
    normalize(out);
    return out;
}

Vec to_vec(std::span<const float> f) { return {f.begin(), f.end()}; }

void append(std::vector<float>& data, const Vec& v) {
    for (double x : v) {
        data.push_back(static_cast<float>(x));
    }
}

std::string numbered(const char* prefix, std::size_t i, int width) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
    return buf;
}

std::vector<std::string> tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

// Stream tags for derive_seed, so each random component has its own sequence.
enum Stream : std::uint64_t {
    kGeometry = 1,
    kTextHash = 2,
    kImages = 3,
    kShuffle = 4,
    kCorruption = 5,
};

} // namespace

void WorldConfig::validate() const {
    if (dim < 2) {
        throw ConfigError("world: dim must be at least 2");
    }
    if (n_id_classes == 0 || n_id_classes >= dim) {
        throw ConfigError("world: need 1 <= n_id_classes < dim");
    }
    if (near_parents > n_id_classes) {
        throw ConfigError("world: near_parents exceeds n_id_classes");
    }
    if (near_per_parent > siblings_per_class) {
        throw ConfigError("world: near_per_parent exceeds siblings_per_class");
    }
    if (!(far_min_angle > near_offset)) {
        throw ConfigError("world: far_min_angle must exceed near_offset");
    }
    if (far_min_angle > M_PI / 2 + 1e-12) {
        throw ConfigError("world: far_min_angle cannot exceed pi/2");
    }
    for (double a : {id_spread, near_offset, sibling_max_offset, text_noise, text_jitter,
                     coarse_angle, corpus_far_angle}) {
        if (!(a >= 0.0 && a <= M_PI)) {
            throw ConfigError("world: angles must lie in [0, pi]");
        }
    }
    if (sibling_max_offset < near_offset) {
        throw ConfigError("world: sibling_max_offset must be at least near_offset");
    }
    if (!(corpus_far_fraction >= 0.0 && corpus_far_fraction <= 1.0)) {
        throw ConfigError("world: corpus_far_fraction must lie in [0, 1]");
    }
    if (corpus_far_fraction > 0.0 && far_clusters == 0) {
        throw ConfigError("world: corpus_far_fraction needs far clusters");
    }
    if (!(corruption >= 0.0 && corruption <= 1.0)) {
        throw ConfigError("world: corruption must lie in [0, 1]");
    }
}

json to_json(const WorldConfig& c) {
    return {{"dim", c.dim},
            {"n_id_classes", c.n_id_classes},
            {"id_spread", c.id_spread},
            {"near_parents", c.near_parents},
            {"near_per_parent", c.near_per_parent},
            {"near_offset", c.near_offset},
            {"siblings_per_class", c.siblings_per_class},
            {"sibling_max_offset", c.sibling_max_offset},
            {"far_clusters", c.far_clusters},
            {"far_min_angle", c.far_min_angle},
            {"text_noise", c.text_noise},
            {"text_jitter", c.text_jitter},
            {"coarse_angle", c.coarse_angle},
            {"corpus_words", c.corpus_words},
            {"corpus_far_fraction", c.corpus_far_fraction},
            {"corpus_far_angle", c.corpus_far_angle},
            {"corruption", c.corruption},
            {"seed", c.seed}};
}

WorldConfig world_config_from_json(const json& j, WorldConfig c) {
    if (!j.is_object()) {
        throw ConfigError("world config: expected a JSON object");
    }
    const auto known = to_json(c);
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) {
            throw ConfigError("world config: unknown key '" + k + "'");
        }
    }
    try {
        auto get = [&](const char* key, auto& out) {
            if (j.contains(key)) {
                out = j.at(key).get<std::decay_t<decltype(out)>>();
            }
        };
        get("dim", c.dim);
        get("n_id_classes", c.n_id_classes);
        get("id_spread", c.id_spread);
        get("near_parents", c.near_parents);
        get("near_per_parent", c.near_per_parent);
        get("near_offset", c.near_offset);
        get("siblings_per_class", c.siblings_per_class);
        get("sibling_max_offset", c.sibling_max_offset);
        get("far_clusters", c.far_clusters);
        get("far_min_angle", c.far_min_angle);
        get("text_noise", c.text_noise);
        get("text_jitter", c.text_jitter);
        get("coarse_angle", c.coarse_angle);
        get("corpus_words", c.corpus_words);
        get("corpus_far_fraction", c.corpus_far_fraction);
        get("corpus_far_angle", c.corpus_far_angle);
        get("corruption", c.corruption);
        get("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("world config: ") + e.what());
    }
    return c;
}

std::string_view to_string(ConceptKind kind) {
    switch (kind) {
    case ConceptKind::Id: return "id";
    case ConceptKind::Sibling: return "sibling";
    case ConceptKind::Far: return "far";
    case ConceptKind::Word: return "word";
    case ConceptKind::Coarse: return "coarse";
    }
    return "word";
}

ConceptKind concept_kind_from_string(std::string_view s) {
    for (auto k : {ConceptKind::Id, ConceptKind::Sibling, ConceptKind::Far, ConceptKind::Word,
                   ConceptKind::Coarse}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw FormatError("unknown concept kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// World

World::World(WorldConfig cfg, std::vector<Concept> concepts, EmbeddingMatrix prototypes,
             EmbeddingMatrix texts)
    : cfg_(std::move(cfg)), concepts_(std::move(concepts)), prototypes_(std::move(prototypes)),
      texts_(std::move(texts)) {
    if (prototypes_.rows() != concepts_.size() || texts_.rows() != concepts_.size()) {
        throw DataError("world: concept table and matrices disagree");
    }
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
        if (!index_.emplace(concepts_[i].name, i).second) {
            throw DataError("world: duplicate concept '" + concepts_[i].name + "'");
        }
    }
}

World World::build(const WorldConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    const std::size_t n = cfg.n_id_classes;
    Rng rng(derive_seed(cfg.seed, kGeometry));

    std::vector<Concept> concepts;
    std::vector<Vec> protos;
    std::vector<Vec> texts;

    for (std::size_t c = 0; c < n; ++c) {
        concepts.push_back({numbered("class", c, 2), ConceptKind::Id, npos});
        protos.push_back(random_unit(rng, d));
    }

    const std::size_t s = cfg.siblings_per_class;
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t k = 0; k < s; ++k) {
            double offset = cfg.near_offset;
            if (k >= cfg.near_per_parent) {
                const double t = static_cast<double>(k - cfg.near_per_parent + 1) /
                                 static_cast<double>(s - cfg.near_per_parent);
                offset += t * (cfg.sibling_max_offset - cfg.near_offset);
            }
            concepts.push_back(
                {numbered("sib", c, 2) + numbered("x", k, 2), ConceptKind::Sibling, c});
            protos.push_back(rotate(protos[c], offset, rng));
        }
    }

    // Orthonormal basis of the ID prototype span.
    std::vector<Vec> basis;
    for (std::size_t c = 0; c < n; ++c) {
        Vec v = protos[c];
        for (const auto& b : basis) {
            const double p = dot(v, b);
            for (std::size_t i = 0; i < d; ++i) {
                v[i] -= p * b[i];
            }
        }
        normalize(v);
        basis.push_back(std::move(v));
    }
    auto split = [&](const Vec& g, Vec& inside, Vec& outside) {
        inside.assign(d, 0.0);
        for (const auto& b : basis) {
            const double p = dot(g, b);
            for (std::size_t i = 0; i < d; ++i) {
                inside[i] += p * b[i];
            }
        }
        outside.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            outside[i] = g[i] - inside[i];
        }
    };
    const std::size_t far_begin = protos.size();
    for (std::size_t f = 0; f < cfg.far_clusters; ++f) {
        // Tilted away from anchor prototype p by far_min_angle, into the complement of the ID
        // span: cos(far, p) = cos(a), and cos(far, q) = cos(a) * (p . q) for other prototypes q.
        const Vec& anchor = protos[f % n];
        Vec unused, outside;
        split(gaussian(rng, d), unused, outside);
        normalize(outside);
        const double a = cfg.far_min_angle;
        Vec v(d);
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = std::cos(a) * anchor[i] + std::sin(a) * outside[i];
        }
        normalize(v);
        concepts.push_back({numbered("far", f, 2), ConceptKind::Far, npos});
        protos.push_back(std::move(v));
    }

    for (std::size_t i = 0; i < protos.size(); ++i) {
        texts.push_back(rotate(protos[i], cfg.text_noise, rng));
    }

    for (std::size_t c = 0; c < n; ++c) {
        concepts.push_back({numbered("vague", c, 2), ConceptKind::Coarse, c});
        auto v = rotate(texts[c], cfg.coarse_angle, rng);
        protos.push_back(v);
        texts.push_back(std::move(v));
    }

    const auto far_words = static_cast<std::size_t>(
        std::floor(cfg.corpus_far_fraction * static_cast<double>(cfg.corpus_words)));
    for (std::size_t w = 0; w < cfg.corpus_words; ++w) {
        concepts.push_back({numbered("word", w, 4), ConceptKind::Word, npos});
        Vec v = w < far_words
                    ? rotate(protos[far_begin + w % cfg.far_clusters], cfg.corpus_far_angle, rng)
                    : random_unit(rng, d);
        protos.push_back(v);
        texts.push_back(std::move(v));
    }

    std::vector<float> pdata, tdata;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        append(pdata, protos[i]);
        append(tdata, texts[i]);
        names.push_back(concepts[i].name);
    }
    return World(cfg, std::move(concepts), EmbeddingMatrix(std::move(pdata), d, names),
                 EmbeddingMatrix(std::move(tdata), d, names));
}

std::size_t World::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? npos : it->second;
}

std::vector<std::size_t> World::concepts_of(ConceptKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
        if (concepts_[i].kind == kind) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> World::near_concepts() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < cfg_.near_parents; ++c) {
        for (std::size_t k = 0; k < cfg_.near_per_parent; ++k) {
            out.push_back(cfg_.n_id_classes + c * cfg_.siblings_per_class + k);
        }
    }
    return out;
}

std::size_t World::coarse_of(std::size_t id_class) const {
    return find(numbered("vague", id_class, 2));
}

EmbeddingMatrix World::embed(std::span<const std::string> texts) const {
    const std::size_t d = cfg_.dim;
    std::vector<float> data;
    data.reserve(texts.size() * d);
    for (const auto& t : texts) {
        const std::uint64_t h = derive_seed(cfg_.seed ^ stable_hash64(t), kTextHash);
        Rng rng(h);
        Vec v(d, 0.0);
        bool named = false;
        for (const auto& tok : tokens(t)) {
            const auto idx = find(tok);
            if (idx == npos) {
                continue;
            }
            named = true;
            const auto row = texts_.row(idx);
            for (std::size_t i = 0; i < d; ++i) {
                v[i] += row[i];
            }
        }
        if (!named || dot(v, v) < 1e-12) {
            v = random_unit(rng, d);
        } else {
            normalize(v);
        }
        if (cfg_.text_jitter > 0.0) {
            v = rotate(v, cfg_.text_jitter, rng);
        }
        append(data, v);
    }
    return EmbeddingMatrix::with_positional_ids(std::move(data), d);
}

LabelSpace World::id_space(const std::string& prompt_template) const {
    std::vector<std::string> labels;
    std::vector<std::string> prompts;
    for (std::size_t c = 0; c < cfg_.n_id_classes; ++c) {
        labels.push_back(concepts_[c].name);
        prompts.push_back(text::apply_template(prompt_template, labels.back()));
    }
    auto features = embed(prompts).relabeled(labels);
    return LabelSpace(std::move(labels), std::move(features), prompt_template);
}

CorpusCandidates World::corpus(const std::string& prompt_template) const {
    std::vector<std::string> words;
    std::vector<std::string> prompts;
    for (std::size_t i : concepts_of(ConceptKind::Word)) {
        words.push_back(concepts_[i].name);
        prompts.push_back(text::apply_template(prompt_template, words.back()));
    }
    return CorpusCandidates::from_matrix(embed(prompts).relabeled(words));
}

EmbeddingMatrix World::sample_images(std::span<const std::size_t> concepts, std::uint64_t stream,
                                     const std::string& prefix, std::size_t first) const {
    Rng rng(derive_seed(derive_seed(cfg_.seed, kImages), stream));
    std::vector<float> data;
    data.reserve(concepts.size() * cfg_.dim);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        const double angle = cfg_.id_spread * std::abs(1.0 + 0.3 * rng.normal());
        append(data, rotate(to_vec(prototypes_.row(concepts[i])), angle, rng));
        ids.push_back(prefix + "-" + numbered("", first + i, 5));
    }
    return {std::move(data), cfg_.dim, std::move(ids)};
}

void World::dump(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json concepts = json::array();
    for (const auto& c : concepts_) {
        json e = {{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
        if (c.parent != npos) {
            e["parent"] = c.parent;
        }
        concepts.push_back(std::move(e));
    }
    std::ofstream out(dir / "world.json", std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (dir / "world.json").string());
    }
    out << json{{"config", to_json(cfg_)}, {"concepts", concepts}}.dump(1) << "\n";
    save_embeddings(dir / "prototypes.nspc", prototypes_);
    save_embeddings(dir / "texts.nspc", texts_);
}

World World::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "world.json");
    if (!in) {
        throw IoError("cannot open " + (dir / "world.json").string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError((dir / "world.json").string() + ": " + e.what());
    }
    auto cfg = world_config_from_json(j.at("config"));
    std::vector<Concept> concepts;
    for (const auto& e : j.at("concepts")) {
        concepts.push_back({e.at("name").get<std::string>(),
                            concept_kind_from_string(e.at("kind").get<std::string>()),
                            e.contains("parent") ? e.at("parent").get<std::size_t>() : npos});
    }
    auto protos = load_embeddings(dir / "prototypes.nspc", cfg.dim);
    auto texts = load_embeddings(dir / "texts.nspc", cfg.dim);
    return World(std::move(cfg), std::move(concepts), std::move(protos), std::move(texts));
}

// ---------------------------------------------------------------------------
// SyntheticClient

namespace {

constexpr std::array<std::string_view, 5> kPhrases = {
    "a photo of a <t>",
    "a <t> seen up close",
    "an image that shows a <t>",
    "a blurry picture of a <t>",
    "a <t> in its usual surroundings",
};

} // namespace

SyntheticClient::SyntheticClient(const World& world) : world_(world) {
    for (std::size_t i = 0; i < world.concepts().size(); ++i) {
        const auto k = world.concepts()[i].kind;
        if (k == ConceptKind::Id || k == ConceptKind::Sibling || k == ConceptKind::Far) {
            visual_.push_back(i);
        }
        if (k == ConceptKind::Sibling || k == ConceptKind::Far) {
            similar_pool_.push_back(i);
        }
    }
}

std::size_t SyntheticClient::perceived_concept(std::span<const float> image) const {
    std::size_t best = visual_.front();
    double best_sim = -2.0;
    for (std::size_t i : visual_) {
        const double s = ants::dot(image, world_.prototypes().row(i));
        if (s > best_sim) {
            best_sim = s;
            best = i;
        }
    }
    return best;
}

std::string SyntheticClient::describe_image(const DescribeRequest& request) {
    if (request.image.embedding.size() != world_.config().dim) {
        throw ClientError("synthetic client: image '" + request.image.id + "' has wrong dim");
    }
    const auto& concepts = world_.concepts();
    std::size_t named = perceived_concept(request.image.embedding);
    const std::uint64_t h = derive_seed(
        derive_seed(world_.config().seed ^ stable_hash64(request.image.id), kCorruption),
        request.nonce);
    Rng rng(h);
    if (world_.config().corruption > 0.0 && rng.uniform() < world_.config().corruption) {
        named = similar_pool_[rng.below(similar_pool_.size())];
    } else if (concepts[named].kind == ConceptKind::Id) {
        named = world_.coarse_of(named);
    } else if (concepts[named].kind == ConceptKind::Sibling) {
        named = world_.coarse_of(concepts[named].parent);
    }
    const auto phrase = kPhrases[mix64(h) % kPhrases.size()];
    return text::replace_all(phrase, "<t>", concepts[named].name);
}

std::vector<std::string> SyntheticClient::similar_labels(const SimilarRequest& request) {
    const auto c = world_.find(text::normalize_label(request.class_name));
    if (c == npos || world_.concepts()[c].kind != ConceptKind::Id) {
        throw ClientError("synthetic client: unknown class '" + request.class_name + "'");
    }
    const auto proto = world_.prototypes().row(c);
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(similar_pool_.size());
    for (std::size_t i : similar_pool_) {
        ranked.emplace_back(ants::dot(proto, world_.prototypes().row(i)), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(request.count, ranked.size()); ++i) {
        out.push_back(world_.concepts()[ranked[i].second].name);
    }
    return out;
}

EmbeddingMatrix SyntheticClient::embed_texts(std::span<const std::string> texts) {
    return world_.embed(texts);
}

// ---------------------------------------------------------------------------
// Scenarios

std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::Far: return "far";
    case Scenario::Near: return "near";
    case Scenario::Mixed: return "mixed";
    }
    return "far";
}

Scenario scenario_from_string(std::string_view s) {
    if (s == "far") return Scenario::Far;
    if (s == "near") return Scenario::Near;
    if (s == "mixed") return Scenario::Mixed;
    throw ConfigError("unknown scenario '" + std::string(s) + "' (far, near, mixed)");
}

SyntheticStream make_stream(const World& world, Scenario scenario, const StreamSpec& spec) {
    if (spec.batches == 0) {
        throw ConfigError("stream: batches must be positive");
    }
    const auto far = world.concepts_of(ConceptKind::Far);
    const auto near = world.near_concepts();
    if ((scenario != Scenario::Near && far.empty()) ||
        (scenario != Scenario::Far && near.empty())) {
        throw ConfigError("stream: world has no OOD concepts for scenario " +
                          std::string(to_string(scenario)));
    }
    std::vector<std::size_t> id_concepts(spec.n_id);
    for (std::size_t i = 0; i < spec.n_id; ++i) {
        id_concepts[i] = i % world.config().n_id_classes;
    }
    std::vector<std::size_t> ood_concepts(spec.n_ood);
    std::vector<std::string> ood_dataset(spec.n_ood);
    for (std::size_t i = 0; i < spec.n_ood; ++i) {
        const bool use_far = scenario == Scenario::Far || (scenario == Scenario::Mixed && i % 2 == 0);
        const std::size_t j = scenario == Scenario::Mixed ? i / 2 : i;
        ood_concepts[i] = use_far ? far[j % far.size()] : near[j % near.size()];
        ood_dataset[i] = use_far ? "far" : "near";
    }
    const std::uint64_t stream_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(scenario));
    const auto id_images = world.sample_images(id_concepts, derive_seed(stream_seed, 1), "id");
    const auto ood_images = world.sample_images(ood_concepts, derive_seed(stream_seed, 2), "ood");

    const std::size_t total = spec.n_id + spec.n_ood;
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(stream_seed, kShuffle));
    for (std::size_t i = total; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }

    SyntheticStream out;
    const std::size_t per = (total + spec.batches - 1) / spec.batches;
    for (std::size_t start = 0; start < total; start += per) {
        const std::size_t end = std::min(total, start + per);
        std::vector<float> data;
        std::vector<std::string> ids;
        std::vector<Tag> tags;
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t o = order[k];
            const bool is_id = o < spec.n_id;
            const auto& m = is_id ? id_images : ood_images;
            const std::size_t r = is_id ? o : o - spec.n_id;
            const auto row = m.row(r);
            data.insert(data.end(), row.begin(), row.end());
            ids.push_back(m.id(r));
            tags.push_back(is_id ? Tag::ID : Tag::OOD);
            out.truth.push_back({m.id(r), tags.back(), is_id ? "" : ood_dataset[r]});
        }
        out.batches.push_back(
            {EmbeddingMatrix(std::move(data), world.config().dim, std::move(ids)), std::move(tags)});
    }
    return out;
}

PipelineConfig scenario_pipeline_config(const World& world) {
    PipelineConfig cfg;
    cfg.negatives = 200;
    cfg.score.group_size = 100;
    const auto& w = world.config();
    cfg.mining.class_ratio =
        std::max(1.0, static_cast<double>(w.near_parents)) / static_cast<double>(w.n_id_classes);
    cfg.seed = w.seed;
    return cfg;
}

ScenarioResult run_scenario(const World& world, Scenario scenario, const PipelineConfig& cfg,
                            const StreamSpec& spec) {
    const auto ids = world.id_space();
    const auto corpus = world.corpus();
    const auto stream = make_stream(world, scenario, spec);
    SyntheticClient client(world);

    auto frozen = cfg;
    frozen.adapt = false;
    auto base = run_stream(stream.batches, ids, corpus, client, frozen);
    auto full = run_stream(stream.batches, ids, corpus, client, cfg);

    ScenarioResult r;
    r.baseline = evaluate(base.records, stream.truth);
    r.ants = evaluate(full.records, stream.truth);
    for (const auto& h : full.state.history) {
        r.lambda_trajectory.push_back(h.lambda);
    }
    r.degraded = full.state.degraded;
    r.baseline_records = std::move(base.records);
    r.ants_records = std::move(full.records);
    return r;
}

} // namespace ants::synth
