#include "ants/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ants/errors.hpp"
#include "ants/text.hpp"

namespace ants {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// EmbeddingMatrix

EmbeddingMatrix::EmbeddingMatrix(std::vector<float> data, std::size_t dim,
                                 std::vector<std::string> ids)
    : dim_(dim), data_(std::move(data)), ids_(std::move(ids)) {
    if (dim_ == 0) {
        throw DataError("embedding matrix: dim must be positive");
    }
    if (data_.size() != ids_.size() * dim_) {
        throw DataError("embedding matrix: " + std::to_string(ids_.size()) + " ids for " +
                        std::to_string(data_.size() / dim_) + " rows of dim " +
                        std::to_string(dim_));
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids_.size());
    for (const auto& id : ids_) {
        if (!seen.insert(id).second) {
            throw DataError("embedding matrix: duplicate id '" + id + "'");
        }
    }
    for (std::size_t r = 0; r < ids_.size(); ++r) {
        std::span<float> row(data_.data() + r * dim_, dim_);
        double sq = 0.0;
        for (float x : row) {
            if (!std::isfinite(x)) {
                throw DataError("embedding matrix: non-finite value in row '" + ids_[r] + "'");
            }
            sq += static_cast<double>(x) * x;
        }
        const double norm = std::sqrt(sq);
        if (norm == 0.0) {
            throw DataError("embedding matrix: zero vector in row '" + ids_[r] + "'");
        }
        if (std::abs(norm - 1.0) > kUnitTolerance) {
            for (float& x : row) {
                x = static_cast<float>(static_cast<double>(x) / norm);
            }
        }
    }
}

EmbeddingMatrix EmbeddingMatrix::with_positional_ids(std::vector<float> data, std::size_t dim) {
    if (dim == 0) {
        throw DataError("embedding matrix: dim must be positive");
    }
    std::vector<std::string> ids(data.size() / dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = std::to_string(i);
    }
    return {std::move(data), dim, std::move(ids)};
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::size_t> rows) const {
    std::vector<float> data;
    data.reserve(rows.size() * dim_);
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (std::size_t r : rows) {
        const auto src = row(r);
        data.insert(data.end(), src.begin(), src.end());
        ids.push_back(ids_.at(r));
    }
    return {std::move(data), dim_, std::move(ids)};
}

EmbeddingMatrix EmbeddingMatrix::relabeled(std::vector<std::string> ids) const {
    return {data_, dim_, std::move(ids)};
}

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw DimError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
    }
    return std::clamp(dot(a, b), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'S', 'P', 'C'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<T>(p[i]) << (8 * i);
    }
    return v;
}

struct BlobHeader {
    std::uint64_t rows;
    std::uint32_t dim;
};

BlobHeader read_header(std::istream& in) {
    std::array<unsigned char, kHeaderBytes> h{};
    in.read(reinterpret_cast<char*>(h.data()), h.size());
    if (in.gcount() != static_cast<std::streamsize>(h.size())) {
        throw FormatError("embedding blob: truncated header");
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), h.begin(),
                    [](char m, unsigned char b) { return static_cast<unsigned char>(m) == b; })) {
        throw FormatError("embedding blob: bad magic (expected NSPC)");
    }
    const auto version = get_le<std::uint32_t>(h.data() + 4);
    if (version != kFormatVersion) {
        throw FormatError("embedding blob: unsupported version " + std::to_string(version));
    }
    BlobHeader out{get_le<std::uint64_t>(h.data() + 8), get_le<std::uint32_t>(h.data() + 16)};
    if (out.dim == 0) {
        throw FormatError("embedding blob: dim must be positive");
    }
    return out;
}

std::vector<float> read_payload(std::istream& in, const BlobHeader& h) {
    const std::uint64_t count = h.rows * h.dim;
    std::vector<unsigned char> bytes(count * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw FormatError("embedding blob: truncated payload");
    }
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes.data() + 4 * i));
    }
    return data;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

} // namespace

fs::path sidecar_path(const fs::path& file) {
    return fs::path(file.string() + ".ids.json");
}

void write_embedding_blob(std::ostream& out, const EmbeddingMatrix& m) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kFormatVersion);
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
    for (float x : m.data()) {
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
    }
}

EmbeddingMatrix read_embedding_blob(std::istream& in, std::vector<std::string> ids) {
    const auto header = read_header(in);
    auto data = read_payload(in, header);
    if (ids.size() != header.rows) {
        throw DataError("embedding blob: " + std::to_string(ids.size()) + " ids for " +
                        std::to_string(header.rows) + " rows");
    }
    return {std::move(data), header.dim, std::move(ids)};
}

EmbeddingMatrix load_embeddings(const fs::path& file, std::optional<std::size_t> expected_dim) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + file.string());
    }
    const auto header = read_header(in);
    if (expected_dim && header.dim != *expected_dim) {
        throw DataError(file.string() + ": dim " + std::to_string(header.dim) +
                        " does not match expected " + std::to_string(*expected_dim));
    }
    const auto payload_bytes = header.rows * header.dim * 4;
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in.tellg());
    if (size != kHeaderBytes + payload_bytes) {
        throw FormatError(file.string() + ": file size " + std::to_string(size) +
                          " does not match header (" + std::to_string(header.rows) + "x" +
                          std::to_string(header.dim) + ")");
    }
    in.seekg(kHeaderBytes);
    auto data = read_payload(in, header);

    const auto ids_json = read_json_file(sidecar_path(file));
    if (!ids_json.is_array()) {
        throw FormatError(sidecar_path(file).string() + ": expected a JSON array of strings");
    }
    std::vector<std::string> ids;
    ids.reserve(ids_json.size());
    for (const auto& v : ids_json) {
        if (!v.is_string()) {
            throw FormatError(sidecar_path(file).string() + ": non-string id");
        }
        ids.push_back(v.get<std::string>());
    }
    if (ids.size() != header.rows) {
        throw DataError(file.string() + ": sidecar lists " + std::to_string(ids.size()) +
                        " ids for " + std::to_string(header.rows) + " rows");
    }
    try {
        return {std::move(data), header.dim, std::move(ids)};
    } catch (const DataError& e) {
        throw DataError(file.string() + ": " + e.what());
    }
}

void save_embeddings(const fs::path& file, const EmbeddingMatrix& m) {
    {
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + file.string());
        }
        write_embedding_blob(out, m);
        if (!out) {
            throw IoError("write failed: " + file.string());
        }
    }
    write_text_file(sidecar_path(file), json(m.ids()).dump());
}

// ---------------------------------------------------------------------------
// LabelSpace

LabelSpace::LabelSpace(std::vector<std::string> labels, EmbeddingMatrix features,
                       std::string prompt_template)
    : labels_(std::move(labels)), features_(std::move(features)),
      prompt_template_(std::move(prompt_template)) {
    if (labels_.empty()) {
        throw DataError("label space: at least one ID label is required");
    }
    if (features_.rows() != labels_.size()) {
        throw DataError("label space: " + std::to_string(labels_.size()) + " labels but " +
                        std::to_string(features_.rows()) + " feature rows");
    }
    if (prompt_template_.find(text::kLabelToken) == std::string::npos) {
        throw DataError("label space: prompt template lacks the <label> placeholder");
    }
    normalized_.reserve(labels_.size());
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_) {
        auto n = text::normalize_label(l);
        if (n.empty()) {
            throw DataError("label space: empty label");
        }
        if (!seen.insert(n).second) {
            throw DataError("label space: duplicate label '" + l + "'");
        }
        normalized_.push_back(std::move(n));
    }
    std::sort(normalized_.begin(), normalized_.end());
}

bool LabelSpace::contains(std::string_view text) const {
    return std::binary_search(normalized_.begin(), normalized_.end(), text::normalize_label(text));
}

LabelSpace load_label_space(const fs::path& manifest) {
    const auto j = read_json_file(manifest);
    try {
        auto labels = j.at("labels").get<std::vector<std::string>>();
        auto tmpl = j.value("prompt_template", std::string(kDefaultPromptTemplate));
        fs::path features = j.at("features").get<std::string>();
        if (features.is_relative()) {
            features = manifest.parent_path() / features;
        }
        return {std::move(labels), load_embeddings(features), std::move(tmpl)};
    } catch (const json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
}

void save_label_space(const fs::path& manifest, const LabelSpace& space,
                      const fs::path& features_file) {
    save_embeddings(features_file, space.features());
    fs::path rel = features_file;
    if (features_file.parent_path() == manifest.parent_path()) {
        rel = features_file.filename();
    }
    json j;
    j["labels"] = space.labels();
    j["prompt_template"] = space.prompt_template();
    j["features"] = rel.string();
    write_text_file(manifest, j.dump(2));
}

// ---------------------------------------------------------------------------
// NegativeSpace

std::string_view to_string(NegativeKind kind) {
    switch (kind) {
    case NegativeKind::NL: return "NL";
    case NegativeKind::ENS: return "ENS";
    case NegativeKind::VSNL: return "VSNL";
    }
    return "?";
}

NegativeKind negative_kind_from_string(std::string_view s) {
    if (s == "NL") return NegativeKind::NL;
    if (s == "ENS") return NegativeKind::ENS;
    if (s == "VSNL") return NegativeKind::VSNL;
    throw FormatError("unknown negative space kind '" + std::string(s) + "'");
}

NegativeSpace::NegativeSpace(NegativeKind kind, std::vector<std::string> texts,
                             EmbeddingMatrix features, std::size_t group_size,
                             std::uint64_t epoch)
    : kind_(kind), texts_(std::move(texts)), features_(std::move(features)),
      group_size_(group_size), epoch_(epoch) {
    if (texts_.empty()) {
        throw DataError("negative space: at least one negative text is required");
    }
    if (features_.rows() != texts_.size()) {
        throw DataError("negative space: " + std::to_string(texts_.size()) + " texts but " +
                        std::to_string(features_.rows()) + " feature rows");
    }
    if (group_size_ == 0) {
        throw ConfigError("negative space: group size must be positive");
    }
}

void NegativeSpace::check_disjoint(const LabelSpace& ids) const {
    if (features_.dim() != ids.dim()) {
        throw DimError("negative space dim " + std::to_string(features_.dim()) +
                       " differs from label space dim " + std::to_string(ids.dim()));
    }
    for (const auto& t : texts_) {
        if (ids.contains(t)) {
            throw DataError("negative space: text '" + t + "' is an ID label");
        }
    }
}

std::string_view to_string(Tag tag) { return tag == Tag::ID ? "ID" : "OOD"; }

Tag tag_from_string(std::string_view s) {
    const auto n = text::normalize_label(s);
    if (n == "id" || n == "1" || n == "in") return Tag::ID;
    if (n == "ood" || n == "0" || n == "out") return Tag::OOD;
    throw FormatError("unknown ground-truth tag '" + std::string(s) + "'");
}

} // namespace ants
