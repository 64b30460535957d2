#include "ants/clients.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "ants/errors.hpp"
#include "ants/hash.hpp"

namespace ants {

namespace fs = std::filesystem;
using nlohmann::json;

std::chrono::milliseconds RetryPolicy::delay_before(std::size_t attempt) const {
    if (attempt <= 1) {
        return std::chrono::milliseconds{0};
    }
    return base_delay * (1ll << std::min<std::size_t>(attempt - 2, 20));
}

HttpClientConfig HttpClientConfig::from_env() {
    HttpClientConfig cfg;
    const char* url = std::getenv("ANTS_ENDPOINT_URL");
    if (url == nullptr || *url == '\0') {
        throw ConfigError("ANTS_ENDPOINT_URL is not set");
    }
    cfg.base_url = url;
    if (const char* token = std::getenv("ANTS_API_TOKEN")) {
        cfg.token = token;
    }
    if (const char* proto = std::getenv("ANTS_PROTOCOL")) {
        const std::string p = proto;
        if (p == "openai") {
            cfg.protocol = HttpProtocol::OpenAI;
        } else if (p != "native" && !p.empty()) {
            throw ConfigError("ANTS_PROTOCOL must be 'native' or 'openai'");
        }
    }
    if (const char* m = std::getenv("ANTS_CHAT_MODEL")) {
        cfg.chat_model = m;
    }
    if (const char* m = std::getenv("ANTS_EMBEDDING_MODEL")) {
        cfg.embedding_model = m;
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// HttpGenerationClient

HttpGenerationClient::HttpGenerationClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL must start with http:// or https://: " + cfg_.base_url);
    }
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    origin_ = cfg_.base_url.substr(0, path_start);
    if (path_start != std::string::npos) {
        prefix_ = cfg_.base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') {
            prefix_.pop_back();
        }
    }
    if (cfg_.retry.max_attempts == 0) {
        throw ConfigError("retry policy needs at least one attempt");
    }
}

HttpGenerationClient::~HttpGenerationClient() = default;

json HttpGenerationClient::post(const std::string& path, const json& body) const {
    httplib::Client http(origin_);
    http.set_connection_timeout(cfg_.timeout);
    http.set_read_timeout(cfg_.timeout);
    http.set_write_timeout(cfg_.timeout);
    httplib::Headers headers;
    if (!cfg_.token.empty()) {
        headers.emplace("Authorization", "Bearer " + cfg_.token);
    }
    const std::string payload = body.dump();
    std::string last_error;
    for (std::size_t attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
        std::this_thread::sleep_for(cfg_.retry.delay_before(attempt));
        auto res = http.Post(prefix_ + path, headers, payload, "application/json");
        if (!res) {
            last_error = "network error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ClientError("POST " + prefix_ + path + ": HTTP " + std::to_string(res->status) +
                              ": " + res->body.substr(0, 200));
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw ClientError("POST " + prefix_ + path + ": invalid JSON response: " + e.what());
        }
    }
    throw ClientError("POST " + prefix_ + path + " failed after " +
                      std::to_string(cfg_.retry.max_attempts) + " attempts: " + last_error);
}

std::optional<std::string> HttpGenerationClient::image_b64(const std::string& id) const {
    if (!cfg_.image_root) {
        return std::nullopt;
    }
    std::ifstream in(*cfg_.image_root / id, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream bytes;
    bytes << in.rdbuf();
    return base64_encode(bytes.str());
}

namespace {

std::string chat_content(const json& reply) {
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ClientError(std::string("chat reply lacks choices[0].message.content: ") + e.what());
    }
}

std::vector<std::string> texts_field(const json& reply) {
    try {
        return reply.at("texts").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ClientError(std::string("reply lacks a 'texts' array: ") + e.what());
    }
}

EmbeddingMatrix rows_to_matrix(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) {
        throw ClientError("embedding reply is empty");
    }
    const std::size_t dim = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * dim);
    for (const auto& r : rows) {
        if (r.size() != dim || dim == 0) {
            throw ClientError("embedding reply has ragged or empty rows");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    try {
        return EmbeddingMatrix::with_positional_ids(std::move(data), dim);
    } catch (const DataError& e) {
        throw ClientError(std::string("embedding reply: ") + e.what());
    }
}

} // namespace

std::string HttpGenerationClient::describe_image(const DescribeRequest& request) {
    const auto img = image_b64(request.image.id);
    if (cfg_.protocol == HttpProtocol::Native) {
        json body = {{"task", "describe"},
                     {"text", request.prompt},
                     {"image_id", request.image.id},
                     {"exclude", request.exclude},
                     {"nonce", request.nonce}};
        if (img) {
            body["image_b64"] = *img;
        }
        const auto texts = texts_field(post(cfg_.native_path, body));
        if (texts.empty()) {
            throw ClientError("describe reply has no text");
        }
        return texts.front();
    }
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    if (img) {
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + *img}}}});
    } else {
        content.push_back({{"type", "text"}, {"text", "Image id: " + request.image.id}});
    }
    json body = {{"messages", json::array({{{"role", "user"}, {"content", content}}})},
                 {"seed", request.nonce}};
    if (!cfg_.chat_model.empty()) {
        body["model"] = cfg_.chat_model;
    }
    return chat_content(post("/chat/completions", body));
}

std::vector<std::string> HttpGenerationClient::similar_labels(const SimilarRequest& request) {
    if (cfg_.protocol == HttpProtocol::Native) {
        const json body = {{"task", "similar"},
                           {"text", request.prompt},
                           {"label", request.class_name},
                           {"count", request.count}};
        return texts_field(post(cfg_.native_path, body));
    }
    json body = {{"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})}};
    if (!cfg_.chat_model.empty()) {
        body["model"] = cfg_.chat_model;
    }
    auto labels = parse_label_list(chat_content(post("/chat/completions", body)));
    if (labels.size() > request.count) {
        labels.resize(request.count);
    }
    return labels;
}

EmbeddingMatrix HttpGenerationClient::embed_texts(std::span<const std::string> texts) {
    const std::vector<std::string> input(texts.begin(), texts.end());
    std::vector<std::vector<float>> rows;
    if (cfg_.protocol == HttpProtocol::Native) {
        const auto reply = post(cfg_.native_path, {{"task", "embed"}, {"texts", input}});
        try {
            rows = reply.at("vectors").get<std::vector<std::vector<float>>>();
        } catch (const json::exception& e) {
            throw ClientError(std::string("embed reply lacks 'vectors': ") + e.what());
        }
    } else {
        json body = {{"input", input}};
        if (!cfg_.embedding_model.empty()) {
            body["model"] = cfg_.embedding_model;
        }
        const auto reply = post("/embeddings", body);
        try {
            const auto& data = reply.at("data");
            rows.resize(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto idx = data[i].value("index", i);
                if (idx >= rows.size()) {
                    throw ClientError("embedding reply index out of range");
                }
                rows[idx] = data[i].at("embedding").get<std::vector<float>>();
            }
        } catch (const json::exception& e) {
            throw ClientError(std::string("embedding reply malformed: ") + e.what());
        }
    }
    if (rows.size() != texts.size()) {
        throw ClientError("embedding reply has " + std::to_string(rows.size()) + " rows for " +
                          std::to_string(texts.size()) + " texts");
    }
    return rows_to_matrix(rows);
}

std::vector<std::string> parse_label_list(const std::string& reply) {
    std::vector<std::string> out;
    std::string item;
    auto flush = [&] {
        std::size_t b = 0;
        // strip bullets and "12." / "3)" numbering
        while (b < item.size() && (std::isspace(static_cast<unsigned char>(item[b])) ||
                                   item[b] == '-' || item[b] == '*' || item[b] == '\xe2')) {
            ++b;
        }
        std::size_t d = b;
        while (d < item.size() && std::isdigit(static_cast<unsigned char>(item[d]))) {
            ++d;
        }
        if (d > b && d < item.size() && (item[d] == '.' || item[d] == ')')) {
            b = d + 1;
        }
        std::size_t e = item.size();
        while (e > b && (std::isspace(static_cast<unsigned char>(item[e - 1])) || item[e - 1] == '.')) {
            --e;
        }
        while (b < e && std::isspace(static_cast<unsigned char>(item[b]))) {
            ++b;
        }
        if (e > b) {
            out.push_back(item.substr(b, e - b));
        }
        item.clear();
    };
    for (char c : reply) {
        if (c == '\n' || c == ',' || c == ';') {
            flush();
        } else {
            item.push_back(c);
        }
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// ReplayClient

ReplayClient::ReplayClient(fs::path dir, FixtureMode mode, GenerationClient* inner)
    : dir_(std::move(dir)), mode_(mode), inner_(inner) {
    if (mode_ == FixtureMode::Record) {
        if (inner_ == nullptr) {
            throw ConfigError("record mode needs an inner client");
        }
        fs::create_directories(dir_);
    } else if (!fs::is_directory(dir_)) {
        throw IoError("fixture directory does not exist: " + dir_.string());
    }
}

json ReplayClient::canonical(const DescribeRequest& r) {
    return {{"task", "describe"}, {"image", r.image.id}, {"exclude", r.exclude},
            {"prompt", r.prompt}, {"nonce", r.nonce}};
}

json ReplayClient::canonical(const SimilarRequest& r) {
    return {{"task", "similar"}, {"label", r.class_name}, {"count", r.count}, {"prompt", r.prompt}};
}

json ReplayClient::canonical(std::span<const std::string> texts) {
    return {{"task", "embed"}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
}

std::string ReplayClient::key(const json& canonical_request) {
    return sha256_hex(canonical_request.dump());
}

json ReplayClient::fetch(const json& request, const std::function<json()>& produce) {
    const auto k = key(request);
    const auto path = dir_ / (k + ".json");
    if (mode_ == FixtureMode::Replay) {
        std::ifstream in(path);
        if (!in) {
            throw ClientError("no fixture " + k + " for " + request.dump().substr(0, 160));
        }
        try {
            return json::parse(in).at("response");
        } catch (const json::exception& e) {
            throw ClientError("corrupt fixture " + path.string() + ": " + e.what());
        }
    }
    json response = produce();
    const auto tmp = dir_ / (k + ".json.tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"request", request}, {"response", response}}.dump(1);
        if (!out) {
            throw IoError("cannot write fixture " + tmp.string());
        }
    }
    fs::rename(tmp, path);
    return response;
}

std::string ReplayClient::describe_image(const DescribeRequest& request) {
    return fetch(canonical(request), [&] {
        return json{{"texts", {inner_->describe_image(request)}}};
    }).at("texts").at(0).get<std::string>();
}

std::vector<std::string> ReplayClient::similar_labels(const SimilarRequest& request) {
    return fetch(canonical(request), [&] {
        return json{{"texts", inner_->similar_labels(request)}};
    }).at("texts").get<std::vector<std::string>>();
}

EmbeddingMatrix ReplayClient::embed_texts(std::span<const std::string> texts) {
    const auto response = fetch(canonical(texts), [&] {
        const auto m = inner_->embed_texts(texts);
        std::vector<std::vector<float>> rows;
        rows.reserve(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const auto r = m.row(i);
            rows.emplace_back(r.begin(), r.end());
        }
        return json{{"vectors", rows}};
    });
    return rows_to_matrix(response.at("vectors").get<std::vector<std::vector<float>>>());
}

} // namespace ants
