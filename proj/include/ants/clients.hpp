#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "ants/negspace.hpp"

namespace ants {

struct RetryPolicy {
    std::size_t max_attempts = 3;
    std::chrono::milliseconds base_delay{200};

    /// Delay before attempt `attempt` (1-based; attempt 1 has no delay): base * 2^(attempt-2).
    [[nodiscard]] std::chrono::milliseconds delay_before(std::size_t attempt) const;
};

enum class HttpProtocol {
    /// Single JSON endpoint: {task: "describe"|"similar"|"embed", ...} -> {texts?, vectors?}.
    Native,
    /// Chat-completions for describe/similar and /embeddings for embed.
    OpenAI,
};

struct HttpClientConfig {
    /// e.g. "http://localhost:8080" or "https://api.example.com/v1".
    std::string base_url;
    std::string token;
    HttpProtocol protocol = HttpProtocol::Native;
    /// Native endpoint path, appended to base_url.
    std::string native_path = "/generate";
    std::string chat_model;
    std::string embedding_model;
    RetryPolicy retry;
    std::chrono::seconds timeout{60};
    /// When set, image ids resolve to files under this directory and are sent base64-encoded.
    std::optional<std::filesystem::path> image_root;

    /// base_url / token from ANTS_ENDPOINT_URL / ANTS_API_TOKEN, protocol from ANTS_PROTOCOL
    /// ("native" or "openai"). Throws ConfigError when the URL is unset.
    static HttpClientConfig from_env();
};

/// Generation client over HTTP. Retries network errors, 429 and 5xx with exponential backoff;
/// other failures and exhausted retries raise ClientError.
class HttpGenerationClient final : public GenerationClient {
  public:
    explicit HttpGenerationClient(HttpClientConfig cfg);
    ~HttpGenerationClient() override;

    std::string describe_image(const DescribeRequest& request) override;
    std::vector<std::string> similar_labels(const SimilarRequest& request) override;
    EmbeddingMatrix embed_texts(std::span<const std::string> texts) override;

  private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
    std::optional<std::string> image_b64(const std::string& id) const;

    HttpClientConfig cfg_;
    std::string origin_;
    std::string prefix_;
};

/// Splits a chat reply listing categories (one per line or comma-separated, with optional
/// numbering or bullets) into clean names.
std::vector<std::string> parse_label_list(const std::string& reply);

enum class FixtureMode { Replay, Record };

/// Record/replay wrapper. Every request is keyed by the SHA-256 of its canonical JSON; the
/// fixture file <dir>/<key>.json holds {"request": ..., "response": ...}.
/// Replay mode never calls the inner client and reports a missing fixture as ClientError.
/// Record mode forwards to the inner client and writes (or overwrites) the fixture.
class ReplayClient final : public GenerationClient {
  public:
    ReplayClient(std::filesystem::path dir, FixtureMode mode, GenerationClient* inner = nullptr);

    std::string describe_image(const DescribeRequest& request) override;
    std::vector<std::string> similar_labels(const SimilarRequest& request) override;
    EmbeddingMatrix embed_texts(std::span<const std::string> texts) override;

    static nlohmann::json canonical(const DescribeRequest& request);
    static nlohmann::json canonical(const SimilarRequest& request);
    static nlohmann::json canonical(std::span<const std::string> texts);
    static std::string key(const nlohmann::json& canonical_request);

  private:
    nlohmann::json fetch(const nlohmann::json& request,
                         const std::function<nlohmann::json()>& produce);

    std::filesystem::path dir_;
    FixtureMode mode_;
    GenerationClient* inner_;
};

} // namespace ants
