#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poet/operators.hpp"

namespace poet::provider {

inline constexpr double kOperatorTemperature = 0.8;
inline constexpr double kFidelityTemperature = 0.2;
inline constexpr int kMinMaxTokens = 256;

struct GenerationRequest {
    ops::PromptBundle bundle;
    double temperature = kOperatorTemperature;
    int max_tokens = 4096;
    std::string attempt_tag;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct GenerationResponse {
    std::string text;
    std::optional<Usage> usage;
    long latency_ms = 0;
};

/// Throws PreconditionViolated for temperature outside [0, 2] or max_tokens < 256.
void validate(const GenerationRequest& req);

class Provider {
public:
    virtual ~Provider() = default;
    virtual GenerationResponse generate(const GenerationRequest& req) = 0;

    /// Opaque cursor state for resuming a run; null when the provider is stateless.
    virtual nlohmann::json checkpoint() const { return nullptr; }
    virtual void restore(const nlohmann::json& /*state*/) {}
};

/// Replays fixture files. An entry with a tag is served to the request with that exact
/// attempt_tag (a trailing '*' matches any suffix); otherwise requests take the next
/// untagged entry in order. Each entry is served once.
class ScriptedProvider : public Provider {
public:
    struct Entry {
        std::optional<std::string> tag;
        std::string text;
        std::string source;  // file name, for diagnostics
    };

    explicit ScriptedProvider(std::vector<Entry> entries);

    /// `path` is a manifest.json ([{"tag": ..., "file": ...}, ...] or {"fixtures": [...]}),
    /// or a directory holding one, or a directory of fixture files read in filename order.
    static std::unique_ptr<ScriptedProvider> load(const std::filesystem::path& path);

    GenerationResponse generate(const GenerationRequest& req) override;
    nlohmann::json checkpoint() const override;
    void restore(const nlohmann::json& state) override;

    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    std::vector<bool> used_;
};

struct RemoteSettings {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 120.0;
    int retries = 3;
};

/// Chat-completions client. Transport failures, 429 and 5xx are retried with 1 s, 2 s, 4 s
/// backoff; 401/403 raise AuthError immediately.
class RemoteProvider : public Provider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit RemoteProvider(RemoteSettings settings, Sleeper sleeper = {});

    GenerationResponse generate(const GenerationRequest& req) override;

private:
    RemoteSettings settings_;
    std::string api_key_;
    Sleeper sleep_;
};

}  // namespace poet::provider
