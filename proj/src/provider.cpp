#include "poet/provider.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include <fmt/format.h>

#include "poet/error.hpp"

namespace poet::provider {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const GenerationRequest& req)
{
    if (!(req.temperature >= 0.0 && req.temperature <= 2.0))
        throw Error(Errc::PreconditionViolated, fmt::format("temperature {} outside [0, 2]", req.temperature));
    if (req.max_tokens < kMinMaxTokens)
        throw Error(Errc::PreconditionViolated,
                    fmt::format("max_tokens {} below {}", req.max_tokens, kMinMaxTokens));
    if (req.bundle.user_text.empty())
        throw Error(Errc::PreconditionViolated, "empty prompt");
}

// ---------------------------------------------------------------------------------------------

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(Errc::FixtureExhausted, "cannot read fixture " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool tag_matches(const std::string& pattern, const std::string& tag)
{
    if (!pattern.empty() && pattern.back() == '*')
        return tag.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0;
    return pattern == tag;
}

std::vector<ScriptedProvider::Entry> load_manifest(const fs::path& manifest)
{
    json doc;
    try {
        doc = json::parse(slurp(manifest));
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, fmt::format("{}: {}", manifest.string(), e.what()));
    }
    const json& list = doc.is_object() ? doc.at("fixtures") : doc;
    if (!list.is_array())
        throw Error(Errc::ConfigInvalid, manifest.string() + ": expected an array of fixtures");
    std::vector<ScriptedProvider::Entry> out;
    const fs::path base = manifest.parent_path();
    for (const auto& item : list) {
        ScriptedProvider::Entry e;
        if (item.contains("tag") && !item["tag"].is_null())
            e.tag = item["tag"].get<std::string>();
        if (item.contains("text")) {
            e.text = item["text"].get<std::string>();
            e.source = "<inline>";
        } else {
            const fs::path file = base / item.at("file").get<std::string>();
            e.text = slurp(file);
            e.source = file.filename().string();
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

ScriptedProvider::ScriptedProvider(std::vector<Entry> entries)
    : entries_(std::move(entries)), used_(entries_.size(), false)
{
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::load(const fs::path& path)
{
    if (fs::is_regular_file(path))
        return std::make_unique<ScriptedProvider>(load_manifest(path));
    if (!fs::is_directory(path))
        throw Error(Errc::ConfigInvalid, "fixture path " + path.string() + " does not exist");
    if (fs::is_regular_file(path / "manifest.json"))
        return std::make_unique<ScriptedProvider>(load_manifest(path / "manifest.json"));

    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(path))
        if (de.is_regular_file() && de.path().filename().string().front() != '.')
            files.push_back(de.path());
    std::sort(files.begin(), files.end());
    std::vector<Entry> entries;
    for (const auto& f : files)
        entries.push_back(Entry{std::nullopt, slurp(f), f.filename().string()});
    return std::make_unique<ScriptedProvider>(std::move(entries));
}

GenerationResponse ScriptedProvider::generate(const GenerationRequest& req)
{
    validate(req);
    std::lock_guard lock(mutex_);
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < entries_.size() && !pick; ++i)
        if (!used_[i] && entries_[i].tag && tag_matches(*entries_[i].tag, req.attempt_tag))
            pick = i;
    for (std::size_t i = 0; i < entries_.size() && !pick; ++i)
        if (!used_[i] && !entries_[i].tag)
            pick = i;
    if (!pick)
        throw Error(Errc::FixtureExhausted, "no fixture left for '" + req.attempt_tag + "'");
    used_[*pick] = true;
    GenerationResponse r;
    r.text = entries_[*pick].text;
    return r;
}

json ScriptedProvider::checkpoint() const
{
    std::lock_guard lock(mutex_);
    json used = json::array();
    for (std::size_t i = 0; i < used_.size(); ++i)
        if (used_[i])
            used.push_back(i);
    return json{{"used", used}};
}

void ScriptedProvider::restore(const json& state)
{
    std::lock_guard lock(mutex_);
    std::fill(used_.begin(), used_.end(), false);
    for (const auto& i : state.at("used")) {
        const auto idx = i.get<std::size_t>();
        if (idx >= used_.size())
            throw Error(Errc::JournalParseError, "fixture cursor out of range");
        used_[idx] = true;
    }
}

std::size_t ScriptedProvider::remaining() const
{
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

// ---------------------------------------------------------------------------------------------

RemoteProvider::RemoteProvider(RemoteSettings settings, Sleeper sleeper)
    : settings_(std::move(settings)), sleep_(std::move(sleeper))
{
    if (!sleep_)
        sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (settings_.base_url.empty())
        throw Error(Errc::ConfigInvalid, "remote provider needs a base_url");
    if (!settings_.api_key_env.empty()) {
        const char* key = std::getenv(settings_.api_key_env.c_str());
        if (!key || !*key)
            throw Error(Errc::AuthError, "environment variable " + settings_.api_key_env + " is not set");
        api_key_ = key;
    }
}

GenerationResponse RemoteProvider::generate(const GenerationRequest& req)
{
    validate(req);
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(settings_.base_url, m, url_re))
        throw Error(Errc::ConfigInvalid, "malformed base_url " + settings_.base_url);
    const std::string host = m[1].str();
    std::string prefix = m[2].matched ? m[2].str() : std::string();
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    const std::string path = prefix + "/chat/completions";

    const json body{
        {"model", settings_.model},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
        {"messages",
         json::array({json{{"role", "system"}, {"content", req.bundle.system_text}},
                      json{{"role", "user"}, {"content", req.bundle.user_text}}})},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key_.empty())
        headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= settings_.retries; ++attempt) {
        if (attempt > 0)
            sleep_(std::chrono::milliseconds(1000L << (attempt - 1)));
        httplib::Client client(host);
        const auto usec = static_cast<long long>(settings_.timeout_s * 1e6);
        client.set_connection_timeout(usec / 1'000'000, usec % 1'000'000);
        client.set_read_timeout(usec / 1'000'000, usec % 1'000'000);
        client.set_write_timeout(usec / 1'000'000, usec % 1'000'000);

        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, payload, "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);

        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw Error(Errc::AuthError, fmt::format("HTTP {} from {}", res->status, host));
        if (res->status == 429 || res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(Errc::TransportError, fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 500)));

        GenerationResponse out;
        out.latency_ms = elapsed.count();
        try {
            const json doc = json::parse(res->body);
            out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
            if (doc.contains("usage") && doc["usage"].is_object()) {
                Usage u;
                u.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
                u.completion_tokens = doc["usage"].value("completion_tokens", 0L);
                out.usage = u;
            }
        } catch (const json::exception& e) {
            throw Error(Errc::TransportError, std::string("malformed completion: ") + e.what());
        }
        if (out.text.empty())
            throw Error(Errc::TransportError, "empty completion");
        return out;
    }
    throw Error(Errc::TransportError,
                fmt::format("{} failed after {} retries ({})", host, settings_.retries, last_error));
}

}  // namespace poet::provider
