#include "poet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "poet/error.hpp"
#include "poet/tooling.hpp"

namespace poet::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Reader {
public:
    Reader(const json& obj, std::string prefix, std::vector<std::string>& errors)
        : obj_(obj), prefix_(std::move(prefix)), errors_(errors)
    {
    }

    template <class T>
    void get(std::string_view key, T& out, std::string_view alias = {})
    {
        const json* v = find(key, alias);
        if (!v)
            return;
        try {
            if constexpr (std::is_integral_v<T>) {
                if (!v->is_number_integer())
                    throw std::invalid_argument("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v->is_number())
                    throw std::invalid_argument("");
            } else {
                if (!v->is_string())
                    throw std::invalid_argument("");
            }
            out = v->get<T>();
        } catch (const std::exception&) {
            errors_.push_back(fmt::format("{}{}: wrong type ({})", prefix_, key, v->type_name()));
        }
    }

    void path(std::string_view key, fs::path& out, const fs::path& base)
    {
        std::string s;
        get(key, s);
        if (!s.empty())
            out = fs::path(s).is_absolute() ? fs::path(s) : (base / s).lexically_normal();
    }

    const json* object(std::string_view key)
    {
        const json* v = find(key, {});
        if (v && !v->is_object()) {
            errors_.push_back(fmt::format("{}{}: expected an object", prefix_, key));
            return nullptr;
        }
        return v;
    }

    /// Reports keys that were never looked at.
    void finish()
    {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key))
                errors_.push_back(fmt::format("{}{}: unknown key", prefix_, key));
    }

private:
    const json* find(std::string_view key, std::string_view alias)
    {
        seen_.insert(std::string(key));
        if (!alias.empty())
            seen_.insert(std::string(alias));
        if (auto it = obj_.find(std::string(key)); it != obj_.end() && !it->is_null())
            return &*it;
        if (!alias.empty())
            if (auto it = obj_.find(std::string(alias)); it != obj_.end() && !it->is_null())
                return &*it;
        return nullptr;
    }

    const json& obj_;
    std::string prefix_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

tooling::ToolCommand read_command(const json& j, const std::string& prefix, std::string_view key,
                                  std::vector<std::string>& errors, tooling::ToolCommand fallback)
{
    Reader r(j, prefix, errors);
    tooling::ToolCommand c = fallback;
    r.get(key, c.command);
    r.get("timeout_s", c.timeout_s);
    r.finish();
    return c;
}

void throw_if(const std::vector<std::string>& errors)
{
    if (errors.empty())
        return;
    std::string msg = fmt::format("{} problem(s):", errors.size());
    for (const auto& e : errors)
        msg += "\n  - " + e;
    throw Error(Errc::ConfigInvalid, msg);
}

std::vector<std::string> violations(const engine::RunConfig& cfg)
{
    std::vector<std::string> v;
    if (cfg.population_size < 1)
        v.push_back(fmt::format("population_size must be >= 1 (got {})", cfg.population_size));
    if (cfg.offspring_per_generation < 1)
        v.push_back(fmt::format("offspring_per_generation must be >= 1 (got {})", cfg.offspring_per_generation));
    if (cfg.generations < 1)
        v.push_back(fmt::format("generations must be >= 1 (got {})", cfg.generations));
    if (cfg.repair_attempts < 0)
        v.push_back(fmt::format("repair_attempts must be >= 0 (got {})", cfg.repair_attempts));
    if (!(cfg.ucb_c >= 0.0) || !std::isfinite(cfg.ucb_c))
        v.push_back("ucb_c must be a finite non-negative number");
    if (cfg.call_budget && *cfg.call_budget < 0)
        v.push_back(fmt::format("call_budget must be >= 0 (got {})", *cfg.call_budget));
    if (cfg.workers < 1)
        v.push_back(fmt::format("workers must be >= 1 (got {})", cfg.workers));
    if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0))
        v.push_back("temperature must lie in [0, 2]");
    if (cfg.max_tokens < provider::kMinMaxTokens)
        v.push_back(fmt::format("max_tokens must be >= {}", provider::kMinMaxTokens));
    const auto& p = cfg.provider;
    if (p.kind.empty())
        v.push_back("provider section is mandatory (provider.kind = scripted | remote)");
    else if (p.kind == "scripted") {
        if (p.fixtures.empty())
            v.push_back("provider.fixtures is required for the scripted provider");
    } else if (p.kind == "remote") {
        if (p.base_url.empty())
            v.push_back("provider.base_url is required for the remote provider");
        if (p.model.empty())
            v.push_back("provider.model is required for the remote provider");
        if (!(p.timeout_s > 0))
            v.push_back("provider.timeout_s must be > 0");
    } else {
        v.push_back(fmt::format("provider.kind must be scripted or remote (got '{}')", p.kind));
    }
    const auto& d = cfg.difftest;
    if (d.max_vectors < 1)
        v.push_back("difftest.max_vectors must be >= 1");
    if (d.max_cycles < 1)
        v.push_back("difftest.max_cycles must be >= 1");
    if (d.clock_period < 2 || d.clock_period % 2 != 0)
        v.push_back("difftest.clock_period must be an even number >= 2");
    if (d.max_attempts < 1)
        v.push_back("difftest.max_attempts must be >= 1");
    if (cfg.tools.sim.run.command.empty())
        v.push_back("tools.sim.run must not be empty");
    if (cfg.tools.synth.command.empty())
        v.push_back("tools.synth.command must not be empty");
    if (!(cfg.tools.sim.run.timeout_s > 0) || !(cfg.tools.synth.timeout_s > 0))
        v.push_back("tool timeouts must be > 0");
    return v;
}

}  // namespace

engine::RunConfig config_from_json(const json& doc, const fs::path& base_dir)
{
    if (!doc.is_object())
        throw Error(Errc::ConfigParseError, "top level must be a JSON object");
    std::vector<std::string> errors;
    engine::RunConfig cfg;
    Reader top(doc, "", errors);
    top.get("population_size", cfg.population_size, "N");
    top.get("offspring_per_generation", cfg.offspring_per_generation, "lambda");
    top.get("generations", cfg.generations, "G");
    top.get("repair_attempts", cfg.repair_attempts, "R");
    top.get("ucb_c", cfg.ucb_c);
    top.get("seed", cfg.seed);
    long budget = -1;
    bool has_budget = doc.contains("call_budget") && !doc["call_budget"].is_null();
    top.get("call_budget", budget);
    if (has_budget)
        cfg.call_budget = budget;
    top.get("workers", cfg.workers);
    top.get("temperature", cfg.temperature);
    top.get("max_tokens", cfg.max_tokens);
    top.path("prompt_dir", cfg.prompt_dir, base_dir);

    if (const json* p = top.object("provider")) {
        Reader r(*p, "provider.", errors);
        r.get("kind", cfg.provider.kind);
        r.path("fixtures", cfg.provider.fixtures, base_dir);
        r.get("base_url", cfg.provider.base_url, "endpoint");
        r.get("model", cfg.provider.model);
        r.get("api_key_env", cfg.provider.api_key_env);
        r.get("timeout_s", cfg.provider.timeout_s);
        r.finish();
    }

    std::string liberty;
    const json* tools = top.object("tools");
    const json* sim = nullptr;
    const json* synth = nullptr;
    if (tools) {
        Reader r(*tools, "tools.", errors);
        sim = r.object("sim");
        synth = r.object("synth");
        fs::path lib;
        r.path("liberty", lib, base_dir);
        liberty = lib.string();
        r.finish();
    }
    cfg.tools.liberty = liberty;
    if (sim) {
        Reader r(*sim, "tools.sim.", errors);
        r.get("compile", cfg.tools.sim.compile.command);
        r.get("run", cfg.tools.sim.run.command);
        double t = 60.0;
        r.get("timeout_s", t);
        cfg.tools.sim.compile.timeout_s = t;
        cfg.tools.sim.run.timeout_s = t;
        r.finish();
    } else {
        cfg.tools.sim = tooling::default_sim_tool();
    }
    if (synth)
        cfg.tools.synth = read_command(*synth, "tools.synth.", "command", errors, tooling::ToolCommand{"", 300.0});
    else
        cfg.tools.synth = tooling::default_synth_tool(liberty);

    if (const json* d = top.object("difftest")) {
        Reader r(*d, "difftest.", errors);
        r.get("max_vectors", cfg.difftest.max_vectors);
        r.get("max_cycles", cfg.difftest.max_cycles);
        r.get("clock_period", cfg.difftest.clock_period);
        r.get("max_attempts", cfg.difftest.max_attempts);
        r.finish();
    }
    top.finish();

    auto v = violations(cfg);
    errors.insert(errors.end(), v.begin(), v.end());
    throw_if(errors);
    return cfg;
}

engine::RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::ConfigParseError, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json doc = json::object();
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw Error(Errc::ConfigParseError, path.string() + ": " + e.what());
        }
    }
    return config_from_json(doc, fs::absolute(path).parent_path());
}

json config_to_json(const engine::RunConfig& cfg)
{
    json provider{{"kind", cfg.provider.kind}};
    if (cfg.provider.kind == "scripted") {
        provider["fixtures"] = cfg.provider.fixtures.string();
    } else {
        provider["base_url"] = cfg.provider.base_url;
        provider["model"] = cfg.provider.model;
        provider["api_key_env"] = cfg.provider.api_key_env;
        provider["timeout_s"] = cfg.provider.timeout_s;
    }
    json tools{{"sim", {{"compile", cfg.tools.sim.compile.command},
                        {"run", cfg.tools.sim.run.command},
                        {"timeout_s", cfg.tools.sim.run.timeout_s}}},
               {"synth", {{"command", cfg.tools.synth.command}, {"timeout_s", cfg.tools.synth.timeout_s}}}};
    if (!cfg.tools.liberty.empty())
        tools["liberty"] = cfg.tools.liberty;
    json j{{"population_size", cfg.population_size},
           {"offspring_per_generation", cfg.offspring_per_generation},
           {"generations", cfg.generations},
           {"repair_attempts", cfg.repair_attempts},
           {"ucb_c", cfg.ucb_c},
           {"seed", cfg.seed},
           {"call_budget", cfg.call_budget ? json(*cfg.call_budget) : json(nullptr)},
           {"workers", cfg.workers},
           {"temperature", cfg.temperature},
           {"max_tokens", cfg.max_tokens},
           {"provider", provider},
           {"tools", tools},
           {"difftest", {{"max_vectors", cfg.difftest.max_vectors},
                         {"max_cycles", cfg.difftest.max_cycles},
                         {"clock_period", cfg.difftest.clock_period},
                         {"max_attempts", cfg.difftest.max_attempts}}}};
    if (!cfg.prompt_dir.empty())
        j["prompt_dir"] = cfg.prompt_dir.string();
    return j;
}

void validate(const engine::RunConfig& cfg) { throw_if(violations(cfg)); }

std::unique_ptr<provider::Provider> make_provider(const engine::ProviderSettings& settings)
{
    if (settings.kind == "scripted")
        return provider::ScriptedProvider::load(settings.fixtures);
    if (settings.kind == "remote") {
        provider::RemoteSettings rs;
        rs.base_url = settings.base_url;
        rs.model = settings.model;
        rs.api_key_env = settings.api_key_env;
        rs.timeout_s = settings.timeout_s;
        return std::make_unique<provider::RemoteProvider>(rs);
    }
    throw Error(Errc::ConfigInvalid, "unknown provider kind '" + settings.kind + "'");
}

}  // namespace poet::config
