#include "poet/operators.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#ifndef POET_ASSET_DIR
#define POET_ASSET_DIR "assets"
#endif

namespace poet {

std::string_view to_string(OperatorId op)
{
    switch (op) {
    case OperatorId::Improve: return "Improve";
    case OperatorId::Refactor: return "Refactor";
    case OperatorId::Explore: return "Explore";
    case OperatorId::Simplify: return "Simplify";
    case OperatorId::Fusion: return "Fusion";
    case OperatorId::Crossover: return "Crossover";
    }
    return "?";
}

std::optional<OperatorId> operator_from_string(std::string_view name)
{
    for (OperatorId op : kAllOperators)
        if (to_string(op) == name)
            return op;
    return std::nullopt;
}

std::string_view to_string(InitStrategy s)
{
    switch (s) {
    case InitStrategy::PowerFocused: return "PowerFocused";
    case InitStrategy::AreaFocused: return "AreaFocused";
    case InitStrategy::TimingFocused: return "TimingFocused";
    case InitStrategy::Balanced: return "Balanced";
    case InitStrategy::ArchitecturalExploration: return "ArchitecturalExploration";
    case InitStrategy::Simplification: return "Simplification";
    }
    return "?";
}

}  // namespace poet

namespace poet::ops {

namespace {

std::string template_name(InitStrategy s)
{
    switch (s) {
    case InitStrategy::PowerFocused: return "init_power_focused";
    case InitStrategy::AreaFocused: return "init_area_focused";
    case InitStrategy::TimingFocused: return "init_timing_focused";
    case InitStrategy::Balanced: return "init_balanced";
    case InitStrategy::ArchitecturalExploration: return "init_architectural_exploration";
    case InitStrategy::Simplification: return "init_simplification";
    }
    return {};
}

std::string template_name(OperatorId op)
{
    std::string name = "op_";
    for (char c : to_string(op))
        name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return name;
}

std::map<std::string, std::string> common_vars(const Design& d)
{
    return {
        {"module_name", d.module_name},
        {"source", d.source},
        {"interface", render_interface(d.interface)},
    };
}

/// Which parent is better on `metric`; ties fall through the power-first chain.
bool first_superior(const Individual& a, const Individual& b, Metric metric)
{
    auto pick = [metric](const PpaMetrics& m) {
        switch (metric) {
        case Metric::Power: return m.power;
        case Metric::Area: return m.area;
        case Metric::Delay: return m.delay;
        }
        return m.power;
    };
    const double va = pick(a.metrics);
    const double vb = pick(b.metrics);
    if (!approx_equal(va, vb))
        return va < vb;
    const std::array<double, 3> ca{a.metrics.power, a.metrics.area, a.metrics.delay};
    const std::array<double, 3> cb{b.metrics.power, b.metrics.area, b.metrics.delay};
    for (std::size_t i = 0; i < 3; ++i)
        if (!approx_equal(ca[i], cb[i]))
            return ca[i] < cb[i];
    return a.id < b.id;
}

}  // namespace

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir))
        throw Error(Errc::TemplateError, "prompt directory not found: " + dir.string());
    PromptLibrary lib;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt")
            continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        lib.add(entry.path().stem().string(), ss.str());
    }
    return lib;
}

std::filesystem::path PromptLibrary::default_dir()
{
    if (const char* env = std::getenv("POET_PROMPT_DIR"); env && *env)
        return env;
    return std::filesystem::path(POET_ASSET_DIR) / "prompts";
}

void PromptLibrary::add(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }

bool PromptLibrary::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const std::string& PromptLibrary::raw(std::string_view name) const
{
    auto it = templates_.find(name);
    if (it == templates_.end())
        throw Error(Errc::TemplateError, "missing prompt template '" + std::string(name) + "'");
    return it->second;
}

std::string PromptLibrary::render(std::string_view name, const std::map<std::string, std::string>& vars) const
{
    const std::string& text = raw(name);
    std::string out;
    out.reserve(text.size() * 2);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos)
            throw Error(Errc::TemplateError, "unterminated placeholder in '" + std::string(name) + "'");
        out.append(text, pos, open - pos);
        std::string key = text.substr(open + 2, close - open - 2);
        auto it = vars.find(key);
        if (it == vars.end())
            throw Error(Errc::TemplateError,
                        "template '" + std::string(name) + "' references unbound '" + key + "'");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::string render_interface(std::span<const PortDecl> ports)
{
    std::string out;
    for (const auto& p : ports) {
        std::string range = p.width > 1 ? fmt::format(" [{}:0]", p.width - 1) : "";
        std::string tags;
        if (p.is_clock)
            tags = "  // clock";
        else if (p.is_reset)
            tags = "  // reset";
        out += fmt::format("  {}{} {}{}\n", to_string(p.direction), range, p.name, tags);
    }
    return out;
}

bool same_interface(std::span<const PortDecl> a, std::span<const PortDecl> b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || a[i].direction != b[i].direction || a[i].width != b[i].width)
            return false;
    }
    return true;
}

Metric weakest_metric(const MetricDelta& delta)
{
    Metric worst = Metric::Power;
    double value = delta.d_power;
    if (delta.d_area > value && !approx_equal(delta.d_area, value)) {
        worst = Metric::Area;
        value = delta.d_area;
    }
    if (delta.d_delay > value && !approx_equal(delta.d_delay, value))
        worst = Metric::Delay;
    return worst;
}

PromptBundle build_init_prompt(const PromptLibrary& lib, const Design& orig, InitStrategy strategy)
{
    PromptBundle b;
    b.system_text = lib.raw("system");
    b.user_text = lib.render(template_name(strategy), common_vars(orig));
    b.kind = "init:" + std::string(to_string(strategy));
    return b;
}

PromptBundle build_mutation_prompt(const PromptLibrary& lib, OperatorId op, const Design& parent,
                                   const MetricDelta& delta, Metric weakest, std::string_view parent_id)
{
    if (arity(op) != 1)
        throw Error(Errc::WrongArity, std::string(to_string(op)) + " takes two parents");

    auto vars = common_vars(parent);
    vars["delta"] = render_delta(delta);
    if (op == OperatorId::Improve) {
        std::vector<Metric> order{weakest};
        for (Metric m : {Metric::Power, Metric::Area, Metric::Delay})
            if (m != weakest)
                order.push_back(m);
        std::string catalog;
        for (std::size_t i = 0; i < order.size(); ++i) {
            std::string section = "improve_" + std::string(to_string(order[i]));
            catalog += fmt::format("{}. {}{}\n{}\n", i + 1, to_string(order[i]),
                                   i == 0 ? " (primary target)" : " (secondary)", lib.raw(section));
        }
        vars["weakest"] = std::string(to_string(weakest));
        vars["technique_catalog"] = catalog;
    }

    PromptBundle b;
    b.system_text = lib.raw("system");
    b.user_text = lib.render(template_name(op), vars);
    b.kind = "op:" + std::string(to_string(op));
    if (!parent_id.empty())
        b.context_refs.emplace_back(parent_id);
    return b;
}

PromptBundle build_crossover_prompt(const PromptLibrary& lib, const Individual& p1, const Individual& p2,
                                    const MetricDelta& d1, const MetricDelta& d2)
{
    if (p1.id == p2.id)
        throw Error(Errc::IdenticalParents, "crossover needs two distinct parents, got '" + p1.id + "' twice");

    auto owner = [&](Metric m) { return first_superior(p1, p2, m) ? std::string("A") : std::string("B"); };
    const std::string power_owner = owner(Metric::Power);
    const std::string area_owner = owner(Metric::Area);
    const std::string delay_owner = owner(Metric::Delay);

    std::string conflict;
    if (power_owner == area_owner && area_owner == delay_owner) {
        conflict = fmt::format(
            "Parent {} is superior on every metric. Use it as the base and borrow from the other parent only "
            "where it does not cost power, area, or delay.",
            power_owner);
    } else {
        conflict =
            "The inherited techniques come from different parents and may conflict (for example, gating a "
            "register that the other parent restructured for timing). Name every conflict you notice in a "
            "Verilog comment and resolve it in favor of power.";
    }

    std::map<std::string, std::string> vars{
        {"module_name", p1.design.module_name},
        {"interface", render_interface(p1.design.interface)},
        {"id_a", p1.id},
        {"id_b", p2.id},
        {"source_a", p1.design.source},
        {"source_b", p2.design.source},
        {"delta_a", render_delta(d1)},
        {"delta_b", render_delta(d2)},
        {"power_parent", power_owner},
        {"area_parent", area_owner},
        {"delay_parent", delay_owner},
        {"conflict_note", conflict},
    };

    PromptBundle b;
    b.system_text = lib.raw("system");
    b.user_text = lib.render("op_crossover", vars);
    b.kind = "op:Crossover";
    b.context_refs = {p1.id, p2.id};
    return b;
}

PromptBundle build_repair_prompt(const PromptLibrary& lib, const Design& candidate, std::string_view error_log)
{
    if (error_log.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw Error(Errc::PreconditionViolated, "repair requires a non-empty error log");
    std::string_view tail = error_log;
    if (tail.size() > kRepairLogLimit)
        tail = tail.substr(tail.size() - kRepairLogLimit);

    auto vars = common_vars(candidate);
    vars["error_log"] = std::string(tail);
    PromptBundle b;
    b.system_text = lib.raw("system");
    b.user_text = lib.render("repair", vars);
    b.kind = "repair";
    return b;
}

std::string extract_rtl(std::string_view response, std::string_view expected_module)
{
    static const std::regex module_re(R"(\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)\s*(#|\(|;))");
    static const std::regex endmodule_re(R"(\bendmodule\b)");

    const std::string text(response);
    std::vector<std::string> seen_names;

    auto defines_expected = [&](const std::string& chunk) {
        for (auto it = std::sregex_iterator(chunk.begin(), chunk.end(), module_re); it != std::sregex_iterator();
             ++it) {
            seen_names.push_back((*it)[1].str());
            if ((*it)[1].str() == expected_module)
                return true;
        }
        return false;
    };

    // Fenced blocks first.
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("```", pos);
        if (open == std::string::npos)
            break;
        auto line_end = text.find('\n', open);
        if (line_end == std::string::npos)
            break;
        auto close = text.find("```", line_end + 1);
        if (close == std::string::npos)
            close = text.size();
        std::string body = text.substr(line_end + 1, close - line_end - 1);
        if (defines_expected(body)) {
            while (!body.empty() && (body.back() == '\n' || body.back() == ' ' || body.back() == '\r'))
                body.pop_back();
            return body + "\n";
        }
        pos = close == text.size() ? close : close + 3;
    }

    // Unfenced: every module ... endmodule span.
    std::string spans;
    bool found_expected = false;
    pos = 0;
    std::smatch m;
    while (pos < text.size()) {
        auto begin = text.cbegin() + static_cast<std::ptrdiff_t>(pos);
        if (!std::regex_search(begin, text.cend(), m, module_re))
            break;
        std::size_t start = pos + static_cast<std::size_t>(m.position(0));
        if (m[1].str() == expected_module)
            found_expected = true;
        seen_names.push_back(m[1].str());
        std::smatch e;
        auto after = text.cbegin() + static_cast<std::ptrdiff_t>(start);
        if (!std::regex_search(after, text.cend(), e, endmodule_re))
            break;
        std::size_t stop = start + static_cast<std::size_t>(e.position(0) + e.length(0));
        spans += text.substr(start, stop - start) + "\n";
        pos = stop;
    }
    if (found_expected)
        return spans;
    if (!seen_names.empty())
        throw Error(Errc::WrongModuleName, "response defines '" + seen_names.front() + "' instead of '" +
                                               std::string(expected_module) + "'");
    throw Error(Errc::NoModuleFound, "response contains no Verilog module");
}

}  // namespace poet::ops
