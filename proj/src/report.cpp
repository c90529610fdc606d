#include "poet/report.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace poet::report {

using nlohmann::json;

namespace {

struct Metrics {
    double power, area, delay;
};

struct GenData {
    std::vector<Metrics> members;
    bool have_population = false;
    int accepted = 0, discarded = 0, duplicates = 0;
    std::map<std::string, OperatorRow> ops;
    std::map<std::string, long> reasons;
};

std::optional<Metrics> metrics_of(const json& j)
{
    const json& m = j.contains("metrics") ? j["metrics"] : j;
    if (!m.is_object() || !m.contains("power") || !m.contains("area") || !m.contains("delay"))
        return std::nullopt;
    if (!m["power"].is_number() || !m["area"].is_number() || !m["delay"].is_number())
        return std::nullopt;
    return Metrics{m["power"].get<double>(), m["area"].get<double>(), m["delay"].get<double>()};
}

void count_outcome(GenData& g, const json& d)
{
    const std::string outcome = d.value("outcome", "");
    if (outcome == "accepted")
        ++g.accepted;
    else if (outcome == "duplicate")
        ++g.duplicates;
    else if (outcome == "discarded" || outcome == "exhausted") {
        ++g.discarded;
        std::string reason = outcome == "exhausted" ? "provider_exhausted" : "other";
        if (outcome == "discarded" && d.contains("reasons") && d["reasons"].is_array() && !d["reasons"].empty() &&
            d["reasons"].back().is_string())
            reason = classify_reason(d["reasons"].back().get<std::string>());
        ++g.reasons[reason];
    }
}

}  // namespace

std::string classify_reason(const std::string& reason)
{
    auto has = [&](std::string_view s) { return reason.find(s) != std::string::npos; };
    if (has("synthesis failed") || has("SynthesisFailed") || has("ReportParseError"))
        return "synthesis_failed";
    if (has("no usable RTL"))
        return "no_rtl";
    if (has("port list changed") || has("interface could not be read"))
        return "interface_changed";
    if (has("compilation failed") || has("compile failed") || has("compile timed out"))
        return "compile_error";
    if (has("timed out"))
        return "timeout";
    if (has("FAIL errors="))
        return "functional_mismatch";
    if (has("TransportError") || has("AuthError"))
        return "provider_error";
    if (has("ProviderExhausted") || has("FixtureExhausted"))
        return "provider_exhausted";
    if (has("simulator exited") || has("no POET_RESULT"))
        return "simulation_error";
    return "other";
}

Report build_report(const std::vector<json>& events)
{
    Report rep;
    std::map<int, GenData> gens;
    std::optional<Metrics> orig;
    std::vector<Metrics> seeds;

    for (const auto& e : events) {
        const std::string kind = e.value("kind", "");
        const json& d = e.contains("data") ? e["data"] : json::object();
        if (!d.is_object())
            continue;
        if (kind == "resume") {
            const int from = d.value("from_generation", 0);
            for (auto it = gens.begin(); it != gens.end();)
                it = it->first > from ? gens.erase(it) : std::next(it);
            rep.summary.reset();
        } else if (kind == "synth_result" && d.value("id", "") == "orig") {
            orig = metrics_of(d);
        } else if (kind == "seed") {
            GenData& g = gens[0];
            count_outcome(g, d);
            if (d.value("outcome", "") == "accepted")
                if (auto m = metrics_of(d))
                    seeds.push_back(*m);
        } else if (kind == "offspring") {
            GenData& g = gens[d.value("generation", 0)];
            count_outcome(g, d);
            const std::string op = d.value("operator", "?");
            ++g.ops[op].selected;
            if (d.value("reward", 0) > 0)
                ++g.ops[op].rewarded;
        } else if (kind == "selection") {
            GenData& g = gens[d.value("generation", 0)];
            g.members.clear();
            if (d.contains("population") && d["population"].is_array())
                for (const auto& m : d["population"])
                    if (auto mm = metrics_of(m))
                        g.members.push_back(*mm);
            g.have_population = true;
        } else if (kind == "checkpoint" && d.value("generation", -1) == 0) {
            GenData& g = gens[0];
            g.members.clear();
            if (d.contains("population") && d["population"].is_array())
                for (const auto& m : d["population"])
                    if (auto mm = metrics_of(m))
                        g.members.push_back(*mm);
            g.have_population = true;
        } else if (kind == "run_summary") {
            rep.summary = d;
        }
    }

    if (gens.count(0) || orig) {
        GenData& g0 = gens[0];
        if (!g0.have_population) {
            if (orig)
                g0.members.push_back(*orig);
            g0.members.insert(g0.members.end(), seeds.begin(), seeds.end());
            g0.have_population = !g0.members.empty();
        }
    }

    for (const auto& [t, g] : gens) {
        for (const auto& [op, row] : g.ops) {
            rep.operators[op].selected += row.selected;
            rep.operators[op].rewarded += row.rewarded;
        }
        for (const auto& [r, n] : g.reasons)
            rep.discard_reasons[r] += n;
        if (!g.have_population || g.members.empty()) {
            if (t > 0)
                rep.warnings.push_back(fmt::format("generation {} has no selection record (incomplete)", t));
            continue;
        }
        GenerationRow row;
        row.generation = t;
        row.members = static_cast<int>(g.members.size());
        row.best_power = row.best_area = row.best_delay = std::numeric_limits<double>::infinity();
        for (const auto& m : g.members) {
            row.best_power = std::min(row.best_power, m.power);
            row.best_area = std::min(row.best_area, m.area);
            row.best_delay = std::min(row.best_delay, m.delay);
            row.mean_power += m.power;
            row.mean_area += m.area;
            row.mean_delay += m.delay;
        }
        row.mean_power /= row.members;
        row.mean_area /= row.members;
        row.mean_delay /= row.members;
        row.accepted = g.accepted;
        row.discarded = g.discarded;
        row.duplicates = g.duplicates;
        rep.generations.push_back(row);
    }
    return rep;
}

std::string render_text(const Report& r)
{
    std::string out;
    out += fmt::format("generations recorded: {}\n\n", r.generations.size());
    out += fmt::format("{:>4} {:>7} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10} {:>4} {:>4} {:>4}\n", "gen", "members",
                       "best_power", "mean_power", "best_area", "mean_area", "best_cpd", "mean_cpd", "acc", "dis",
                       "dup");
    for (const auto& g : r.generations)
        out += fmt::format("{:>4} {:>7} {:>12.4f} {:>12.4f} {:>12.4f} {:>12.4f} {:>10.4f} {:>10.4f} {:>4} {:>4} {:>4}\n",
                           g.generation, g.members, g.best_power, g.mean_power, g.best_area, g.mean_area,
                           g.best_delay, g.mean_delay, g.accepted, g.discarded, g.duplicates);
    out += "\noperators:\n";
    if (r.operators.empty())
        out += "  (none selected)\n";
    for (const auto& [op, row] : r.operators)
        out += fmt::format("  {:<10} selected {:>4}  rewarded {:>4}  rate {:.3f}\n", op, row.selected, row.rewarded,
                           row.selected ? static_cast<double>(row.rewarded) / row.selected : 0.0);
    out += "\ndiscard reasons:\n";
    if (r.discard_reasons.empty())
        out += "  (none)\n";
    for (const auto& [reason, n] : r.discard_reasons)
        out += fmt::format("  {:<22} {}\n", reason, n);
    if (r.summary) {
        const json& s = *r.summary;
        out += fmt::format("\nstatus: {}\n", s.value("status", "?"));
        if (s.contains("totals") && s["totals"].is_object())
            for (const auto& [k, v] : s["totals"].items())
                out += fmt::format("  {:<16} {}\n", k, v.dump());
    } else {
        out += "\nstatus: no run_summary (run incomplete)\n";
    }
    for (const auto& w : r.warnings)
        out += "warning: " + w + "\n";
    return out;
}

std::string render_csv(const Report& r)
{
    std::string out =
        "generation,members,best_power,mean_power,best_area,mean_area,best_delay,mean_delay,accepted,discarded,"
        "duplicates\n";
    for (const auto& g : r.generations)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", g.generation, g.members, g.best_power, g.mean_power,
                           g.best_area, g.mean_area, g.best_delay, g.mean_delay, g.accepted, g.discarded,
                           g.duplicates);
    return out;
}

}  // namespace poet::report
