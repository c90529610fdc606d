// Acceptance checks, one line per criterion. Exit status is non-zero when any criterion fails;
// a gated criterion whose tools are absent reports SKIP.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "poet/bandit.hpp"
#include "poet/commands.hpp"
#include "poet/difftest.hpp"
#include "poet/error.hpp"
#include "poet/journal.hpp"
#include "poet/provider.hpp"
#include "poet/selection.hpp"
#include "support.hpp"

using namespace poet;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool skipped = false;
};

Individual ind(const std::string& id, double p, double a, double d)
{
    Individual i;
    i.id = id;
    i.metrics = PpaMetrics::make(p, a, d);
    return i;
}

std::set<std::string> id_set(const std::vector<Individual>& v)
{
    std::set<std::string> s;
    for (const auto& i : v)
        s.insert(i.id);
    return s;
}

std::vector<std::set<std::size_t>> peel(const std::vector<PpaMetrics>& pts)
{
    std::vector<std::set<std::size_t>> levels;
    std::set<std::size_t> remaining;
    for (std::size_t i = 0; i < pts.size(); ++i)
        remaining.insert(i);
    while (!remaining.empty()) {
        std::set<std::size_t> level;
        for (std::size_t i : remaining) {
            bool dominated = false;
            for (std::size_t j : remaining)
                if (j != i && dominates(pts[j], pts[i]))
                    dominated = true;
            if (!dominated)
                level.insert(i);
        }
        for (std::size_t i : level)
            remaining.erase(i);
        levels.push_back(level);
    }
    return levels;
}

Outcome criterion1()
{
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_int_distribution<int> size(1, 50);
    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < 1000; ++t) {
        std::vector<Individual> pool;
        std::vector<PpaMetrics> pts;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) {
            auto draw = [&] {
                double v = 0;
                while (v <= 0)
                    v = 100.0 - u(rng);  // (0, 100]
                return v;
            };
            pool.push_back(ind("p" + std::to_string(i), draw(), draw(), draw()));
            pts.push_back(pool.back().metrics);
        }
        const auto levels = selection::non_dominated_sort(pool);
        const auto oracle = peel(pts);
        if (levels.levels.size() != oracle.size())
            return {false, fmt::format("pool {}: {} levels vs {}", t, levels.levels.size(), oracle.size())};
        for (std::size_t k = 0; k < oracle.size(); ++k) {
            std::set<std::size_t> got;
            for (const auto& m : levels.levels[k])
                got.insert(std::stoul(m.id.substr(1)));
            if (got != oracle[k])
                return {false, fmt::format("pool {} level {} differs", t, k + 1)};
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {secs < 10.0, fmt::format("1000 pools match brute-force peeling in {:.2f} s", secs)};
}

/// Reference NSGA-II survivor fill: whole fronts in order, the last one truncated by crowding distance.
std::vector<Individual> nsga2_fill(const std::vector<Individual>& pool, std::size_t n)
{
    const auto levels = selection::non_dominated_sort(pool).levels;
    std::vector<Individual> out;
    for (const auto& level : levels) {
        if (out.size() + level.size() <= n) {
            out.insert(out.end(), level.begin(), level.end());
            continue;
        }
        std::vector<double> dist(level.size(), 0.0);
        for (int m = 0; m < 3; ++m) {
            auto get = [m](const Individual& i) {
                return m == 0 ? i.metrics.power : (m == 1 ? i.metrics.area : i.metrics.delay);
            };
            std::vector<std::size_t> order(level.size());
            for (std::size_t i = 0; i < order.size(); ++i)
                order[i] = i;
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return get(level[a]) < get(level[b]); });
            const double span = get(level[order.back()]) - get(level[order.front()]);
            dist[order.front()] = dist[order.back()] = std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i + 1 < order.size(); ++i)
                if (span > 0)
                    dist[order[i]] += (get(level[order[i + 1]]) - get(level[order[i - 1]])) / span;
        }
        std::vector<std::size_t> order(level.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] > dist[b]; });
        for (std::size_t i = 0; out.size() < n; ++i)
            out.push_back(level[order[i]]);
        break;
    }
    return out;
}

Outcome criterion2()
{
    const std::vector<Individual> pool{ind("A", 1, 1, 1), ind("B", 2, 2, 2), ind("C", 1.5, 0.5, 3),
                                       ind("D", 3, 3, 3)};
    const auto ours = id_set(selection::select_survivors(pool, 2).members);
    const auto ref = id_set(nsga2_fill(pool, 2));
    const bool ok = ours == std::set<std::string>{"A", "B"} && ref == std::set<std::string>{"A", "C"};
    return {ok, fmt::format("proportional {{{}}}, sequential fill {{{}}}", fmt::join(ours, ","), fmt::join(ref, ","))};
}

Outcome criterion3()
{
    const auto a = selection::allocate_quotas(10, 3).quotas;
    const auto b = selection::allocate_quotas(2, 5).quotas;
    const bool ok = a == std::vector<int>{5, 3, 1} && b == std::vector<int>{1, 1, 1, 1, 1};
    return {ok, fmt::format("({}) and ({})", fmt::join(a, ","), fmt::join(b, ","))};
}

Outcome criterion4()
{
    // 3/5 + 1.414 * sqrt(ln 20 / 5), evaluated separately at 40 significant digits.
    constexpr double kExpected = 1.6945003540259597;
    bandit::OperatorStats s;
    s.reward[0] = 3;
    s.count[0] = 5;
    s.total = 20;
    const double got = bandit::ucb_score(s, OperatorId::Improve);
    bool ok = std::abs(got - kExpected) <= 1e-9;

    // Cold start: the first six selections visit every operator once.
    bandit::OperatorStats fresh;
    std::set<OperatorId> seen;
    for (int i = 0; i < 6; ++i) {
        const OperatorId op = bandit::select_operator(fresh);
        if (seen.count(op))
            ok = false;
        seen.insert(op);
        bandit::record_outcome(fresh, op, i % 2 ? std::optional<double>(1.0) : std::nullopt, 2.0);
    }
    ok = ok && seen.size() == 6;
    return {ok, fmt::format("ucb = {:.16f}, cold start covered {} operators", got, seen.size())};
}

Outcome criterion5()
{
    // Rows as (power, area, delay).
    const auto orig_adder = PpaMetrics::make(393.0, 458.05, 1.15);
    const auto revo_adder = PpaMetrics::make(363.0, 409.37, 1.26);
    const auto poet_adder = PpaMetrics::make(195.0, 272.65, 1.03);
    const auto orig_sel = PpaMetrics::make(305.0, 432.25, 1.14);
    const auto revo_sel = PpaMetrics::make(249.0, 318.40, 1.08);
    const bool a = dominates(poet_adder, orig_adder);
    const bool b = dominates(poet_adder, revo_adder);
    const bool c = dominates(revo_sel, orig_sel);
    const bool d = !dominates(orig_adder, poet_adder) && !dominates(orig_sel, revo_sel);
    return {a && b && c && d, fmt::format("adder: vs original {}, vs REvolution {}; adder_select REvolution vs original {}",
                                          a, b, c)};
}

tooling::SimResult simulate(const std::string& design, const std::string& tb, const fs::path& dir)
{
    return tooling::run_sim(design, tb, test::vsim_tool(), dir);
}

Outcome criterion6()
{
    test::TempDir tmp("acc6");
    const auto lib = ops::PromptLibrary::load(ops::PromptLibrary::default_dir());
    int designs = 0, originals_ok = 0, mutants = 0, detected = 0;
    std::vector<std::string> misses;
    for (const auto& entry : fs::directory_iterator(test::fixtures() / "designs")) {
        if (!entry.is_directory())
            continue;
        const std::string name = entry.path().filename().string();
        ++designs;
        const Design orig = test::fixture_design(name);
        auto provider = provider::ScriptedProvider::load(entry.path() / "manifest.json");
        const fs::path work = tmp / name;
        const auto tb = difftest::generate_testbench(
            orig, lib, [&](const provider::GenerationRequest& r) { return provider->generate(r); },
            [&](const std::string& d, const std::string& t, const std::string& label) {
                return simulate(d, t, work / label);
            },
            {});
        if (simulate(orig.source, tb.checking_source, work / "orig").verdict == tooling::Verdict::Pass)
            ++originals_ok;
        else
            misses.push_back(name + " original");
        std::vector<fs::path> files;
        for (const auto& m : fs::directory_iterator(entry.path() / "mutants"))
            files.push_back(m.path());
        std::sort(files.begin(), files.end());
        for (const auto& m : files) {
            ++mutants;
            const auto r = simulate(test::read_file(m), tb.checking_source, work / ("mut-" + m.stem().string()));
            if (r.verdict == tooling::Verdict::Fail)
                ++detected;
            else
                misses.push_back(name + "/" + m.stem().string());
        }
    }
    const bool ok = designs >= 5 && originals_ok == designs && detected == mutants && mutants > 0;
    std::string detail = fmt::format("{} designs, originals pass {}/{}, mutants detected {}/{}", designs, originals_ok,
                                     designs, detected, mutants);
    if (!misses.empty())
        detail += fmt::format(" (missed: {})", fmt::join(misses, ", "));
    return {ok, detail};
}

const fs::path& e2e()
{
    static const fs::path p = test::fixtures() / "e2e/half_adder";
    return p;
}

/// Scripted end-to-end run shared by criteria 7 to 9.
struct E2eRun {
    test::TempDir dir{"acc-e2e"};
    int exit_code = -1;
    std::vector<json> events;

    explicit E2eRun(const std::string& sub)
    {
        cli::RunArgs a;
        a.config = e2e() / "config.json";
        a.design = e2e() / "design.v";
        a.out = dir / sub;
        a.normalize_time = true;
        std::ostringstream out, err;
        exit_code = cli::cmd_run(a, out, err);
        if (fs::exists(dir / sub / "journal.ndjson"))
            events = read_journal(dir / sub / "journal.ndjson").events;
    }
    std::vector<json> data(const std::string& kind) const
    {
        std::vector<json> out;
        for (const auto& e : events)
            if (e.at("kind") == kind)
                out.push_back(e.at("data"));
        return out;
    }
};

Outcome criterion7(const E2eRun& run)
{
    if (run.exit_code != 0)
        return {false, fmt::format("run exited {}", run.exit_code)};
    const fs::path root = run.dir / "a";
    const std::string checking = test::read_file(root / "testbench/checking_tb.v");
    test::TempDir tmp("acc7");

    // Re-verify every member of every checkpointed population independently.
    int checked = 0, failed = 0, gens = 0;
    std::vector<double> min_power;
    for (const auto& cp : run.data("checkpoint")) {
        ++gens;
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& m : cp.at("population")) {
            lo = std::min(lo, m.at("power").get<double>());
            const std::string src =
                m.at("id") == "orig" ? test::read_file(e2e() / "design.v") : m.at("source").get<std::string>();
            const auto r = simulate(src, checking, tmp / fmt::format("g{}-{}", cp.at("generation").get<int>(),
                                                                      m.at("id").get<std::string>()));
            ++checked;
            if (r.verdict != tooling::Verdict::Pass)
                ++failed;
        }
        min_power.push_back(lo);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < min_power.size(); ++i)
        if (definitely_less(min_power[i - 1], min_power[i]))
            monotone = false;

    const json pf = json::parse(test::read_file(root / "pareto_front.json"));
    const auto& o = pf.at("original");
    const auto m_orig = PpaMetrics::make(o.at("power"), o.at("area"), o.at("delay"));
    int dominated = 0;
    for (const auto& f : pf.at("front"))
        if (dominates(m_orig, PpaMetrics::make(f.at("power"), f.at("area"), f.at("delay"))))
            ++dominated;

    const bool ok = gens == 4 && failed == 0 && monotone && dominated == 0 && !pf.at("front").empty();
    return {ok, fmt::format("{} generations, {} members re-verified ({} failed), min power {}, front dominated by "
                            "original: {}",
                            gens - 1, checked, failed, fmt::join(min_power, " -> "), dominated)};
}

Outcome criterion8(const E2eRun& first)
{
    E2eRun second("b");
    if (first.exit_code != 0 || second.exit_code != 0)
        return {false, "run failed"};
    const std::string a = normalized_journal(first.dir / "a/journal.ndjson");
    const std::string b = normalized_journal(second.dir / "b/journal.ndjson");
    return {a == b && !a.empty(), fmt::format("normalized journals {} ({} bytes)", a == b ? "identical" : "differ",
                                               a.size())};
}

Outcome criterion9(const E2eRun& run)
{
    // Offspring 1 of generation 2 receives an incompatible design followed by three failing repairs.
    const std::string tag = "gen/2/offspring/1/";
    int verifies = 0, repairs = 0;
    for (const auto& v : run.data("verify_result"))
        if (v.at("tag").get<std::string>().rfind(tag, 0) == 0)
            ++verifies;
    for (const auto& r : run.data("repair"))
        if (r.at("tag").get<std::string>().rfind(tag, 0) == 0)
            ++repairs;
    std::string outcome = "missing";
    int recorded = -1;
    for (const auto& o : run.data("offspring"))
        if (o.at("generation") == 2 && o.at("offspring") == 1) {
            outcome = o.at("outcome");
            recorded = o.at("verifications");
        }
    const bool ok = outcome == "discarded" && verifies == 4 && recorded == 4 && repairs == 3;
    return {ok, fmt::format("outcome {}, {} verifications journaled, {} recorded, {} repairs", outcome, verifies,
                            recorded, repairs)};
}

bool on_path(const std::string& tool)
{
    return std::system(("command -v " + tool + " >/dev/null 2>&1").c_str()) == 0;
}

Outcome criterion10()
{
    std::vector<std::string> missing;
    for (const char* t : {"iverilog", "vvp", "yosys", "sta"})
        if (!on_path(t))
            missing.push_back(t);
    const char* liberty = std::getenv("POET_LIBERTY");
    if (!liberty || !fs::exists(liberty))
        missing.push_back("liberty file ($POET_LIBERTY)");
    if (!missing.empty())
        return {true, fmt::format("tools absent: {}", fmt::join(missing, ", ")), true};

    test::TempDir tmp("acc10");
    auto doc = json::parse(test::read_file(e2e() / "config.json"));
    doc["provider"]["fixtures"] = e2e().string();
    doc["tools"] = {{"liberty", liberty}};  // installed simulator and synthesis stack
    test::write_file(tmp / "config.json", doc.dump(2));
    cli::RunArgs a;
    a.config = tmp / "config.json";
    a.design = e2e() / "design.v";
    a.out = tmp / "run";
    std::ostringstream out, err;
    const int rc = cli::cmd_run(a, out, err);
    if (rc != 0)
        return {false, fmt::format("poet run exited {}: {}", rc, err.str())};
    const json pf = json::parse(test::read_file(tmp / "run/pareto_front.json"));
    const auto& o = pf.at("original");
    const auto m_orig = PpaMetrics::make(o.at("power"), o.at("area"), o.at("delay"));
    bool positive = true, undominated = true;
    for (const auto& f : pf.at("front")) {
        for (const char* k : {"power", "area", "delay"})
            positive = positive && std::isfinite(f.at(k).get<double>()) && f.at(k).get<double>() > 0;
        if (dominates(m_orig, PpaMetrics::make(f.at("power"), f.at("area"), f.at("delay"))))
            undominated = false;
    }
    return {positive && undominated, fmt::format("front of {}, positive {}, undominated {}", pf.at("front").size(),
                                                 positive, undominated)};
}

}  // namespace

int main()
{
    int failures = 0;
    auto report = [&](int n, const std::string& title, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
        if (!o.pass)
            ++failures;
        std::cout << fmt::format("criterion {:>2} {} {}: {}", n, verdict, title, o.detail) << std::endl;
    };

    report(1, "selection oracle equivalence", criterion1);
    report(2, "worked selection trace", criterion2);
    report(3, "quota formula", criterion3);
    report(4, "UCB values and cold start", criterion4);
    report(5, "dominance on published adder rows", criterion5);
    report(6, "differential-testing soundness and sensitivity", criterion6);
    const E2eRun run("a");
    report(7, "all-correct invariant and power monotonicity", [&] { return criterion7(run); });
    report(8, "determinism", [&] { return criterion8(run); });
    report(9, "repair-loop bound", [&] { return criterion9(run); });
    report(10, "real-tool integration (gated)", criterion10);
    return failures == 0 ? 0 : 1;
}
