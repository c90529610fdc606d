#include <doctest.h>

#include <sstream>

#include "poet/commands.hpp"
#include "poet/config.hpp"
#include "poet/engine.hpp"
#include "poet/error.hpp"
#include "poet/selection.hpp"
#include "support.hpp"

using namespace poet;
using json = nlohmann::json;
namespace fs = std::filesystem;
using Entry = provider::ScriptedProvider::Entry;

namespace {

const fs::path& e2e()
{
    static const fs::path p = test::fixtures() / "e2e/half_adder";
    return p;
}

std::string fenced(const std::string& rtl) { return "Here it is.\n\n```verilog\n" + rtl + "```\n"; }

const std::string kCorrect = test::read_file(e2e() / "design.v");

std::string and_mutant()
{
    std::string s = kCorrect;
    s.replace(s.find("a ^ b"), 5, "a & b");
    return s;
}

std::vector<Entry> testbench_entries()
{
    return {{"spec/*", test::read_file(e2e() / "spec.txt"), "spec.txt"},
            {"vectors/*", test::read_file(e2e() / "vectors.txt"), "vectors.txt"}};
}

/// Engine over the end-to-end half-adder config with caller-supplied provider entries.
struct Harness {
    test::TempDir dir{"engine"};
    engine::RunConfig cfg;
    std::unique_ptr<provider::ScriptedProvider> provider;
    ops::PromptLibrary prompts = ops::PromptLibrary::load(ops::PromptLibrary::default_dir());
    Journal journal;
    std::unique_ptr<engine::Engine> eng;

    explicit Harness(std::vector<Entry> extra, const std::function<void(engine::RunConfig&)>& tweak = {})
    {
        cfg = config::load_config(e2e() / "config.json");
        if (tweak)
            tweak(cfg);
        auto entries = testbench_entries();
        entries.insert(entries.end(), extra.begin(), extra.end());
        provider = std::make_unique<provider::ScriptedProvider>(std::move(entries));
        eng = std::make_unique<engine::Engine>(cfg, Design::from_source(kCorrect, "half_adder"), *provider, prompts,
                                               journal, dir.path());
    }

    std::vector<json> of_kind(const std::string& kind) const
    {
        std::vector<json> out;
        for (const auto& e : journal.events())
            if (e.at("kind") == kind)
                out.push_back(e.at("data"));
        return out;
    }
};

std::size_t count_kind(const std::vector<std::pair<std::string, json>>& events, const std::string& kind)
{
    return std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.first == kind; });
}

}  // namespace

TEST_CASE("evaluate_with_repair: a correct candidate needs one verification")
{
    Harness h({});
    h.eng->build_testbench();
    std::vector<std::pair<std::string, json>> events;
    const auto ev = h.eng->evaluate_with_repair(fenced(kCorrect), "t/0", h.dir / "w0", events);
    REQUIRE(ev.design.has_value());
    CHECK(ev.verifications == 1);
    CHECK(ev.repairs == 0);
    CHECK(ev.reasons.empty());
}

TEST_CASE("evaluate_with_repair: one failed verification then a successful repair")
{
    Harness h({{"t/1/repair/*", fenced(kCorrect), "fix"}});
    h.eng->build_testbench();
    std::vector<std::pair<std::string, json>> events;
    const auto ev = h.eng->evaluate_with_repair(fenced(and_mutant()), "t/1", h.dir / "w1", events);
    REQUIRE(ev.design.has_value());
    CHECK(ev.verifications == 2);
    CHECK(ev.repairs == 1);
    CHECK(ev.reasons.size() == 1);
    CHECK(count_kind(events, "repair") == 1);
}

TEST_CASE("evaluate_with_repair: R failed repairs discard after R+1 verifications")
{
    Harness h({{"t/2/repair/*", fenced(and_mutant()), "r1"},
               {"t/2/repair/*", fenced(and_mutant()), "r2"},
               {"t/2/repair/*", fenced(and_mutant()), "r3"},
               {"t/2/repair/*", fenced(kCorrect), "never served"}});
    h.eng->build_testbench();
    std::vector<std::pair<std::string, json>> events;
    const auto ev = h.eng->evaluate_with_repair(fenced(and_mutant()), "t/2", h.dir / "w2", events);
    CHECK_FALSE(ev.design.has_value());
    CHECK(ev.verifications == h.cfg.repair_attempts + 1);
    CHECK(ev.verifications == 4);
    CHECK(ev.repairs == 3);
    CHECK(ev.reasons.size() == 4);
    CHECK(count_kind(events, "verify_result") == 4);
    CHECK(h.provider->remaining() == 1);
}

TEST_CASE("evaluate_with_repair: responses without RTL and interface changes count as failures")
{
    Harness h({{"t/3/repair/*", fenced(kCorrect), "fix"}});
    h.eng->build_testbench();
    std::vector<std::pair<std::string, json>> events;
    const auto ev = h.eng->evaluate_with_repair("I could not improve this design.", "t/3", h.dir / "w3", events);
    REQUIRE(ev.design.has_value());
    CHECK(ev.verifications == 2);
    CHECK(ev.repairs == 1);
}

TEST_CASE("duplicates are dropped yet still rewarded")
{
    Harness h({{"seed/1/*", test::read_file(e2e() / "seed1.txt"), "s1"},
               {"seed/2/*", test::read_file(e2e() / "seed1.txt"), "s2"}},
              [](engine::RunConfig& c) { c.generations = 0; });
    const auto r = h.eng->run();
    const auto seeds = h.of_kind("seed");
    REQUIRE(seeds.size() == 2);
    CHECK(seeds[0].at("outcome") == "accepted");
    CHECK(seeds[1].at("outcome") == "duplicate");
    CHECK(seeds[1].at("duplicate_of") == seeds[0].at("id"));
    CHECK(r.population.members.size() == 2);
    CHECK(r.totals.duplicates == 1);
}

TEST_CASE("duplicate offspring feed the bandit")
{
    const std::string s1 = test::read_file(e2e() / "seed1.txt");
    Harness h({{"seed/1/*", s1, "s1"},
               {"seed/2/*", test::read_file(e2e() / "seed2.txt"), "s2"},
               {"gen/1/offspring/0/*", s1, "dup"}},
              [](engine::RunConfig& c) {
                  c.generations = 1;
                  c.offspring_per_generation = 1;
              });
    h.eng->run();
    const auto off = h.of_kind("offspring");
    REQUIRE(off.size() == 1);
    CHECK(off[0].at("outcome") == "duplicate");
    CHECK(off[0].at("reward") == 1);  // seed1 is below the original's power
    const auto& st = h.eng->stats();
    CHECK(st.total == 1);
    double rewards = 0;
    for (double v : st.reward)
        rewards += v;
    CHECK(rewards == 1.0);
}

TEST_CASE("a generation where every offspring is discarded keeps the population")
{
    Harness h({{"seed/1/*", test::read_file(e2e() / "seed1.txt"), "s1"},
               {"seed/2/*", test::read_file(e2e() / "seed2.txt"), "s2"},
               {"gen/1/*", "No code this time.", "a"},
               {"gen/1/*", "No code this time.", "b"},
               {"gen/1/*", "No code this time.", "c"}},
              [](engine::RunConfig& c) {
                  c.generations = 1;
                  c.repair_attempts = 0;
              });
    const auto r = h.eng->run();
    CHECK(r.generations_completed == 1);
    CHECK(r.totals.discards == 3);
    const auto sel = h.of_kind("selection");
    REQUIRE(sel.size() == 1);
    std::set<std::string> before, after;
    for (const auto& c : h.of_kind("checkpoint")) {
        auto& target = c.at("generation") == 0 ? before : after;
        for (const auto& m : c.at("population"))
            target.insert(m.at("id").get<std::string>());
    }
    CHECK(before == after);
    for (double v : h.eng->stats().reward)
        CHECK(v == 0.0);
}

TEST_CASE("N=1 never selects Crossover")
{
    Harness h({{"gen/1/offspring/0/*", test::read_file(e2e() / "seed1.txt"), "o0"},
               {"gen/1/offspring/1/*", test::read_file(e2e() / "seed2.txt"), "o1"},
               {"gen/2/offspring/0/*", test::read_file(e2e() / "g3o0.txt"), "o2"},
               {"gen/2/offspring/1/*", test::read_file(e2e() / "g1o2.txt"), "o3"}},
              [](engine::RunConfig& c) {
                  c.population_size = 1;
                  c.offspring_per_generation = 2;
                  c.generations = 2;
              });
    const auto r = h.eng->run();
    CHECK(r.population.members.size() == 1);
    CHECK(h.of_kind("seed").empty());
    for (const auto& e : h.of_kind("operator_selected")) {
        CHECK(e.at("operator") != "Crossover");
        CHECK(e.at("parents").size() == 1);
    }
    CHECK(r.best_power.metrics.power == 6.0);  // g3o0; the 5 uW candidate breaks carry
}

TEST_CASE("a budget of one call stops early with the original in P0")
{
    Harness h({{"seed/1/*", test::read_file(e2e() / "seed1.txt"), "s1"},
               {"seed/2/*", test::read_file(e2e() / "seed2.txt"), "s2"}},
              [](engine::RunConfig& c) { c.call_budget = 1; });
    const auto r = h.eng->run();
    CHECK(r.early_stop);
    CHECK(r.totals.charged_calls <= 1);
    CHECK(r.generations_completed == 0);
    const bool has_orig = std::any_of(r.population.members.begin(), r.population.members.end(),
                                      [](const Individual& i) { return i.id == "orig"; });
    CHECK(has_orig);
    const auto summary = h.of_kind("run_summary");
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].at("status") == "early_stop");
}

TEST_CASE("budget exhaustion maps to exit code 3")
{
    test::TempDir dir("budget");
    cli::RunArgs a;
    a.config = e2e() / "config.json";
    a.design = e2e() / "design.v";
    a.out = dir / "run";
    a.budget = 1;
    std::ostringstream out, err;
    CHECK(cli::cmd_run(a, out, err) == cli::kExitBudget);
    CHECK(fs::exists(dir / "run/pareto_front.json"));
}

TEST_CASE("baseline synthesis failure is fatal")
{
    Harness h({}, [](engine::RunConfig& c) { c.tools.synth = {"false", 10.0}; });
    try {
        h.eng->run();
        FAIL("expected BaselineSynthesisFailed");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::BaselineSynthesisFailed);
    }
    const auto summary = h.of_kind("run_summary");
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].at("status") == "failed");
}

TEST_CASE("resume from a mid-run checkpoint reaches the uninterrupted result")
{
    test::TempDir dir("resume");
    std::ostringstream out, err;
    cli::RunArgs full;
    full.config = e2e() / "config.json";
    full.design = e2e() / "design.v";
    full.out = dir / "full";
    full.normalize_time = true;
    REQUIRE(cli::cmd_run(full, out, err) == cli::kExitOk);

    // Interrupt a second run right after its generation-1 checkpoint.
    cli::RunArgs part = full;
    part.out = dir / "part";
    REQUIRE(cli::cmd_run(part, out, err) == cli::kExitOk);
    const std::string text = test::read_file(dir / "part/journal.ndjson");
    std::istringstream lines(text);
    std::string kept, line;
    while (std::getline(lines, line)) {
        kept += line + "\n";
        const json e = json::parse(line);
        if (e.at("kind") == "checkpoint" && e.at("data").at("generation") == 1)
            break;
    }
    test::write_file(dir / "part/journal.ndjson", kept);
    fs::remove(dir / "part/pareto_front.json");

    cli::RunArgs res;
    res.resume = dir / "part";
    res.normalize_time = true;
    CHECK(cli::cmd_run(res, out, err) == cli::kExitOk);

    const json a = json::parse(test::read_file(dir / "full/pareto_front.json"));
    json b = json::parse(test::read_file(dir / "part/pareto_front.json"));
    CHECK(a == b);
    CHECK(test::read_file(dir / "full/best_power.v") == test::read_file(dir / "part/best_power.v"));

    const auto events = read_journal(dir / "part/journal.ndjson").events;
    CHECK(std::count_if(events.begin(), events.end(), [](const json& e) { return e.at("kind") == "resume"; }) == 1);
}

TEST_CASE("parallel runs are reproducible")
{
    // A wave selects all of its operators before any outcome is known, so the journal depends on
    // the worker count but not on thread timing.
    test::TempDir dir("workers");
    std::ostringstream out, err;
    cli::RunArgs a;
    a.config = e2e() / "config.json";
    a.design = e2e() / "design.v";
    a.out = dir / "a";
    a.normalize_time = true;
    a.workers = 3;
    REQUIRE(cli::cmd_run(a, out, err) == cli::kExitOk);
    cli::RunArgs b = a;
    b.out = dir / "b";
    REQUIRE(cli::cmd_run(b, out, err) == cli::kExitOk);
    CHECK(normalized_journal(dir / "a/journal.ndjson") == normalized_journal(dir / "b/journal.ndjson"));
}

TEST_CASE("pareto_front and best_power helpers")
{
    Population pop;
    pop.members = {Individual{"a", Design{}, PpaMetrics::make(2, 1, 1), 0},
                   Individual{"b", Design{}, PpaMetrics::make(1, 2, 1), 0},
                   Individual{"c", Design{}, PpaMetrics::make(3, 3, 3), 0}};
    const auto front = engine::pareto_front(pop);
    REQUIRE(front.size() == 2);
    CHECK(front[0].id == "b");
    CHECK(engine::best_power(pop).id == "b");
    CHECK_THROWS_AS(engine::pareto_front(Population{}), Error);
}
