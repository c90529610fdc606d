#include <doctest.h>

#include <set>

#include "poet/error.hpp"
#include "poet/operators.hpp"

using namespace poet;
using namespace poet::ops;

namespace {

const PromptLibrary& lib()
{
    static const PromptLibrary l = PromptLibrary::load(PromptLibrary::default_dir());
    return l;
}

const char* kAdder = "module add4(input [3:0] a, input [3:0] b, output [4:0] y);\n  assign y = a + b;\nendmodule\n";

Individual indiv(const std::string& id, double p, double a, double d)
{
    Individual i;
    i.id = id;
    i.design = Design::from_source(kAdder, "add4");
    i.metrics = PpaMetrics::make(p, a, d);
    return i;
}

Errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::PreconditionViolated;
}

}  // namespace

TEST_CASE("init prompts")
{
    const Design orig = Design::from_source(kAdder, "add4");
    const auto power = build_init_prompt(lib(), orig, InitStrategy::PowerFocused);
    CHECK(power.user_text.find(kAdder) != std::string::npos);
    CHECK(power.user_text.find("clock gating") != std::string::npos);
    CHECK(power.user_text.find("operand isolation") != std::string::npos);
    CHECK(power.kind == "init:PowerFocused");
    CHECK_FALSE(power.system_text.empty());

    const auto balanced = build_init_prompt(lib(), orig, InitStrategy::Balanced);
    for (const char* word : {"power", "area", "delay"})
        CHECK(balanced.user_text.find(word) != std::string::npos);

    std::set<std::string> texts;
    for (InitStrategy s : kAllStrategies)
        texts.insert(build_init_prompt(lib(), orig, s).user_text);
    CHECK(texts.size() == 6);
}

TEST_CASE("weakest_metric")
{
    CHECK(weakest_metric({5, -2, -1}) == Metric::Power);
    CHECK(weakest_metric({-5, 2, -1}) == Metric::Area);
    CHECK(weakest_metric({-5, -2, 1}) == Metric::Delay);
    CHECK(weakest_metric({1, 1, 1}) == Metric::Power);
    CHECK(weakest_metric({0, 1, 1}) == Metric::Area);
}

TEST_CASE("mutation prompts")
{
    const Design parent = Design::from_source(kAdder, "add4");
    const MetricDelta d{5, -2, -1};
    const auto improve = build_mutation_prompt(lib(), OperatorId::Improve, parent, d, weakest_metric(d), "g1-o0");
    const auto pos_primary = improve.user_text.find("power (primary target)");
    REQUIRE(pos_primary != std::string::npos);
    CHECK(pos_primary < improve.user_text.find("area (secondary)"));
    CHECK(improve.user_text.find("power +5.0% vs original") != std::string::npos);
    CHECK(improve.context_refs == std::vector<std::string>{"g1-o0"});

    const auto simplify = build_mutation_prompt(lib(), OperatorId::Simplify, parent, d, Metric::Power);
    CHECK(simplify.user_text.find("redundant") != std::string::npos);

    const auto fusion = build_mutation_prompt(lib(), OperatorId::Fusion, parent, d, Metric::Power);
    CHECK(fusion.user_text.find("Power + Area") != std::string::npos);
    CHECK(fusion.user_text.find("Conflicting combinations") != std::string::npos);

    CHECK(code_of([&] { build_mutation_prompt(lib(), OperatorId::Crossover, parent, d, Metric::Power); }) ==
          Errc::WrongArity);
}

TEST_CASE("crossover prompt assigns techniques by superiority")
{
    const auto p1 = indiv("p1", 1.0, 5.0, 1.0);
    const auto p2 = indiv("p2", 2.0, 3.0, 1.5);
    const auto mixed = build_crossover_prompt(lib(), p1, p2, {}, {});
    CHECK(mixed.user_text.find("Power techniques: inherit from parent A") != std::string::npos);
    CHECK(mixed.user_text.find("Area techniques: inherit from parent B") != std::string::npos);
    CHECK(mixed.user_text.find("may conflict") != std::string::npos);
    CHECK(mixed.context_refs == std::vector<std::string>{"p1", "p2"});

    const auto all_a = build_crossover_prompt(lib(), indiv("a", 1, 1, 1), indiv("b", 2, 2, 2), {}, {});
    CHECK(all_a.user_text.find("Power techniques: inherit from parent A") != std::string::npos);
    CHECK(all_a.user_text.find("Area techniques: inherit from parent A") != std::string::npos);
    CHECK(all_a.user_text.find("Delay techniques: inherit from parent A") != std::string::npos);

    // power tie within tolerance: the lower-area parent takes power
    const auto tie = build_crossover_prompt(lib(), indiv("a", 1.0, 4.0, 1), indiv("b", 1.0 + 1e-12, 2.0, 1), {}, {});
    CHECK(tie.user_text.find("Power techniques: inherit from parent B") != std::string::npos);

    CHECK(code_of([&] { build_crossover_prompt(lib(), p1, p1, {}, {}); }) == Errc::IdenticalParents);
}

TEST_CASE("repair prompt")
{
    const Design cand = Design::from_source(kAdder, "add4");
    const std::string log = "POET_MISMATCH v=0 t=1 y expected=03 got=02\nPOET_RESULT: FAIL errors=1\n";
    const auto r = build_repair_prompt(lib(), cand, log);
    CHECK(r.user_text.find(log) != std::string::npos);
    CHECK(r.kind == "repair");
    const std::string compile = "design.v:2: syntax error\n";
    CHECK(build_repair_prompt(lib(), cand, compile).user_text.find(compile) != std::string::npos);
    CHECK(code_of([&] { build_repair_prompt(lib(), cand, "  \n"); }) == Errc::PreconditionViolated);

    const std::string huge(10000, 'x');
    const auto t = build_repair_prompt(lib(), cand, huge + "TAIL");
    CHECK(t.user_text.find("TAIL") != std::string::npos);
    CHECK(t.user_text.find(huge) == std::string::npos);
}

TEST_CASE("extract_rtl")
{
    CHECK(extract_rtl(std::string("Sure.\n```verilog\n") + kAdder + "```\nDone.", "add4") == kAdder);
    const std::string prose = std::string("Here it is: ") + kAdder + " hope it helps";
    CHECK(extract_rtl(prose, "add4").find("assign y = a + b;") != std::string::npos);
    CHECK(code_of([] { extract_rtl("```verilog\nmodule other(input a);\nendmodule\n```", "add4"); }) ==
          Errc::WrongModuleName);
    CHECK(code_of([] { extract_rtl("no code here", "add4"); }) == Errc::NoModuleFound);
}

TEST_CASE("interface helpers")
{
    const auto a = parse_interface(kAdder, "add4");
    CHECK(same_interface(a, a));
    auto b = a;
    b[2].width = 6;
    CHECK_FALSE(same_interface(a, b));
    auto c = a;
    std::swap(c[0], c[1]);
    CHECK_FALSE(same_interface(a, c));
    CHECK(render_interface(a).find("output [4:0] y") != std::string::npos);
}

TEST_CASE("PromptLibrary placeholders")
{
    PromptLibrary l;
    l.add("t", "hello {{name}}");
    CHECK(l.render("t", {{"name", "x"}}) == "hello x");
    CHECK(code_of([&] { l.render("t", {}); }) == Errc::TemplateError);
    CHECK(code_of([&] { l.render("missing", {}); }) == Errc::TemplateError);
}
