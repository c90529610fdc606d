#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "poet/core.hpp"
#include "poet/error.hpp"

using namespace poet;

namespace {

PpaMetrics m3(double p, double a, double d) { return PpaMetrics::make(p, a, d); }

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

TEST_CASE("PpaMetrics::make rejects non-positive and non-finite components")
{
    CHECK_NOTHROW(m3(1, 2, 3));
    CHECK(code_of([] { m3(0, 1, 1); }) == Errc::InvalidMetrics);
    CHECK(code_of([] { m3(1, -1, 1); }) == Errc::InvalidMetrics);
    CHECK(code_of([] { m3(1, 1, std::numeric_limits<double>::infinity()); }) == Errc::InvalidMetrics);
    CHECK(code_of([] { m3(std::nan(""), 1, 1); }) == Errc::InvalidMetrics);
}

TEST_CASE("approx_equal uses a relative tolerance of 1e-9 with a floor of 1")
{
    CHECK(approx_equal(1.0, 1.0 + 0.5e-9));
    CHECK_FALSE(approx_equal(1.0, 1.0 + 2e-9));
    CHECK(approx_equal(1e6, 1e6 + 1e-4));  // 1e-9 * 1e6 = 1e-3
    CHECK_FALSE(approx_equal(1e6, 1e6 + 2e-3));
    CHECK(definitely_less(1.0, 1.1));
    CHECK_FALSE(definitely_less(1.0, 1.0 + 1e-12));
}

TEST_CASE("dominance on adder rows")
{
    // POET vs REvolution, (power, area, delay)
    CHECK(dominates(m3(195.0, 272.65, 1.03), m3(363.0, 409.37, 1.26)));
    CHECK_FALSE(dominates(m3(1, 1, 1), m3(1, 1, 1)));
    CHECK_FALSE(dominates(m3(1, 2, 3), m3(2, 1, 3)));
    CHECK_FALSE(dominates(m3(2, 1, 3), m3(1, 2, 3)));
    CHECK(dominates(m3(1, 1, 1), m3(1, 1, 2)));
    // Equal within tolerance counts as equal, not better.
    CHECK_FALSE(dominates(m3(1, 1, 1), m3(1 + 1e-12, 1, 1)));
}

TEST_CASE("dominance properties on random metrics")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick(1, 4);  // small grid so ties are common
    auto rnd = [&] { return m3(pick(rng), pick(rng), pick(rng)); };
    for (int i = 0; i < 2000; ++i) {
        const auto a = rnd(), b = rnd(), c = rnd();
        CHECK_FALSE(dominates(a, a));                             // irreflexive
        CHECK_FALSE((dominates(a, b) && dominates(b, a)));        // antisymmetric
        if (dominates(a, b) && dominates(b, c))
            CHECK(dominates(a, c));                               // transitive
    }
}

TEST_CASE("metric_delta against table values")
{
    const auto d = metric_delta(m3(195.0, 100, 1), m3(393.0, 100, 1));
    // (195 - 393) / 393 * 100
    CHECK(d.d_power == doctest::Approx(-50.38167938931297).epsilon(1e-12));
    CHECK(d.d_area == 0.0);
    const auto d2 = metric_delta(m3(1, 47.61, 1), m3(1, 52.14, 1));
    CHECK(d2.d_area == doctest::Approx(-8.688147295742235).epsilon(1e-12));
    CHECK(metric_delta(m3(3, 4, 5), m3(3, 4, 5)) == MetricDelta{0, 0, 0});
    PpaMetrics zero;
    CHECK(code_of([&] { metric_delta(m3(1, 1, 1), zero); }) == Errc::OriginalMetricZero);
}

TEST_CASE("render_delta and render_percent")
{
    CHECK(render_percent(-50.3817) == "-50.4%");
    CHECK(render_percent(3.14) == "+3.1%");
    CHECK(render_percent(0.0) == "+0.0%");
    const std::string s = render_delta({-50.38, 3.1, 0.0});
    CHECK(s.find("power -50.4%") != std::string::npos);
    CHECK(s.find("area +3.1%") != std::string::npos);
    CHECK(s.find("delay +0.0%") != std::string::npos);
}

TEST_CASE("dedup_key normalization")
{
    const std::string src = "module m(input a, output y);\n  assign y = a;\nendmodule\n";
    auto key = [](const std::string& s) { return dedup_key(Design::from_source(s, "m")); };
    CHECK(key(src) == key(src));
    CHECK(key(src) == key("module m(input a, output y);   \n  assign y = a;\t\nendmodule\n\n\n"));
    CHECK(key(src) == key("module m(input a, output y);\r\n  assign y = a;\r\nendmodule\r\n"));
    CHECK(key(src) != key("module m(input a, output y);\n  assign y = ~a;\nendmodule\n"));
    CHECK(key(src).size() == 64);
}

TEST_CASE("parse_interface reads ANSI and non-ANSI headers")
{
    const auto ports = parse_interface(
        "module top #(parameter W = 8) (input clk, input rst_n, input [W-1:0] d, output reg [W-1:0] q);\nendmodule\n",
        "top");
    REQUIRE(ports.size() == 4);
    CHECK(ports[0].name == "clk");
    CHECK(ports[0].is_clock);
    CHECK(ports[1].is_reset);
    CHECK(ports[2].width == 8);
    CHECK(ports[3].direction == PortDirection::Output);

    const auto legacy = parse_interface(
        "module old(a, b, y);\n  input [3:0] a;\n  input b;\n  output [4:0] y;\n  assign y = a + b;\nendmodule\n", "old");
    REQUIRE(legacy.size() == 3);
    CHECK(legacy[0].width == 4);
    CHECK(legacy[2].width == 5);
    CHECK(legacy[2].direction == PortDirection::Output);

    CHECK(code_of([] { parse_interface("module a(input x); endmodule", "b"); }) == Errc::InvalidDesign);
}

TEST_CASE("Design::from_source picks the first module when no name is given")
{
    const auto d = Design::from_source("// lead\nmodule first(input a, output b);\nassign b=a;\nendmodule\n"
                                       "module second(input c);\nendmodule\n");
    CHECK(d.module_name == "first");
    CHECK(d.interface.size() == 2);
    CHECK(first_module_name("no modules here") == std::nullopt);
}
