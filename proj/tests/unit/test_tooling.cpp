#include <doctest.h>

#include <chrono>

#include "poet/error.hpp"
#include "poet/tooling.hpp"
#include "support.hpp"

using namespace poet;
using namespace poet::tooling;

namespace {

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

const char* kHalfAdder = "module half_adder(input a, input b, output sum, output carry);\n"
                         "  assign sum = a ^ b;\n  assign carry = a & b;\nendmodule\n";

const char* kPassTb = R"(module poet_tb;
  reg a, b;
  wire sum, carry;
  integer poet_errors;
  half_adder dut(.a(a), .b(b), .sum(sum), .carry(carry));
  initial begin
    poet_errors = 0;
    a = 1; b = 1; #1;
    $display("POET_SAMPLE v=0 t=0 sum=%h", sum);
    if (carry !== 1'h1) begin
      poet_errors = poet_errors + 1;
      $display("POET_MISMATCH v=0 t=0 carry expected=%h got=%h", 1'h1, carry);
    end
    if (poet_errors == 0) $display("POET_RESULT: PASS");
    else $display("POET_RESULT: FAIL errors=%0d", poet_errors);
    $finish;
  end
endmodule
)";

}  // namespace

TEST_CASE("parse_ppa")
{
    const auto m = parse_ppa("# comment\narea_um2=52.14\ncpd_ns=0.50\npower_uw=32.50\n");
    CHECK(m.power == 32.50);
    CHECK(m.area == 52.14);
    CHECK(m.delay == 0.50);
    CHECK(parse_ppa("  power_uw = 1.5 \n area_um2=2\ncpd_ns=3\n").power == 1.5);
    CHECK(code_of([] { parse_ppa("area_um2=1\ncpd_ns=1\n"); }) == Errc::MissingKey);
    CHECK(code_of([] { parse_ppa("area_um2=1\ncpd_ns=-1\npower_uw=1\n"); }) == Errc::InvalidValue);
    CHECK(code_of([] { parse_ppa("area_um2=1\ncpd_ns=abc\npower_uw=1\n"); }) == Errc::InvalidValue);
    CHECK(code_of([] { parse_ppa("area_um2=1\ncpd_ns=1\npower_uw=nan\n"); }) == Errc::InvalidValue);
    CHECK(code_of([] { parse_ppa("garbage line\n"); }) == Errc::ReportParseError);
    CHECK(code_of([] { parse_ppa("area_um2=1\narea_um2=2\ncpd_ns=1\npower_uw=1\n"); }) == Errc::ReportParseError);
    CHECK(code_of([] { parse_ppa("slack=1\narea_um2=1\ncpd_ns=1\npower_uw=1\n"); }) == Errc::ReportParseError);
}

TEST_CASE("parse_sim_output")
{
    SimResult r;
    parse_sim_output("noise\nPOET_SAMPLE v=1 t=2 sum=1\nPOET_MISMATCH v=0 t=3 y expected=0a got=0b\n"
                     "POET_RESULT: FAIL errors=1\n",
                     r);
    CHECK(r.verdict == Verdict::Fail);
    CHECK(r.error_count == 1);
    REQUIRE(r.samples.size() == 1);
    CHECK(r.samples[0] == Sample{1, 2, "sum", "1"});
    REQUIRE(r.mismatches.size() == 1);
    CHECK(r.mismatches[0].expected == "0a");
    CHECK(r.mismatches[0].got == "0b");

    SimResult p;
    parse_sim_output("POET_RESULT: PASS\n", p);
    CHECK(p.verdict == Verdict::Pass);

    SimResult none;
    parse_sim_output("POET_SAMPLE v=0 t=0 y=1\n", none);
    CHECK(none.verdict == Verdict::Indeterminate);
}

TEST_CASE("expand quotes values and leaves unknown placeholders")
{
    CHECK(expand("run {design} {other}", {{"design", "a b.v"}}) == "run 'a b.v' {other}");
    CHECK(expand("{x}", {{"x", "it's"}}) == R"('it'\''s')");
}

TEST_CASE("fresh_workdir never reuses a directory")
{
    test::TempDir t("wd");
    const auto a = fresh_workdir(t.path(), "job");
    const auto b = fresh_workdir(t.path(), "job");
    CHECK(a != b);
    CHECK(fs::is_directory(a));
    CHECK(b.filename() == "job-2");
}

TEST_CASE("run_process kills a runaway command at the timeout")
{
    test::TempDir t("proc");
    const auto start = std::chrono::steady_clock::now();
    const auto r = run_process("sleep 30", t.path(), 0.5, "slow");
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(r.timed_out);
    CHECK(took < 10.0);
    const auto ok = run_process("echo hi; echo err 1>&2; exit 3", t.path(), 5, "quick");
    CHECK_FALSE(ok.timed_out);
    CHECK(ok.exit_code == 3);
    CHECK(ok.stdout_text == "hi\n");
    CHECK(ok.stderr_text == "err\n");
    CHECK(fs::exists(t / "quick.stdout"));
}

TEST_CASE("require_tool")
{
    CHECK_NOTHROW(require_tool("sh -c true"));
    CHECK(code_of([] { require_tool("/no/such/tool --x"); }) == Errc::ToolNotFound);
    CHECK(code_of([] { require_tool("definitely-not-a-real-program-xyz"); }) == Errc::ToolNotFound);
}

TEST_CASE("run_sim with the bundled simulator")
{
    test::TempDir t("sim");
    const auto pass = run_sim(kHalfAdder, kPassTb, test::vsim_tool(), t / "pass");
    CHECK(pass.compiled);
    CHECK(pass.verdict == Verdict::Pass);
    REQUIRE(pass.samples.size() == 1);
    CHECK(pass.samples[0].value == "0");

    const std::string broken = "module half_adder(input a, input b, output sum, output carry);\n  assign sum = ;\nendmodule\n";
    const auto bad = run_sim(broken, kPassTb, test::vsim_tool(), t / "broken");
    CHECK_FALSE(bad.compiled);
    CHECK(bad.verdict == Verdict::Indeterminate);
    CHECK(bad.stderr_text.find("design.v") != std::string::npos);

    const std::string runaway = R"(module poet_tb;
  reg clk = 0;
  always #1 clk = ~clk;
endmodule
)";
    SimTool slow = test::vsim_tool();
    slow.run.timeout_s = 1.0;
    const auto r = run_sim(kHalfAdder, runaway, slow, t / "runaway");
    CHECK(r.verdict == Verdict::Indeterminate);

    SimTool missing{{}, {"/no/such/simulator {design} {testbench}", 5}};
    CHECK(code_of([&] { run_sim(kHalfAdder, kPassTb, missing, t / "missing"); }) == Errc::ToolNotFound);
}

TEST_CASE("synthesize with a fixed-report adapter")
{
    test::TempDir t("synth");
    const ToolCommand echo{"printf 'area_um2=52.14\\ncpd_ns=0.50\\npower_uw=32.50\\n' > {out}", 10};
    const auto m = synthesize(kHalfAdder, echo, t / "echo");
    CHECK(m == PpaMetrics{32.50, 52.14, 0.50});

    const ToolCommand bad{"printf 'area_um2=x\\ncpd_ns=1\\npower_uw=1\\n' > {out}", 10};
    CHECK(code_of([&] { synthesize(kHalfAdder, bad, t / "bad"); }) == Errc::ReportParseError);

    const ToolCommand fails{"sh -c 'exit 4'", 10};
    CHECK(code_of([&] { synthesize(kHalfAdder, fails, t / "fails"); }) == Errc::SynthesisFailed);

    const ToolCommand silent{"true", 10};
    CHECK(code_of([&] { synthesize(kHalfAdder, silent, t / "silent"); }) == Errc::SynthesisFailed);

    const ToolCommand absent{(tooling::adapter_dir() / "no_such_adapter.sh").string() + " {design}", 10};
    CHECK(code_of([&] { synthesize(kHalfAdder, absent, t / "absent"); }) == Errc::ToolNotFound);
}

TEST_CASE("stub synthesizer")
{
    test::TempDir t("stub");
    const std::string annotated =
        std::string(kHalfAdder) + "// poet-ppa: power_uw=3.5 area_um2=7.25 cpd_ns=0.4\n";
    CHECK(synthesize(annotated, test::stub_synth_tool(), t / "a") == PpaMetrics{3.5, 7.25, 0.4});
    CHECK(code_of([&] { synthesize(kHalfAdder, test::stub_synth_tool(true), t / "b"); }) == Errc::SynthesisFailed);
    const auto est = synthesize(kHalfAdder, test::stub_synth_tool(false), t / "c");
    CHECK(est.valid());
}
