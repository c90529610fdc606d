#include <doctest.h>

#include <sstream>

#include "poet/vsim/vsim.hpp"

using namespace poet::vsim;

namespace {

std::string run(const std::string& src, SimOptions opt = {})
{
    std::ostringstream out;
    simulate({{"t.v", src}}, opt, out);
    return out.str();
}

}  // namespace

TEST_CASE("continuous assignment and display formats")
{
    const auto out = run(R"(
module t;
  reg [7:0] a;
  wire [8:0] s = a + 8'd3;
  initial begin
    a = 8'hfe;
    #1 $display("%h %0h %d %b %o|%0d|%%", s, s, s, a[3:0], a, 5);
    $finish;
  end
endmodule
)");
    CHECK(out == "101 101 257 1110 376|5|%\n");
}

TEST_CASE("uninitialized regs print x; undriven wires print z")
{
    const auto out = run(R"(
module t;
  reg [3:0] r;
  wire [3:0] w;
  initial begin #1 $display("%h %h %b", r, w, r === 4'bxxxx); end
endmodule
)");
    CHECK(out == "x z 1\n");
}

TEST_CASE("combinational always block with case")
{
    const auto out = run(R"(
module m(input [1:0] s, input [3:0] a, input [3:0] b, output reg [3:0] y);
  always @(*) begin
    case (s)
      2'd0: y = a;
      2'd1: y = b;
      2'd2: y = a & b;
      default: y = 4'hf;
    endcase
  end
endmodule
module t;
  reg [1:0] s; reg [3:0] a, b; wire [3:0] y;
  m dut(.s(s), .a(a), .b(b), .y(y));
  initial begin
    a = 4'hc; b = 4'ha;
    s = 0; #1 $display("%h", y);
    s = 1; #1 $display("%h", y);
    s = 2; #1 $display("%h", y);
    s = 3; #1 $display("%h", y);
  end
endmodule
)");
    CHECK(out == "c\na\n8\nf\n");
}

TEST_CASE("registers, nonblocking swap and async reset")
{
    const auto out = run(R"(
module cnt(input clk, input rst_n, output reg [3:0] q);
  always @(posedge clk or negedge rst_n)
    if (!rst_n) q <= 4'd0;
    else q <= q + 4'd1;
endmodule
module t;
  reg clk = 1'b0; reg rst_n;
  reg [3:0] x, y;
  wire [3:0] q;
  cnt dut(.clk(clk), .rst_n(rst_n), .q(q));
  always #5 clk = ~clk;
  initial begin
    x = 1; y = 2;
    rst_n = 0;
    @(posedge clk); #1 rst_n = 1;
    @(posedge clk); @(posedge clk); #1;
    $display("q=%0d", q);
    x <= y; y <= x; #1;
    $display("x=%0d y=%0d", x, y);
    rst_n = 0; #1 $display("q=%0d", q);
    $finish;
  end
endmodule
)");
    CHECK(out == "q=2\nx=2 y=1\nq=0\n");
}

TEST_CASE("parameters override through instantiation")
{
    const auto out = run(R"(
module w #(parameter N = 4) (output [7:0] n);
  assign n = N;
endmodule
module t;
  wire [7:0] a, b;
  w u1(.n(a));
  w #(.N(9)) u2(.n(b));
  initial #1 $display("%0d %0d", a, b);
endmodule
)");
    CHECK(out == "4 9\n");
}

TEST_CASE("operators: shifts, reductions, concatenation, replication, ternary, comparisons")
{
    const auto out = run(R"(
module t;
  reg [7:0] a; reg [3:0] b;
  initial begin
    a = 8'b1011_0010; b = 4'd3;
    #1 $display("%b %b %b %b", a << 1, a >> b, {b, b}, {2{b[1:0]}});
    $display("%b%b%b %h", &a, |a, ^a, a[7] ? b : 4'hf);
    $display("%b %b %b %b", a > 8'd100, a == 8'hb2, b != 4'd3, (a & 8'h0f) <= 8'd2);
    $display("%0d %0d", a % 8'd7, a / b);
  end
endmodule
)");
    CHECK(out == "01100100 00010110 00110011 1111\n010 3\n1 1 0 1\n3 59\n");
}

TEST_CASE("$finish stops the run and max_time bounds it")
{
    std::ostringstream out;
    const auto rep = simulate({{"t.v", "module t; reg c = 0; always #1 c = ~c; endmodule\n"}}, {std::nullopt, 50}, out);
    CHECK(rep.time_limit_hit);
    const auto fin = simulate({{"t.v", "module t; initial begin #3 $finish; end endmodule\n"}}, {}, out);
    CHECK(fin.finish_called);
    CHECK(fin.end_time == 3);
}

TEST_CASE("compile errors carry file and line")
{
    try {
        run("module t;\n  wire a;\n  assign a = ;\nendmodule\n");
        FAIL("expected CompileError");
    } catch (const CompileError& e) {
        CHECK(std::string(e.what()).find("t.v:3") != std::string::npos);
    }
    CHECK_THROWS_AS(run("module t; initial $display(\"%h\", nosuch); endmodule\n"), CompileError);
    CHECK_THROWS_AS(run("module t; foo u(); endmodule\n"), CompileError);
}

TEST_CASE("zero-delay loops are reported")
{
    CHECK_THROWS_AS(run("module t; reg a = 0, b = 0; always @(a) b = ~b; always @(b) a = ~a; initial #1 a = 1; endmodule\n"), RuntimeError);
}

TEST_CASE("elaborate_only stops before time 0")
{
    SimOptions o;
    o.elaborate_only = true;
    CHECK(run("module t; initial $display(\"hi\"); endmodule\n", o).empty());
}
