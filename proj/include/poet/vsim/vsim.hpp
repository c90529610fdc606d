#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace poet::vsim {

/// Event-driven simulator for a synthesizable Verilog-2001 subset plus the testbench
/// constructs used by generated testbenches (initial blocks, delays, event controls,
/// $display/$write/$finish). Values are four-state and at most 64 bits wide.
///
/// Not supported: memories, functions/tasks, generate, signed arithmetic, real numbers,
/// hierarchical references, multiple drivers per net.

/// Source problem with a file:line prefix.
class CompileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problem found while the simulation runs (zero-delay loops, bad delays).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SourceFile {
    std::string name;
    std::string text;
};

struct SimOptions {
    std::optional<std::string> top;
    std::uint64_t max_time = 100'000'000;
    bool elaborate_only = false;  // parse and elaborate, then stop before time 0
};

struct SimReport {
    bool finish_called = false;
    bool time_limit_hit = false;
    std::uint64_t end_time = 0;
};

/// Throws CompileError or RuntimeError; $display output goes to `out`.
SimReport simulate(const std::vector<SourceFile>& files, const SimOptions& options, std::ostream& out);

}  // namespace poet::vsim
