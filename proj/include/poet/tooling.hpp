#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poet/core.hpp"

namespace poet::tooling {

namespace fs = std::filesystem;

/// A shell command template. Placeholders: {design} {testbench} {workdir} {out} {liberty} {top}.
struct ToolCommand {
    std::string command;
    double timeout_s = 60.0;
};

/// Simulation is an optional compile step followed by a run step sharing one timeout.
struct SimTool {
    ToolCommand compile;  // empty command: the run step compiles too
    ToolCommand run;
};

enum class Verdict { Pass, Fail, Indeterminate };
std::string_view to_string(Verdict v);

struct Sample {
    int vector = 0;
    int step = 0;
    std::string port;
    std::string value;  // hex digits as printed
    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Mismatch {
    int vector = 0;
    int step = 0;
    std::string port;
    std::string expected;
    std::string got;
};

struct SimResult {
    bool compiled = false;
    bool ran = false;
    bool timed_out = false;
    int exit_code = 0;  // of the last step that ran
    Verdict verdict = Verdict::Indeterminate;
    int error_count = 0;
    std::string reason;  // why the verdict is indeterminate
    std::string stdout_text;
    std::string stderr_text;
    std::vector<Sample> samples;
    std::vector<Mismatch> mismatches;
};

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string stdout_text;
    std::string stderr_text;
};

/// Runs `command` through /bin/sh in `workdir`, killing its process group at the timeout.
/// stdout/stderr are kept in `<workdir>/<stem>.stdout` / `.stderr`.
ProcessResult run_process(const std::string& command, const fs::path& workdir, double timeout_s,
                          const std::string& stem);

/// First word of the command must resolve to an executable (absolute, relative to cwd, or on PATH).
/// Throws ToolNotFound otherwise.
void require_tool(const std::string& command);

bool on_path(std::string_view program);

/// Substitutes placeholders; each value is shell-quoted. Unknown placeholders are left in place.
std::string expand(const std::string& templ, const std::map<std::string, std::string>& vars);

/// Creates `<root>/<stem>`, or `<stem>-2`, `<stem>-3`, ... when taken.
fs::path fresh_workdir(const fs::path& root, const std::string& stem);

/// Parses POET_SAMPLE / POET_MISMATCH / POET_RESULT lines into `r`.
void parse_sim_output(std::string_view text, SimResult& r);

/// Writes design.v and tb.v into `workdir` (created when missing), compiles and runs.
/// Throws ToolNotFound; every other anomaly is an INDETERMINATE verdict.
SimResult run_sim(const std::string& design_source, const std::string& testbench_source, const SimTool& tool,
                  const fs::path& workdir, const std::map<std::string, std::string>& extra_vars = {});

/// Normalized report: area_um2=, cpd_ns=, power_uw= lines; '#' comments.
/// Throws MissingKey or InvalidValue (and ReportParseError for malformed lines).
PpaMetrics parse_ppa(std::string_view report);

/// Runs the synthesis adapter, which must write `{out}` (ppa.rpt in the workdir).
/// Throws ToolNotFound, SynthesisFailed, ReportParseError.
PpaMetrics synthesize(const std::string& design_source, const ToolCommand& tool, const fs::path& workdir,
                      const std::map<std::string, std::string>& extra_vars = {});

/// Bundled binaries and adapter scripts, resolved at build time (overridable via POET_TOOL_DIR).
fs::path bundled_tool(std::string_view name);
fs::path adapter_dir();

/// Icarus Verilog when available, otherwise the bundled simulator.
SimTool default_sim_tool();

/// Yosys + OpenSTA adapter when both are installed and a liberty file is configured,
/// otherwise the stub synthesizer. `stub_only` reports which one was chosen.
ToolCommand default_synth_tool(const std::string& liberty, bool* stub_only = nullptr);

}  // namespace poet::tooling
