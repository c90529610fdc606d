#include "poet/tooling.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <boost/process.hpp>
#include <fmt/format.h>
#include <unistd.h>

#include "poet/error.hpp"

#ifndef POET_TOOL_DIR
#define POET_TOOL_DIR "."
#endif
#ifndef POET_ASSET_DIR
#define POET_ASSET_DIR "assets"
#endif

namespace poet::tooling {

namespace bp = boost::process;

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Indeterminate: return "INDETERMINATE";
    }
    return "?";
}

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, std::string_view text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out)
        throw Error(Errc::PreconditionViolated, "cannot write " + p.string());
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

std::string first_word(const std::string& command)
{
    std::size_t i = command.find_first_not_of(" \t");
    if (i == std::string::npos)
        return {};
    std::size_t j = i;
    std::string word;
    // Honour the single quoting produced by expand().
    while (j < command.size() && command[j] != ' ' && command[j] != '\t') {
        if (command[j] == '\'') {
            std::size_t k = command.find('\'', j + 1);
            if (k == std::string::npos)
                k = command.size();
            word.append(command, j + 1, k - j - 1);
            j = k + 1;
        } else {
            word.push_back(command[j++]);
        }
    }
    return word;
}

std::string tail(const std::string& s, std::size_t n)
{
    return s.size() <= n ? s : s.substr(s.size() - n);
}

}  // namespace

bool on_path(std::string_view program)
{
    if (program.find('/') != std::string_view::npos)
        return ::access(std::string(program).c_str(), X_OK) == 0;
    return !bp::search_path(std::string(program)).empty();
}

void require_tool(const std::string& command)
{
    const std::string prog = first_word(command);
    if (prog.empty())
        throw Error(Errc::ToolNotFound, "empty tool command");
    if (!on_path(prog))
        throw Error(Errc::ToolNotFound, "'" + prog + "' is not an executable on PATH");
}

std::string expand(const std::string& templ, const std::map<std::string, std::string>& vars)
{
    std::string out;
    std::size_t i = 0;
    while (i < templ.size()) {
        if (templ[i] == '{') {
            std::size_t close = templ.find('}', i);
            if (close != std::string::npos) {
                auto it = vars.find(templ.substr(i + 1, close - i - 1));
                if (it != vars.end()) {
                    out += shell_quote(it->second);
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(templ[i++]);
    }
    return out;
}

fs::path fresh_workdir(const fs::path& root, const std::string& stem)
{
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    fs::create_directories(root);
    for (int n = 1;; ++n) {
        fs::path candidate = root / (n == 1 ? stem : fmt::format("{}-{}", stem, n));
        if (fs::create_directory(candidate))
            return candidate;
    }
}

ProcessResult run_process(const std::string& command, const fs::path& workdir, double timeout_s,
                          const std::string& stem)
{
    const fs::path out_path = workdir / (stem + ".stdout");
    const fs::path err_path = workdir / (stem + ".stderr");
    ProcessResult r;
    std::error_code ec;
    bp::group group;
    bp::child child("/bin/sh", "-c", command, bp::start_dir = workdir.string(), bp::std_in < bp::null,
                    bp::std_out > out_path.string(), bp::std_err > err_path.string(), group, ec);
    if (ec)
        throw Error(Errc::ToolNotFound, "cannot start /bin/sh: " + ec.message());

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(static_cast<long>(timeout_s * 1000.0));
    auto pause = std::chrono::microseconds(200);
    while (child.running(ec)) {
        if (std::chrono::steady_clock::now() >= deadline) {
            r.timed_out = true;
            group.terminate(ec);
            break;
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::microseconds(20'000));
    }
    child.wait(ec);
    r.exit_code = r.timed_out ? -1 : child.exit_code();
    r.stdout_text = slurp(out_path);
    r.stderr_text = slurp(err_path);
    return r;
}

void parse_sim_output(std::string_view text, SimResult& r)
{
    static const std::regex sample_re(R"(^POET_SAMPLE v=(\d+) t=(\d+) (\w+)=(\S+)\s*$)");
    static const std::regex mismatch_re(
        R"(^POET_MISMATCH v=(\d+) t=(\d+) (\w+) expected=(\S+) got=(\S+)\s*$)");
    static const std::regex pass_re(R"(^POET_RESULT: PASS\s*$)");
    static const std::regex fail_re(R"(^POET_RESULT: FAIL errors=(\d+)\s*$)");

    std::istringstream in{std::string(text)};
    std::string line;
    bool result_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, sample_re)) {
            r.samples.push_back(Sample{std::stoi(m[1]), std::stoi(m[2]), m[3], m[4]});
        } else if (std::regex_match(line, m, mismatch_re)) {
            r.mismatches.push_back(Mismatch{std::stoi(m[1]), std::stoi(m[2]), m[3], m[4], m[5]});
        } else if (std::regex_match(line, pass_re)) {
            result_seen = true;
            r.verdict = Verdict::Pass;
            r.error_count = 0;
        } else if (std::regex_match(line, m, fail_re)) {
            result_seen = true;
            r.verdict = Verdict::Fail;
            r.error_count = std::stoi(m[1]);
        }
    }
    if (!result_seen) {
        r.verdict = Verdict::Indeterminate;
        if (r.reason.empty())
            r.reason = "no POET_RESULT line in simulator output";
    }
}

SimResult run_sim(const std::string& design_source, const std::string& testbench_source, const SimTool& tool,
                  const fs::path& workdir, const std::map<std::string, std::string>& extra_vars)
{
    if (design_source.empty() || testbench_source.empty())
        throw Error(Errc::PreconditionViolated, "run_sim needs both a design and a testbench");
    if (tool.run.command.empty())
        throw Error(Errc::ToolNotFound, "no simulation command configured");
    fs::create_directories(workdir);
    const fs::path design = workdir / "design.v";
    const fs::path tb = workdir / "tb.v";
    spit(design, design_source);
    spit(tb, testbench_source);

    std::map<std::string, std::string> vars = extra_vars;
    // Commands run inside the workdir; relative names keep run logs free of absolute paths.
    vars["design"] = "design.v";
    vars["testbench"] = "tb.v";
    vars["workdir"] = ".";
    vars.emplace("poet_bin", bundled_tool("").parent_path().string());

    SimResult r;
    const auto start = std::chrono::steady_clock::now();
    auto remaining = [&](double total) {
        const double used = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return std::max(0.05, total - used);
    };

    if (!tool.compile.command.empty()) {
        const std::string cmd = expand(tool.compile.command, vars);
        require_tool(cmd);
        ProcessResult c = run_process(cmd, workdir, tool.compile.timeout_s, "compile");
        r.stdout_text = c.stdout_text;
        r.stderr_text = c.stderr_text;
        r.exit_code = c.exit_code;
        r.timed_out = c.timed_out;
        if (c.exit_code == 127)
            throw Error(Errc::ToolNotFound, "simulator compile step: " + tail(c.stderr_text, 500));
        if (c.timed_out || c.exit_code != 0) {
            r.reason = c.timed_out ? "compile timed out" : fmt::format("compile failed (exit {})", c.exit_code);
            return r;
        }
        r.compiled = true;
    }

    const std::string cmd = expand(tool.run.command, vars);
    require_tool(cmd);
    ProcessResult p = run_process(cmd, workdir, remaining(tool.run.timeout_s), "run");
    if (p.exit_code == 127)
        throw Error(Errc::ToolNotFound, "simulator run step: " + tail(p.stderr_text, 500));
    r.stdout_text += p.stdout_text;
    r.stderr_text += p.stderr_text;
    r.exit_code = p.exit_code;
    r.timed_out = p.timed_out;
    parse_sim_output(p.stdout_text, r);
    if (tool.compile.command.empty())
        r.compiled = p.exit_code == 0 || r.verdict != Verdict::Indeterminate || !r.samples.empty();
    r.ran = r.compiled && !p.timed_out;
    if (p.timed_out) {
        r.verdict = Verdict::Indeterminate;
        r.reason = fmt::format("simulation timed out after {:g} s", tool.run.timeout_s);
    } else if (p.exit_code != 0) {
        r.verdict = Verdict::Indeterminate;
        r.reason = fmt::format("simulator exited with status {}", p.exit_code);
    }
    return r;
}

PpaMetrics parse_ppa(std::string_view report)
{
    std::optional<double> area, cpd, power;
    std::istringstream in{std::string(report)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#')
            continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::ReportParseError, fmt::format("line {}: expected key=value", lineno));
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t'))
            key.pop_back();
        value.erase(0, value.find_first_not_of(" \t"));

        std::optional<double>* slot = nullptr;
        if (key == "area_um2")
            slot = &area;
        else if (key == "cpd_ns")
            slot = &cpd;
        else if (key == "power_uw")
            slot = &power;
        else
            throw Error(Errc::ReportParseError, fmt::format("line {}: unknown key '{}'", lineno, key));
        if (slot->has_value())
            throw Error(Errc::ReportParseError, fmt::format("line {}: duplicate key '{}'", lineno, key));

        double v = 0.0;
        const char* first = value.data();
        const char* last = value.data() + value.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (value.empty() || ec != std::errc() || ptr != last)
            throw Error(Errc::InvalidValue, fmt::format("{}: '{}' is not a number", key, value));
        if (!std::isfinite(v) || v <= 0.0)
            throw Error(Errc::InvalidValue, fmt::format("{}: {} must be finite and > 0", key, value));
        *slot = v;
    }
    if (!area)
        throw Error(Errc::MissingKey, "area_um2 missing from report");
    if (!cpd)
        throw Error(Errc::MissingKey, "cpd_ns missing from report");
    if (!power)
        throw Error(Errc::MissingKey, "power_uw missing from report");
    return PpaMetrics::make(*power, *area, *cpd);
}

PpaMetrics synthesize(const std::string& design_source, const ToolCommand& tool, const fs::path& workdir,
                      const std::map<std::string, std::string>& extra_vars)
{
    if (tool.command.empty())
        throw Error(Errc::ToolNotFound, "no synthesis command configured");
    fs::create_directories(workdir);
    const fs::path design = workdir / "design.v";
    const fs::path report = workdir / "ppa.rpt";
    spit(design, design_source);
    fs::remove(report);

    std::map<std::string, std::string> vars = extra_vars;
    vars["design"] = "design.v";
    vars["workdir"] = ".";
    vars["out"] = "ppa.rpt";
    vars.emplace("poet_bin", bundled_tool("").parent_path().string());
    vars.emplace("adapters", adapter_dir().string());
    const std::string cmd = expand(tool.command, vars);
    require_tool(cmd);

    ProcessResult p = run_process(cmd, workdir, tool.timeout_s, "synth");
    if (p.exit_code == 127)
        throw Error(Errc::ToolNotFound, "synthesis adapter: " + tail(p.stderr_text, 500));
    if (p.timed_out)
        throw Error(Errc::SynthesisFailed, fmt::format("synthesis timed out after {:g} s", tool.timeout_s));
    if (p.exit_code != 0)
        throw Error(Errc::SynthesisFailed,
                    fmt::format("adapter exited with status {}: {}", p.exit_code, tail(p.stderr_text, 1000)));
    if (!fs::exists(report))
        throw Error(Errc::SynthesisFailed, "adapter did not write " + report.filename().string());
    try {
        return parse_ppa(slurp(report));
    } catch (const Error& e) {
        throw Error(Errc::ReportParseError, e.what());
    }
}

fs::path bundled_tool(std::string_view name)
{
    const char* env = std::getenv("POET_TOOL_DIR");
    const fs::path dir = env && *env ? fs::path(env) : fs::path(POET_TOOL_DIR);
    return dir / std::string(name);
}

fs::path adapter_dir()
{
    const char* env = std::getenv("POET_ADAPTER_DIR");
    return env && *env ? fs::path(env) : fs::path(POET_ASSET_DIR) / "adapters";
}

SimTool default_sim_tool()
{
    SimTool t;
    if (on_path("iverilog") && on_path("vvp")) {
        t.compile = {"iverilog -g2012 -o {workdir}/sim.vvp {design} {testbench}", 60.0};
        t.run = {"vvp -n {workdir}/sim.vvp", 60.0};
    } else {
        const std::string vsim = shell_quote(bundled_tool("poet-vsim").string());
        t.compile = {vsim + " --check {design} {testbench}", 60.0};
        t.run = {vsim + " {design} {testbench}", 60.0};
    }
    return t;
}

ToolCommand default_synth_tool(const std::string& liberty, bool* stub_only)
{
    const bool real = on_path("yosys") && on_path("sta") && !liberty.empty();
    if (stub_only)
        *stub_only = !real;
    if (real) {
        const std::string script = shell_quote((adapter_dir() / "yosys_opensta.sh").string());
        return {script + " {design} {top} {liberty} {workdir} {out}", 300.0};
    }
    const std::string stub = shell_quote(bundled_tool("poet-stub-synth").string());
    return {stub + " --design {design} --out {out}", 300.0};
}

}  // namespace poet::tooling
