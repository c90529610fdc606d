#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace poet::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 2;
inline constexpr int kExitBudget = 3;

struct RunArgs {
    fs::path config;
    fs::path design;
    std::string top;
    std::optional<std::uint64_t> seed;
    std::optional<long> budget;
    std::optional<int> workers;
    fs::path out;     // run directory; default run/<UTC timestamp>
    fs::path resume;  // existing run directory to continue
    bool normalize_time = false;
};

struct TestbenchArgs {
    fs::path config;
    fs::path fixtures;  // scripted provider shortcut when no config is given
    fs::path design;
    std::string top;
    fs::path out;
    std::optional<int> max_attempts;
};

struct SelectArgs {
    fs::path pool;
    int n = 0;
};

struct ReportArgs {
    fs::path journal;
    fs::path csv;
    bool normalize_time = false;  // print the normalized journal instead of the summary
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);
int cmd_testbench(const TestbenchArgs& args, std::ostream& out, std::ostream& err);
int cmd_select(const SelectArgs& args, std::ostream& out, std::ostream& err);
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv with the `poet run|testbench|select|report` grammar and dispatches.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace poet::cli
