#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "poet/core.hpp"
#include "poet/tooling.hpp"

namespace poet::test {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(POET_TEST_FIXTURES); }

inline std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text)
{
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

/// Fresh scratch directory under the build tree's temp area; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem)
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("poet-test-" + stem + "-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

/// The bundled simulator, independent of what is installed on the host.
inline tooling::SimTool vsim_tool()
{
    const std::string bin = tooling::bundled_tool("poet-vsim").string();
    return {{"'" + bin + "' --check {design} {testbench}", 30.0}, {"'" + bin + "' {design} {testbench}", 30.0}};
}

inline tooling::ToolCommand stub_synth_tool(bool strict = true)
{
    return {"'" + tooling::bundled_tool("poet-stub-synth").string() + "'" + (strict ? " --strict" : "") +
                " --design {design} --out {out}",
            30.0};
}

inline Design fixture_design(const std::string& name)
{
    return Design::from_source(read_file(fixtures() / "designs" / name / "design.v"), name);
}

}  // namespace poet::test
