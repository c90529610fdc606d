#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "poet/vsim/vsim.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"poet-vsim: four-state Verilog simulator for small designs and testbenches"};
    std::vector<std::string> files;
    std::string top;
    std::uint64_t max_time = 100'000'000;
    app.add_option("files", files, "Verilog source files")->required()->check(CLI::ExistingFile);
    app.add_option("--top", top, "Top-level module (default: the only uninstantiated module)");
    bool check = false;
    app.add_option("--max-time", max_time, "Stop after this much simulated time");
    app.add_flag("--check", check, "Parse and elaborate only");
    CLI11_PARSE(app, argc, argv);

    std::vector<poet::vsim::SourceFile> sources;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        sources.push_back({f, ss.str()});
    }
    poet::vsim::SimOptions opts;
    if (!top.empty())
        opts.top = top;
    opts.max_time = max_time;
    opts.elaborate_only = check;
    try {
        auto report = poet::vsim::simulate(sources, opts, std::cout);
        std::cout.flush();
        if (report.time_limit_hit)
            std::cerr << "poet-vsim: stopped at time limit " << max_time << "\n";
        return 0;
    } catch (const poet::vsim::CompileError& e) {
        std::cout.flush();
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const poet::vsim::RuntimeError& e) {
        std::cout.flush();
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
