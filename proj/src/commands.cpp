#include "poet/commands.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "poet/config.hpp"
#include "poet/engine.hpp"
#include "poet/error.hpp"
#include "poet/journal.hpp"
#include "poet/report.hpp"
#include "poet/selection.hpp"

namespace poet::cli {

using nlohmann::json;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(Errc::PreconditionViolated, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, std::string_view text)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw Error(Errc::PreconditionViolated, "cannot write " + p.string());
    out << text;
}

Design load_design(const fs::path& path, const std::string& top)
{
    if (!fs::is_regular_file(path))
        throw Error(Errc::InvalidDesign, "design file not found: " + path.string());
    return Design::from_source(slurp(path), top);
}

fs::path default_run_dir()
{
    const auto now = std::chrono::system_clock::now();
    return fs::path("run") / fmt::format("{:%Y%m%dT%H%M%S}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

ops::PromptLibrary prompts_for(const engine::RunConfig& cfg)
{
    return ops::PromptLibrary::load(cfg.prompt_dir.empty() ? ops::PromptLibrary::default_dir() : cfg.prompt_dir);
}

std::string pct(double v) { return render_percent(v); }

void print_summary(const engine::RunResult& r, std::ostream& out)
{
    const PpaMetrics& o = r.original.metrics;
    out << fmt::format("{:<14} {:>12} {:>12} {:>10} {:>9} {:>9} {:>9}\n", "design", "power_uW", "area_um2", "cpd_ns",
                       "d_power", "d_area", "d_cpd");
    auto row = [&](const std::string& label, const PpaMetrics& m) {
        const MetricDelta d = metric_delta(m, o);
        out << fmt::format("{:<14} {:>12.4f} {:>12.4f} {:>10.4f} {:>9} {:>9} {:>9}\n", label, m.power, m.area,
                           m.delay, pct(d.d_power), pct(d.d_area), pct(d.d_delay));
    };
    row("original", o);
    row("best_power", r.best_power.metrics);
    for (const auto& f : r.front)
        row("front:" + f.id, f.metrics);
    out << fmt::format("generations {}  provider calls {} (charged {})  sims {}  synth {}  discards {}  duplicates {}\n",
                       r.generations_completed, r.totals.provider_calls, r.totals.charged_calls,
                       r.totals.simulations, r.totals.syntheses, r.totals.discards, r.totals.duplicates);
    if (r.early_stop)
        out << "stopped early: " << r.stop_reason << "\n";
}

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err)
{
    try {
        const bool resuming = !args.resume.empty();
        const fs::path run_dir = resuming ? args.resume : (args.out.empty() ? default_run_dir() : args.out);
        engine::RunConfig cfg;
        if (!args.config.empty())
            cfg = config::load_config(args.config);
        else if (resuming)
            cfg = config::load_config(run_dir / "config.snapshot");
        else
            throw Error(Errc::ConfigInvalid, "--config is required");
        if (args.seed)
            cfg.seed = *args.seed;
        if (args.budget)
            cfg.call_budget = *args.budget;
        if (args.workers)
            cfg.workers = *args.workers;
        config::validate(cfg);

        Design orig;
        if (resuming)
            orig = load_design(args.design.empty() ? run_dir / "original.v" : args.design, args.top);
        else if (args.design.empty())
            throw Error(Errc::InvalidDesign, "--design is required");
        else
            orig = load_design(args.design, args.top);

        const auto prompts = prompts_for(cfg);
        auto provider = config::make_provider(cfg.provider);
        fs::create_directories(run_dir);

        std::vector<json> prior;
        if (resuming) {
            JournalRead jr = read_journal(run_dir / "journal.ndjson");
            for (const auto& w : jr.warnings)
                err << "warning: journal " << w << "\n";
            prior = std::move(jr.events);
        } else {
            spit(run_dir / "config.snapshot", config::config_to_json(cfg).dump(2) + "\n");
            spit(run_dir / "original.v", orig.source);
        }
        Journal journal(run_dir / "journal.ndjson", resuming, args.normalize_time);
        engine::Engine eng(cfg, orig, *provider, prompts, journal, run_dir);
        const engine::RunResult r = resuming ? eng.resume(prior) : eng.run();
        print_summary(r, out);
        out << "run directory: " << run_dir.string() << "\n";
        return r.early_stop ? kExitBudget : kExitOk;
    } catch (const std::exception& e) {
        err << "poet run: " << e.what() << "\n";
        return kExitFatal;
    }
}

int cmd_testbench(const TestbenchArgs& args, std::ostream& out, std::ostream& err)
{
    try {
        engine::RunConfig cfg;
        if (!args.config.empty()) {
            cfg = config::load_config(args.config);
        } else if (!args.fixtures.empty()) {
            json doc{{"provider", {{"kind", "scripted"}, {"fixtures", fs::absolute(args.fixtures).string()}}}};
            cfg = config::config_from_json(doc, fs::current_path());
        } else {
            throw Error(Errc::ConfigInvalid, "--config or --fixtures is required");
        }
        if (args.max_attempts)
            cfg.difftest.max_attempts = *args.max_attempts;
        config::validate(cfg);
        const Design orig = load_design(args.design, args.top);
        const auto prompts = prompts_for(cfg);
        auto provider = config::make_provider(cfg.provider);
        const fs::path dir = args.out.empty() ? fs::path("testbench_out") : args.out;
        fs::create_directories(dir);
        Journal journal(dir / "journal.ndjson");
        engine::Engine eng(cfg, orig, *provider, prompts, journal, dir);
        difftest::Testbench tb;
        try {
            tb = eng.build_testbench();
        } catch (const Error& e) {
            spit(dir / "testbench" / "validation.txt", std::string("FAILED\n") + e.what() + "\n");
            throw;
        }
        std::size_t cycles = 0;
        for (const auto& v : tb.vectors.vectors)
            cycles += v.cycles.size();
        std::string report = fmt::format(
            "PASS\nmodule {}\nclass {}\nvectors {}\ncycles {}\nattempts {}\n", tb.spec.module_name,
            to_string(tb.spec.circuit_class), tb.vectors.vectors.size(), cycles, tb.attempts);
        for (const auto& c : tb.spec.corrections)
            report += "correction " + c + "\n";
        for (const auto& w : tb.vectors.warnings)
            report += "warning " + w + "\n";
        spit(dir / "testbench" / "validation.txt", report);
        out << report << "files: " << (dir / "testbench").string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "poet testbench: " << e.what() << "\n";
        return kExitFatal;
    }
}

int cmd_select(const SelectArgs& args, std::ostream& out, std::ostream& err)
{
    try {
        json doc;
        try {
            doc = json::parse(slurp(args.pool));
        } catch (const json::parse_error& e) {
            throw Error(Errc::EmptyPool, std::string("malformed pool: ") + e.what());
        }
        if (!doc.is_array() || doc.empty())
            throw Error(Errc::EmptyPool, "pool must be a non-empty JSON array");
        if (args.n < 1)
            throw Error(Errc::PreconditionViolated, "-n must be >= 1");
        std::vector<Individual> pool;
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const json& e = doc[i];
            const json& m = e.contains("metrics") ? e["metrics"] : e;
            Individual ind;
            ind.id = e.contains("id") ? e["id"].get<std::string>() : fmt::format("p{}", i);
            ind.metrics = PpaMetrics::make(m.at("power").get<double>(), m.at("area").get<double>(),
                                           m.at("delay").get<double>());
            pool.push_back(std::move(ind));
        }
        const auto levels = selection::power_oriented_sort(pool);
        const auto plan = selection::allocate_quotas(args.n, static_cast<int>(levels.levels.size()));
        const auto ranks = selection::global_ranks(levels);
        const auto survivors = selection::select_survivors(pool, args.n);
        json lv = json::array();
        for (const auto& level : levels.levels) {
            json ids = json::array();
            for (const auto& m : level)
                ids.push_back(m.id);
            lv.push_back(ids);
        }
        json sv = json::array();
        for (const auto& m : survivors.members)
            sv.push_back(m.id);
        json result{{"levels", lv},
                    {"quotas", plan.quotas},
                    {"weights", plan.weights},
                    {"ranks", ranks},
                    {"survivors", sv}};
        out << result.dump(2) << "\n";
        return kExitOk;
    } catch (const json::exception& e) {
        err << "poet select: malformed pool: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        err << "poet select: " << e.what() << "\n";
        return kExitFatal;
    }
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err)
{
    try {
        JournalRead jr = read_journal(args.journal);
        for (const auto& w : jr.warnings)
            err << "warning: " << w << "\n";
        if (args.normalize_time) {
            for (const auto& e : jr.events)
                out << normalize_event(e).dump() << "\n";
        } else {
            const report::Report r = report::build_report(jr.events);
            out << report::render_text(r);
            if (!args.csv.empty())
                spit(args.csv, report::render_csv(r));
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "poet report: " << e.what() << "\n";
        return kExitFatal;
    }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"poet: power-first RTL optimization with LLM-driven evolution"};
    app.require_subcommand(1);

    RunArgs run;
    std::uint64_t seed = 0;
    long budget = 0;
    int workers = 1;
    auto* run_cmd = app.add_subcommand("run", "optimize a design");
    run_cmd->add_option("--config", run.config, "config file (JSON)");
    run_cmd->add_option("--design", run.design, "original RTL file");
    run_cmd->add_option("--top", run.top, "module to optimize (default: first module)");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "RNG seed");
    auto* budget_opt = run_cmd->add_option("--budget", budget, "optimization call budget");
    auto* workers_opt = run_cmd->add_option("--workers", workers, "concurrent offspring pipelines");
    run_cmd->add_option("--out", run.out, "run directory");
    run_cmd->add_option("--resume", run.resume, "continue a run directory from its last checkpoint");
    run_cmd->add_flag("--normalize-time", run.normalize_time, "write ts=0 and latency_ms=0 to the journal");

    TestbenchArgs tb;
    int max_attempts = 0;
    auto* tb_cmd = app.add_subcommand("testbench", "generate and validate a testbench only");
    tb_cmd->add_option("--config", tb.config, "config file (JSON)");
    tb_cmd->add_option("--fixtures", tb.fixtures, "scripted provider fixtures (instead of --config)");
    tb_cmd->add_option("--design", tb.design, "original RTL file")->required();
    tb_cmd->add_option("--top", tb.top, "module name");
    tb_cmd->add_option("--out", tb.out, "output directory");
    auto* attempts_opt = tb_cmd->add_option("--max-attempts", max_attempts, "testbench generation attempts");

    SelectArgs sel;
    auto* sel_cmd = app.add_subcommand("select", "run power-oriented survivor selection on a metrics pool");
    sel_cmd->add_option("--pool", sel.pool, "JSON array of {id, power, area, delay}")->required();
    sel_cmd->add_option("-n", sel.n, "survivor count")->required();

    ReportArgs rep;
    auto* rep_cmd = app.add_subcommand("report", "summarize a run journal");
    rep_cmd->add_option("--journal", rep.journal, "journal.ndjson")->required();
    rep_cmd->add_option("--csv", rep.csv, "write the per-generation trajectory as CSV");
    rep_cmd->add_flag("--normalize-time", rep.normalize_time, "print the journal with timestamps and latencies zeroed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitFatal;
    }

    if (*run_cmd) {
        if (*seed_opt)
            run.seed = seed;
        if (*budget_opt)
            run.budget = budget;
        if (*workers_opt)
            run.workers = workers;
        return cmd_run(run, out, err);
    }
    if (*tb_cmd) {
        if (*attempts_opt)
            tb.max_attempts = max_attempts;
        return cmd_testbench(tb, out, err);
    }
    if (*sel_cmd)
        return cmd_select(sel, out, err);
    return cmd_report(rep, out, err);
}

}  // namespace poet::cli
