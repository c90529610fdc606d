#include "poet/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "poet/error.hpp"
#include "poet/selection.hpp"

namespace poet::engine {

using nlohmann::json;

namespace {

void spit(const fs::path& p, std::string_view text)
{
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(Errc::JournalParseError, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const std::string& s)
{
    const auto nl = s.find('\n');
    return nl == std::string::npos ? s : s.substr(0, nl);
}

json score_json(double s) { return std::isfinite(s) ? json(s) : json(nullptr); }

json stats_json(const bandit::OperatorStats& s)
{
    json ops = json::object();
    for (OperatorId op : kAllOperators) {
        const auto i = index_of(op);
        ops[std::string(to_string(op))] = {{"reward", s.reward[i]}, {"count", s.count[i]},
                                           {"ucb", score_json(bandit::ucb_score(s, op))}};
    }
    return {{"total", s.total}, {"c", s.c}, {"operators", ops}};
}

json totals_json(const Totals& t)
{
    return {{"provider_calls", t.provider_calls}, {"charged_calls", t.charged_calls},
            {"testbench_calls", t.testbench_calls}, {"simulations", t.simulations},
            {"syntheses", t.syntheses}, {"discards", t.discards}, {"duplicates", t.duplicates}};
}

Totals totals_from_json(const json& j)
{
    Totals t;
    t.provider_calls = j.at("provider_calls").get<long>();
    t.charged_calls = j.at("charged_calls").get<long>();
    t.testbench_calls = j.at("testbench_calls").get<long>();
    t.simulations = j.at("simulations").get<long>();
    t.syntheses = j.at("syntheses").get<long>();
    t.discards = j.at("discards").get<long>();
    t.duplicates = j.at("duplicates").get<long>();
    return t;
}

std::string sim_log(const tooling::SimResult& r)
{
    std::string log;
    if (!r.compiled)
        log += "compilation failed\n";
    if (!r.reason.empty() && r.verdict == tooling::Verdict::Indeterminate)
        log += r.reason + "\n";
    if (r.verdict == tooling::Verdict::Fail)
        log += fmt::format("POET_RESULT: FAIL errors={}\n", r.error_count);
    std::size_t shown = 0;
    for (const auto& m : r.mismatches) {
        if (++shown > 40) {
            log += fmt::format("... {} more mismatches\n", r.mismatches.size() - 40);
            break;
        }
        log += fmt::format("POET_MISMATCH v={} t={} {} expected={} got={}\n", m.vector, m.step, m.port, m.expected,
                           m.got);
    }
    if (!r.stderr_text.empty())
        log += r.stderr_text;
    return log;
}

}  // namespace

json metrics_json(const PpaMetrics& m) { return {{"power", m.power}, {"area", m.area}, {"delay", m.delay}}; }

json individual_json(const Individual& ind, bool with_source)
{
    json j{{"id", ind.id},
           {"power", ind.metrics.power},
           {"area", ind.metrics.area},
           {"delay", ind.metrics.delay},
           {"born", ind.born_generation}};
    if (ind.design.lineage)
        j["lineage"] = {{"parents", ind.design.lineage->parents},
                        {"operator", ind.design.lineage->operator_name},
                        {"generation", ind.design.lineage->generation}};
    if (with_source)
        j["source"] = ind.design.source;
    return j;
}

Individual individual_from_json(const json& j, const std::string& module_name)
{
    Individual ind;
    ind.id = j.at("id").get<std::string>();
    ind.metrics = PpaMetrics::make(j.at("power").get<double>(), j.at("area").get<double>(), j.at("delay").get<double>());
    ind.born_generation = j.at("born").get<int>();
    ind.design = Design::from_source(j.at("source").get<std::string>(), module_name);
    if (j.contains("lineage")) {
        const json& l = j["lineage"];
        ind.design.lineage = Lineage{l.at("parents").get<std::vector<std::string>>(),
                                     l.at("operator").get<std::string>(), l.at("generation").get<int>()};
    }
    return ind;
}

std::vector<Individual> pareto_front(const Population& pop)
{
    if (pop.members.empty())
        throw Error(Errc::EmptyPool, "pareto_front of an empty population");
    auto levels = selection::power_oriented_sort(pop.members);
    return levels.levels.front();
}

const Individual& best_power(const Population& pop)
{
    if (pop.members.empty())
        throw Error(Errc::EmptyPool, "best_power of an empty population");
    return *std::min_element(pop.members.begin(), pop.members.end(), selection::power_first_less);
}

// ---------------------------------------------------------------------------------------------

struct Engine::Job {
    enum class Kind { Seed, Offspring } kind = Kind::Offspring;
    int generation = 0;
    int index = 0;
    std::string id;
    std::string tag;
    ops::PromptBundle bundle;
    std::optional<OperatorId> op;
    std::string strategy;
    std::vector<std::string> parents;
    fs::path workdir;
    std::map<std::string, Individual> pool;  // dedup key -> member
};

struct Engine::JobResult {
    Events events;
    std::optional<Individual> individual;
    std::optional<double> power;  // offspring power for the bandit, duplicates included
    std::optional<std::string> duplicate_of;
    bool exhausted = false;
    std::vector<std::string> reasons;
    int verifications = 0;
    int repairs = 0;
    std::exception_ptr fatal;
};

Engine::Engine(RunConfig cfg, Design orig, provider::Provider& provider, const ops::PromptLibrary& prompts,
               Journal& journal, fs::path run_dir)
    : cfg_(std::move(cfg)),
      orig_(std::move(orig)),
      provider_(provider),
      prompts_(prompts),
      journal_(journal),
      run_dir_(std::move(run_dir)),
      stats_(cfg_.ucb_c),
      rng_(cfg_.seed)
{
}

fs::path Engine::rel(const fs::path& p) const { return fs::relative(p, run_dir_); }

void Engine::flush(const Events& events)
{
    for (const auto& [kind, data] : events)
        journal_.write(kind, data);
}

provider::GenerationResponse Engine::call(provider::GenerationRequest req, bool charged, Events& events)
{
    req.max_tokens = cfg_.max_tokens;
    {
        std::lock_guard lock(mutex_);
        if (charged) {
            if (cfg_.call_budget && totals_.charged_calls >= *cfg_.call_budget)
                throw Error(Errc::ProviderExhausted,
                            fmt::format("call budget of {} exhausted before '{}'", *cfg_.call_budget, req.attempt_tag));
            ++totals_.charged_calls;
        } else {
            ++totals_.testbench_calls;
        }
        ++totals_.provider_calls;
    }
    json record{{"tag", req.attempt_tag},
                {"kind", req.bundle.kind},
                {"temperature", req.temperature},
                {"charged", charged},
                {"system", req.bundle.system_text},
                {"user", req.bundle.user_text}};
    try {
        provider::GenerationResponse r = provider_.generate(req);
        record["response"] = r.text;
        record["latency_ms"] = r.latency_ms;
        if (r.usage)
            record["usage"] = {{"prompt_tokens", r.usage->prompt_tokens},
                               {"completion_tokens", r.usage->completion_tokens}};
        events.emplace_back("generation_attempt", std::move(record));
        return r;
    } catch (const Error& e) {
        record["error"] = e.what();
        record["latency_ms"] = 0;
        events.emplace_back("generation_attempt", std::move(record));
        if (charged && e.code() == Errc::FixtureExhausted)
            throw Error(Errc::ProviderExhausted, e.what());
        throw;
    }
}

tooling::SimResult Engine::verify(const std::string& source, const fs::path& workdir)
{
    {
        std::lock_guard lock(mutex_);
        ++totals_.simulations;
    }
    return tooling::run_sim(source, tb_->checking_source, cfg_.tools.sim, workdir);
}

PpaMetrics Engine::synthesize(const std::string& source, const fs::path& workdir)
{
    {
        std::lock_guard lock(mutex_);
        ++totals_.syntheses;
    }
    return tooling::synthesize(source, cfg_.tools.synth, workdir,
                               {{"liberty", cfg_.tools.liberty}, {"top", orig_.module_name}});
}

// ---------------------------------------------------------------------------------------------

difftest::Testbench Engine::build_testbench()
{
    const fs::path dir = run_dir_ / "testbench";
    fs::create_directories(dir);
    difftest::GenerateFn gen = [this](const provider::GenerationRequest& req) {
        Events ev;
        try {
            auto r = call(req, false, ev);
            flush(ev);
            return r;
        } catch (...) {
            flush(ev);
            throw;
        }
    };
    difftest::SimFn sim = [this, dir](const std::string& design, const std::string& tb, const std::string& label) {
        {
            std::lock_guard lock(mutex_);
            ++totals_.simulations;
        }
        return tooling::run_sim(design, tb, cfg_.tools.sim, dir / label);
    };
    difftest::StepObserver observe = [this](const json& j) { journal_.write("testbench_step", j); };

    difftest::Testbench tb = difftest::generate_testbench(orig_, prompts_, gen, sim, cfg_.difftest, observe);
    spit(dir / "stimulus_tb.v", tb.stimulus_source);
    spit(dir / "checking_tb.v", tb.checking_source);
    spit(dir / "testbench.json", difftest::to_json(tb).dump(2) + "\n");
    std::size_t cycles = 0;
    for (const auto& v : tb.vectors.vectors)
        cycles += v.cycles.size();
    journal_.write("testbench_step", {{"step", "accepted"},
                                      {"attempts", tb.attempts},
                                      {"vectors", tb.vectors.vectors.size()},
                                      {"cycles", cycles},
                                      {"class", to_string(tb.spec.circuit_class)},
                                      {"files", {"testbench/stimulus_tb.v", "testbench/checking_tb.v"}}});
    tb_ = tb;
    return tb;
}

void Engine::evaluate_original()
{
    try {
        m_orig_ = synthesize(orig_.source, run_dir_ / "gen_0" / "orig" / "synth");
    } catch (const Error& e) {
        journal_.write("synth_result", {{"id", "orig"}, {"error", e.what()}});
        throw Error(Errc::BaselineSynthesisFailed, e.what());
    }
    journal_.write("synth_result", {{"id", "orig"}, {"metrics", metrics_json(m_orig_)}});
    orig_individual_ = Individual{"orig", orig_, m_orig_, 0};
    passed_.insert("orig");
}

Evaluation Engine::evaluate_with_repair(const std::string& response, const std::string& tag, const fs::path& workdir,
                                        Events& events)
{
    Evaluation ev;
    std::string source;
    std::string raw = response;
    std::string extract_error;
    auto extract = [&](const std::string& text) {
        raw = text;
        try {
            source = ops::extract_rtl(text, orig_.module_name);
            extract_error.clear();
        } catch (const Error& e) {
            source.clear();
            extract_error = e.what();
        }
    };
    extract(response);

    for (int attempt = 0;; ++attempt) {
        ++ev.verifications;
        std::string log;
        std::string verdict = "INDETERMINATE";
        int errors = 0;
        std::optional<Design> design;
        if (!extract_error.empty()) {
            log = "no usable RTL in the response: " + extract_error;
        } else {
            try {
                design = Design::from_source(source, orig_.module_name);
            } catch (const Error& e) {
                log = std::string("interface could not be read: ") + e.what();
            }
            if (design && !ops::same_interface(design->interface, orig_.interface)) {
                log = "port list changed; expected:\n" + ops::render_interface(orig_.interface) + "got:\n" +
                      ops::render_interface(design->interface);
                design.reset();
            }
            if (design) {
                const tooling::SimResult r = verify(source, workdir / fmt::format("verify-{}", attempt));
                verdict = std::string(tooling::to_string(r.verdict));
                errors = r.error_count;
                if (r.verdict == tooling::Verdict::Pass) {
                    events.emplace_back("verify_result",
                                        json{{"tag", tag}, {"attempt", attempt}, {"verdict", verdict}, {"errors", 0}});
                    ev.design = std::move(design);
                    return ev;
                }
                log = sim_log(r);
            }
        }
        const std::string reason = first_line(log);
        events.emplace_back("verify_result", json{{"tag", tag},
                                                  {"attempt", attempt},
                                                  {"verdict", verdict},
                                                  {"errors", errors},
                                                  {"reason", reason}});
        ev.reasons.push_back(reason);
        if (attempt >= cfg_.repair_attempts)
            return ev;

        Design candidate;
        candidate.module_name = orig_.module_name;
        candidate.source = source.empty() ? raw : source;
        candidate.interface = orig_.interface;
        provider::GenerationRequest req;
        req.bundle = ops::build_repair_prompt(prompts_, candidate, log);
        req.temperature = provider::kFidelityTemperature;
        req.attempt_tag = fmt::format("{}/repair/{}", tag, attempt + 1);
        ++ev.repairs;
        events.emplace_back("repair", json{{"tag", tag}, {"attempt", attempt + 1}});
        extract(call(std::move(req), true, events).text);
    }
}

Engine::JobResult Engine::run_job(const Job& job)
{
    JobResult out;
    try {
        provider::GenerationRequest req;
        req.bundle = job.bundle;
        req.temperature = cfg_.temperature;
        req.attempt_tag = job.tag;
        const auto response = call(std::move(req), true, out.events);
        Evaluation ev = evaluate_with_repair(response.text, job.tag, job.workdir, out.events);
        out.verifications = ev.verifications;
        out.repairs = ev.repairs;
        if (!ev.design) {
            out.reasons = ev.reasons;
            return out;
        }
        Design design = std::move(*ev.design);
        design.lineage = Lineage{job.parents, job.op ? std::string(to_string(*job.op)) : job.strategy, job.generation};
        const std::string key = dedup_key(design);
        if (auto it = job.pool.find(key); it != job.pool.end()) {
            out.duplicate_of = it->second.id;
            out.power = it->second.metrics.power;
            return out;
        }
        try {
            const PpaMetrics m = synthesize(design.source, job.workdir / "synth");
            out.events.emplace_back("synth_result", json{{"id", job.id}, {"metrics", metrics_json(m)}});
            out.power = m.power;
            out.individual = Individual{job.id, std::move(design), m, job.generation};
        } catch (const Error& e) {
            if (e.code() == Errc::ToolNotFound)
                throw;
            out.events.emplace_back("synth_result", json{{"id", job.id}, {"error", e.what()}});
            out.reasons.push_back(std::string("synthesis failed: ") + first_line(e.what()));
        }
    } catch (const Error& e) {
        if (e.code() == Errc::ProviderExhausted) {
            out.exhausted = true;
            out.reasons.push_back(e.what());
        } else if (e.code() == Errc::AuthError || e.code() == Errc::ToolNotFound || e.code() == Errc::TemplateError) {
            out.fatal = std::current_exception();
        } else {
            out.reasons.push_back(first_line(e.what()));
        }
    } catch (...) {
        out.fatal = std::current_exception();
    }
    return out;
}

std::vector<Engine::JobResult> Engine::run_wave(const std::vector<Job>& jobs)
{
    std::vector<JobResult> results(jobs.size());
    if (jobs.size() == 1 || cfg_.workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i)
            results[i] = run_job(jobs[i]);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < jobs.size(); ++i)
            threads.emplace_back([&, i] { results[i] = run_job(jobs[i]); });
        for (auto& t : threads)
            t.join();
    }
    for (auto& r : results)
        if (r.fatal)
            std::rethrow_exception(r.fatal);
    return results;
}

Population Engine::init_population()
{
    if (!tb_)
        throw Error(Errc::PreconditionViolated, "init_population needs a validated testbench");
    Population pop;
    pop.generation = 0;
    pop.members.push_back(orig_individual_);
    std::map<std::string, Individual> pool{{dedup_key(orig_), orig_individual_}};

    const int seeds = cfg_.population_size - 1;
    const int wave = std::max(1, cfg_.workers);
    for (int start = 1; start <= seeds && !exhausted_; start += wave) {
        std::vector<Job> jobs;
        for (int k = start; k < start + wave && k <= seeds; ++k) {
            const InitStrategy strategy = kAllStrategies[static_cast<std::size_t>(k - 1) % kAllStrategies.size()];
            Job job;
            job.kind = Job::Kind::Seed;
            job.generation = 0;
            job.index = k;
            job.id = fmt::format("g0-s{}", k);
            job.strategy = std::string(to_string(strategy));
            job.tag = fmt::format("seed/{}/{}", k, job.strategy);
            job.bundle = ops::build_init_prompt(prompts_, orig_, strategy);
            job.parents = {"orig"};
            job.workdir = run_dir_ / "gen_0" / fmt::format("s{}", k);
            job.pool = pool;
            jobs.push_back(std::move(job));
        }
        auto results = run_wave(jobs);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            JobResult& r = results[i];
            flush(r.events);
            std::string outcome = "discarded";
            if (r.individual) {
                const std::string key = dedup_key(r.individual->design);
                if (auto it = pool.find(key); it != pool.end()) {
                    r.duplicate_of = it->second.id;
                    r.individual.reset();
                } else {
                    pool.emplace(key, *r.individual);
                    pop.members.push_back(*r.individual);
                    passed_.insert(r.individual->id);
                    outcome = "accepted";
                }
            }
            if (r.duplicate_of)
                outcome = "duplicate";
            if (r.exhausted)
                outcome = "exhausted";
            {
                std::lock_guard lock(mutex_);
                if (outcome == "discarded")
                    ++totals_.discards;
                if (outcome == "duplicate")
                    ++totals_.duplicates;
            }
            json data{{"id", jobs[i].id},
                      {"index", jobs[i].index},
                      {"strategy", jobs[i].strategy},
                      {"outcome", outcome},
                      {"verifications", r.verifications},
                      {"repairs", r.repairs},
                      {"reasons", r.reasons}};
            if (r.duplicate_of)
                data["duplicate_of"] = *r.duplicate_of;
            if (outcome == "accepted")
                data["metrics"] = metrics_json(pop.members.back().metrics);
            journal_.write("seed", data);
            if (r.exhausted && !exhausted_) {
                exhausted_ = true;
                stop_reason_ = r.reasons.empty() ? "provider exhausted" : r.reasons.back();
            }
        }
    }
    return pop;
}

Population Engine::evolve_generation(const Population& pop, int generation)
{
    if (pop.members.empty())
        throw Error(Errc::EmptyPool, "cannot evolve an empty population");
    std::vector<Individual> accepted;
    std::map<std::string, Individual> pool;
    for (const auto& m : pop.members)
        pool.emplace(dedup_key(m.design), m);

    const int wave = std::max(1, cfg_.workers);
    for (int start = 0; start < cfg_.offspring_per_generation && !exhausted_; start += wave) {
        std::vector<Job> jobs;
        for (int k = start; k < start + wave && k < cfg_.offspring_per_generation; ++k) {
            const OperatorId op = bandit::select_operator(stats_, pop.members.size());
            const auto parents = selection::sample_parents(pop, arity(op), rng_);
            Job job;
            job.generation = generation;
            job.index = k;
            job.op = op;
            job.id = fmt::format("g{}-o{}", generation, k);
            job.tag = fmt::format("gen/{}/offspring/{}/{}", generation, k, to_string(op));
            for (const auto& p : parents)
                job.parents.push_back(p.id);
            if (op == OperatorId::Crossover) {
                job.bundle = ops::build_crossover_prompt(prompts_, parents[0], parents[1],
                                                         metric_delta(parents[0].metrics, m_orig_),
                                                         metric_delta(parents[1].metrics, m_orig_));
            } else {
                const MetricDelta d = metric_delta(parents[0].metrics, m_orig_);
                job.bundle = ops::build_mutation_prompt(prompts_, op, parents[0].design, d, ops::weakest_metric(d),
                                                        parents[0].id);
            }
            job.workdir = run_dir_ / fmt::format("gen_{}", generation) / fmt::format("o{}", k);
            job.pool = pool;

            json scores = json::object();
            for (OperatorId o : kAllOperators)
                scores[std::string(to_string(o))] = score_json(stats_.last_score[index_of(o)]);
            journal_.write("operator_selected", {{"generation", generation},
                                                 {"offspring", k},
                                                 {"operator", to_string(op)},
                                                 {"scores", scores},
                                                 {"parents", job.parents}});
            jobs.push_back(std::move(job));
        }
        auto results = run_wave(jobs);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            JobResult& r = results[i];
            const Job& job = jobs[i];
            flush(r.events);
            std::string outcome = "discarded";
            if (r.individual) {
                const std::string key = dedup_key(r.individual->design);
                if (auto it = pool.find(key); it != pool.end()) {
                    r.duplicate_of = it->second.id;
                    r.individual.reset();
                } else {
                    pool.emplace(key, *r.individual);
                    accepted.push_back(*r.individual);
                    passed_.insert(r.individual->id);
                    outcome = "accepted";
                }
            }
            if (r.duplicate_of)
                outcome = "duplicate";
            if (r.exhausted)
                outcome = "exhausted";
            const bool reward = r.power && definitely_less(*r.power, m_orig_.power);
            bandit::record_outcome(stats_, *job.op, r.power, m_orig_.power);
            {
                std::lock_guard lock(mutex_);
                if (outcome == "discarded")
                    ++totals_.discards;
                if (outcome == "duplicate")
                    ++totals_.duplicates;
            }
            json data{{"generation", generation},
                      {"offspring", job.index},
                      {"id", job.id},
                      {"operator", to_string(*job.op)},
                      {"parents", job.parents},
                      {"outcome", outcome},
                      {"reward", reward ? 1 : 0},
                      {"verifications", r.verifications},
                      {"repairs", r.repairs},
                      {"reasons", r.reasons}};
            if (r.duplicate_of)
                data["duplicate_of"] = *r.duplicate_of;
            if (outcome == "accepted")
                data["metrics"] = metrics_json(accepted.back().metrics);
            journal_.write("offspring", data);
            if (r.exhausted && !exhausted_) {
                exhausted_ = true;
                stop_reason_ = r.reasons.empty() ? "provider exhausted" : r.reasons.back();
            }
        }
    }

    std::vector<Individual> union_pool = pop.members;
    union_pool.insert(union_pool.end(), accepted.begin(), accepted.end());
    const auto levels = selection::power_oriented_sort(union_pool);
    const auto plan = selection::allocate_quotas(cfg_.population_size, static_cast<int>(levels.levels.size()));
    Population next = selection::select_survivors(union_pool, cfg_.population_size);
    next.generation = generation;

    json level_ids = json::array();
    for (const auto& level : levels.levels) {
        json ids = json::array();
        for (const auto& m : level)
            ids.push_back(m.id);
        level_ids.push_back(ids);
    }
    json pool_json = json::array();
    for (const auto& m : union_pool)
        pool_json.push_back(individual_json(m));
    json survivors = json::array();
    json population = json::array();
    for (const auto& m : next.members) {
        survivors.push_back(m.id);
        json j = individual_json(m);
        j["verdict"] = passed_.count(m.id) ? "PASS" : "UNVERIFIED";
        population.push_back(j);
    }
    journal_.write("selection", {{"generation", generation},
                                 {"pool", pool_json},
                                 {"levels", level_ids},
                                 {"quotas", plan.quotas},
                                 {"survivors", survivors},
                                 {"population", population}});
    journal_.write("bandit_state", {{"generation", generation}, {"stats", stats_json(stats_)}});
    return next;
}

void Engine::check_invariants(const Population& pop, std::optional<double> previous_min_power)
{
    for (const auto& m : pop.members)
        if (!passed_.count(m.id))
            throw Error(Errc::PreconditionViolated,
                        fmt::format("all-correct invariant violated: {} has no PASS verdict", m.id));
    const double min_power = best_power(pop).metrics.power;
    if (previous_min_power && definitely_less(*previous_min_power, min_power))
        throw Error(Errc::PreconditionViolated,
                    fmt::format("minimum power rose from {} to {}", *previous_min_power, min_power));
    for (const auto& f : pareto_front(pop))
        if (dominates(m_orig_, f.metrics))
            throw Error(Errc::PreconditionViolated, fmt::format("front member {} is dominated by the original", f.id));
}

void Engine::write_checkpoint(const Population& pop)
{
    json members = json::array();
    for (const auto& m : pop.members)
        members.push_back(individual_json(m, true));
    std::ostringstream rng;
    rng << rng_;
    json bandit{{"reward", stats_.reward}, {"count", stats_.count}, {"total", stats_.total}, {"c", stats_.c}};
    journal_.write("checkpoint", {{"generation", pop.generation},
                                  {"population", members},
                                  {"bandit", bandit},
                                  {"rng", rng.str()},
                                  {"provider", provider_.checkpoint()},
                                  {"totals", totals_json(totals_)},
                                  {"passed", passed_},
                                  {"original", metrics_json(m_orig_)}});
}

RunResult Engine::finish(const Population& pop, int generations_completed)
{
    RunResult r;
    r.original = orig_individual_;
    r.population = pop;
    r.front = pareto_front(pop);
    r.best_power = best_power(pop);
    r.totals = totals_;
    r.generations_completed = generations_completed;
    r.early_stop = exhausted_;
    r.stop_reason = stop_reason_;

    json front = json::array();
    for (const auto& f : r.front) {
        json j = individual_json(f);
        j["delta"] = {{"power", metric_delta(f.metrics, m_orig_).d_power},
                      {"area", metric_delta(f.metrics, m_orig_).d_area},
                      {"delay", metric_delta(f.metrics, m_orig_).d_delay}};
        j["file"] = fmt::format("front/{}.v", f.id);
        front.push_back(j);
        spit(run_dir_ / "front" / (f.id + ".v"), f.design.source);
    }
    spit(run_dir_ / "pareto_front.json",
         json{{"original", metrics_json(m_orig_)}, {"front", front}}.dump(2) + "\n");
    spit(run_dir_ / "best_power.v", r.best_power.design.source);

    json members = json::array();
    for (const auto& m : pop.members)
        members.push_back(individual_json(m));
    journal_.write("run_summary", {{"status", r.early_stop ? "early_stop" : "complete"},
                                   {"stop_reason", r.stop_reason},
                                   {"generations_completed", generations_completed},
                                   {"original", metrics_json(m_orig_)},
                                   {"population", members},
                                   {"front", front},
                                   {"best_power", individual_json(r.best_power)},
                                   {"totals", totals_json(totals_)}});
    return r;
}

RunResult Engine::run()
{
    fs::create_directories(run_dir_);
    try {
        build_testbench();
        evaluate_original();
        Population pop = init_population();
        check_invariants(pop, std::nullopt);
        write_checkpoint(pop);
        int completed = 0;
        for (int t = 1; t <= cfg_.generations && !exhausted_; ++t) {
            const double prev = best_power(pop).metrics.power;
            pop = evolve_generation(pop, t);
            check_invariants(pop, prev);
            write_checkpoint(pop);
            completed = t;
        }
        return finish(pop, completed);
    } catch (const Error& e) {
        journal_.write("run_summary", {{"status", "failed"},
                                       {"error", e.what()},
                                       {"error_kind", to_string(e.code())},
                                       {"totals", totals_json(totals_)}});
        throw;
    }
}

RunResult Engine::resume(const std::vector<json>& events)
{
    const json* cp = nullptr;
    for (const auto& e : events)
        if (e.at("kind") == "checkpoint")
            cp = &e;
    if (!cp)
        throw Error(Errc::JournalParseError, "journal has no checkpoint to resume from");
    const json& d = cp->at("data");
    try {
        tb_ = difftest::testbench_from_json(json::parse(slurp(run_dir_ / "testbench" / "testbench.json")));
        const json& mo = d.at("original");
        m_orig_ = PpaMetrics::make(mo.at("power").get<double>(), mo.at("area").get<double>(),
                                   mo.at("delay").get<double>());
        orig_individual_ = Individual{"orig", orig_, m_orig_, 0};
        Population pop;
        pop.generation = d.at("generation").get<int>();
        for (const auto& m : d.at("population"))
            pop.members.push_back(m.at("id") == "orig" ? orig_individual_ : individual_from_json(m, orig_.module_name));
        const json& b = d.at("bandit");
        stats_ = bandit::OperatorStats(b.at("c").get<double>());
        stats_.reward = b.at("reward").get<std::array<double, 6>>();
        stats_.count = b.at("count").get<std::array<long, 6>>();
        stats_.total = b.at("total").get<long>();
        std::istringstream rng(d.at("rng").get<std::string>());
        rng >> rng_;
        provider_.restore(d.at("provider"));
        totals_ = totals_from_json(d.at("totals"));
        passed_ = d.at("passed").get<std::set<std::string>>();

        journal_.write("resume", {{"from_generation", pop.generation}});
        int completed = pop.generation;
        for (int t = pop.generation + 1; t <= cfg_.generations && !exhausted_; ++t) {
            const double prev = best_power(pop).metrics.power;
            pop = evolve_generation(pop, t);
            check_invariants(pop, prev);
            write_checkpoint(pop);
            completed = t;
        }
        return finish(pop, completed);
    } catch (const json::exception& e) {
        throw Error(Errc::JournalParseError, std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace poet::engine
