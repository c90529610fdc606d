#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "poet/bandit.hpp"
#include "poet/core.hpp"
#include "poet/difftest.hpp"
#include "poet/journal.hpp"
#include "poet/operators.hpp"
#include "poet/provider.hpp"
#include "poet/tooling.hpp"

namespace poet::engine {

namespace fs = std::filesystem;

struct ProviderSettings {
    std::string kind;  // "scripted" or "remote"
    fs::path fixtures;
    std::string base_url;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 120.0;
};

struct ToolSettings {
    tooling::SimTool sim;
    tooling::ToolCommand synth;
    std::string liberty;
};

struct RunConfig {
    int population_size = 10;
    int offspring_per_generation = 10;
    int generations = 10;
    int repair_attempts = 3;
    double ucb_c = 1.414;
    std::uint64_t seed = 0;
    /// Limit on optimization calls (seeds, operators, repairs). Testbench calls are not charged.
    std::optional<long> call_budget;
    int workers = 1;
    ProviderSettings provider;
    double temperature = provider::kOperatorTemperature;
    int max_tokens = 4096;
    ToolSettings tools;
    difftest::Limits difftest;
    fs::path prompt_dir;
};

struct Totals {
    long provider_calls = 0;   // every generate call
    long charged_calls = 0;    // calls counted against the budget
    long testbench_calls = 0;
    long simulations = 0;
    long syntheses = 0;
    long discards = 0;
    long duplicates = 0;
};

struct RunResult {
    Individual original;
    Population population;
    std::vector<Individual> front;
    Individual best_power;
    Totals totals;
    int generations_completed = 0;
    bool early_stop = false;
    std::string stop_reason;
};

/// Outcome of verify-with-repair for one candidate.
struct Evaluation {
    std::optional<Design> design;  // set when the candidate passed
    int verifications = 0;
    int repairs = 0;
    std::vector<std::string> reasons;  // one per failed verification
};

/// F_1 of the pool, power-ascending. Throws EmptyPool.
std::vector<Individual> pareto_front(const Population& pop);

/// Member with the lowest power (power-first tie chain).
const Individual& best_power(const Population& pop);

/// Drives testbench generation, population seeding, and the generation loop, writing
/// artifacts under `run_dir` and events to `journal`.
class Engine {
public:
    Engine(RunConfig cfg, Design orig, provider::Provider& provider, const ops::PromptLibrary& prompts,
           Journal& journal, fs::path run_dir);

    RunResult run();

    /// Continues from the last checkpoint in `events` (a journal read back from `run_dir`).
    RunResult resume(const std::vector<nlohmann::json>& events);

    difftest::Testbench build_testbench();
    Population init_population();
    Evaluation evaluate_with_repair(const std::string& response, const std::string& tag, const fs::path& workdir,
                                    std::vector<std::pair<std::string, nlohmann::json>>& events);
    Population evolve_generation(const Population& pop, int generation);

    const Totals& totals() const { return totals_; }
    const bandit::OperatorStats& stats() const { return stats_; }
    bool exhausted() const { return exhausted_; }
    const difftest::Testbench& testbench() const { return *tb_; }
    void set_testbench(difftest::Testbench tb) { tb_ = std::move(tb); }
    const PpaMetrics& original_metrics() const { return m_orig_; }

private:
    using Events = std::vector<std::pair<std::string, nlohmann::json>>;

    struct Job;
    struct JobResult;

    provider::GenerationResponse call(provider::GenerationRequest req, bool charged, Events& events);
    tooling::SimResult verify(const std::string& source, const fs::path& workdir);
    PpaMetrics synthesize(const std::string& source, const fs::path& workdir);
    JobResult run_job(const Job& job);
    std::vector<JobResult> run_wave(const std::vector<Job>& jobs);
    void flush(const Events& events);
    void check_invariants(const Population& pop, std::optional<double> previous_min_power);
    void write_checkpoint(const Population& pop);
    RunResult finish(const Population& pop, int generations_completed);
    void evaluate_original();
    fs::path rel(const fs::path& p) const;

    RunConfig cfg_;
    Design orig_;
    provider::Provider& provider_;
    const ops::PromptLibrary& prompts_;
    Journal& journal_;
    fs::path run_dir_;

    std::optional<difftest::Testbench> tb_;
    PpaMetrics m_orig_;
    Individual orig_individual_;
    bandit::OperatorStats stats_;
    std::mt19937_64 rng_;
    std::mutex mutex_;  // guards totals_ and the budget
    Totals totals_;
    bool exhausted_ = false;
    std::string stop_reason_;
    std::set<std::string> passed_;  // ids with a PASS verdict against the validated testbench
};

nlohmann::json metrics_json(const PpaMetrics& m);
nlohmann::json individual_json(const Individual& ind, bool with_source = false);
Individual individual_from_json(const nlohmann::json& j, const std::string& module_name);

}  // namespace poet::engine
