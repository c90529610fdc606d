#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace poet::report {

struct GenerationRow {
    int generation = 0;
    int members = 0;
    double best_power = 0, mean_power = 0;
    double best_area = 0, mean_area = 0;
    double best_delay = 0, mean_delay = 0;
    int accepted = 0;
    int discarded = 0;
    int duplicates = 0;
};

struct OperatorRow {
    long selected = 0;
    long rewarded = 0;
};

struct Report {
    std::vector<GenerationRow> generations;  // ascending; generation 0 is the seeded population
    std::map<std::string, OperatorRow> operators;
    std::map<std::string, long> discard_reasons;
    std::optional<nlohmann::json> summary;  // data of the last run_summary event
    std::vector<std::string> warnings;
};

/// Folds journal events into per-generation statistics. After a resume event, data recorded for
/// generations later than the resume point is replaced by the continuation.
Report build_report(const std::vector<nlohmann::json>& events);

/// Short category for a discard reason ("functional_mismatch", "synthesis_failed", ...).
std::string classify_reason(const std::string& reason);

std::string render_text(const Report& report);

/// generation,members,best_power,mean_power,best_area,mean_area,best_delay,mean_delay,accepted,discarded,duplicates
std::string render_csv(const Report& report);

}  // namespace poet::report
