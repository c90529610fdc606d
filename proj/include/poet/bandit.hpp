#pragma once

#include <array>
#include <optional>

#include "poet/operator_id.hpp"

namespace poet::bandit {

/// Per-operator UCB bookkeeping. T is the total selection count.
struct OperatorStats {
    std::array<double, 6> reward{};
    std::array<long, 6> count{};
    std::array<double, 6> last_score{};
    long total = 0;
    double c = 1.414;

    explicit OperatorStats(double exploration = 1.414) : c(exploration) {}
};

/// R/n + c * sqrt(ln T / n); +infinity for an operator never selected.
double ucb_score(const OperatorStats& stats, OperatorId op);

/// Argmax of ucb_score with ties going to the earlier operator; counts the selection.
OperatorId select_operator(OperatorStats& stats);

/// Same, skipping operators that need more parents than `population_size` can supply.
OperatorId select_operator(OperatorStats& stats, std::size_t population_size);

/// Reward +1 when the offspring verified, synthesized, and beat the original's power.
/// `offspring_power` is empty for discarded offspring. Throws UnselectedOperator if n_op = 0.
void record_outcome(OperatorStats& stats, OperatorId op, std::optional<double> offspring_power,
                    double original_power);

}  // namespace poet::bandit
