#include "poet/bandit.hpp"

#include <cmath>
#include <limits>

#include "poet/core.hpp"

namespace poet::bandit {

double ucb_score(const OperatorStats& stats, OperatorId op)
{
    const std::size_t i = index_of(op);
    const long n = stats.count[i];
    if (n == 0)
        return std::numeric_limits<double>::infinity();
    const double mean = stats.reward[i] / static_cast<double>(n);
    const double explore = std::sqrt(std::log(static_cast<double>(stats.total)) / static_cast<double>(n));
    return mean + stats.c * explore;
}

OperatorId select_operator(OperatorStats& stats)
{
    return select_operator(stats, kAllOperators.size());
}

OperatorId select_operator(OperatorStats& stats, std::size_t population_size)
{
    OperatorId best = kAllOperators.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (OperatorId op : kAllOperators) {
        const double s = ucb_score(stats, op);
        stats.last_score[index_of(op)] = s;
        if (static_cast<std::size_t>(arity(op)) > population_size)
            continue;
        if (s > best_score) {
            best = op;
            best_score = s;
        }
    }
    ++stats.count[index_of(best)];
    ++stats.total;
    return best;
}

void record_outcome(OperatorStats& stats, OperatorId op, std::optional<double> offspring_power,
                    double original_power)
{
    const std::size_t i = index_of(op);
    if (stats.count[i] == 0)
        throw Error(Errc::UnselectedOperator, std::string(to_string(op)) + " was never selected");
    if (offspring_power && definitely_less(*offspring_power, original_power))
        stats.reward[i] += 1.0;
}

}  // namespace poet::bandit
