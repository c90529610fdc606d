#include "poet/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace poet::selection {

std::vector<std::vector<std::size_t>> sort_indices(std::span<const PpaMetrics> metrics)
{
    const std::size_t n = metrics.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> dominator_count(n, 0);
    std::vector<std::vector<std::size_t>> levels;

    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q)
                continue;
            if (dominates(metrics[p], metrics[q]))
                dominated_by_me[p].push_back(q);
            else if (dominates(metrics[q], metrics[p]))
                ++dominator_count[p];
        }
        if (dominator_count[p] == 0)
            current.push_back(p);
    }

    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t p : current) {
            for (std::size_t q : dominated_by_me[p]) {
                if (--dominator_count[q] == 0)
                    next.push_back(q);
            }
        }
        std::sort(next.begin(), next.end());
        levels.push_back(std::move(current));
        current = std::move(next);
    }
    return levels;
}

ParetoLevels non_dominated_sort(std::span<const Individual> pool)
{
    if (pool.empty())
        throw Error(Errc::EmptyPool, "cannot sort an empty pool");
    std::vector<PpaMetrics> metrics;
    metrics.reserve(pool.size());
    for (const auto& ind : pool)
        metrics.push_back(ind.metrics);

    ParetoLevels out;
    for (const auto& level : sort_indices(metrics)) {
        std::vector<Individual> members;
        members.reserve(level.size());
        for (std::size_t idx : level)
            members.push_back(pool[idx]);
        out.levels.push_back(std::move(members));
    }
    return out;
}

bool power_first_less(const Individual& a, const Individual& b)
{
    const auto& ma = a.metrics;
    const auto& mb = b.metrics;
    if (!approx_equal(ma.power, mb.power))
        return ma.power < mb.power;
    if (!approx_equal(ma.area, mb.area))
        return ma.area < mb.area;
    if (!approx_equal(ma.delay, mb.delay))
        return ma.delay < mb.delay;
    return a.id < b.id;
}

std::vector<Individual> rank_within_level(std::vector<Individual> level)
{
    std::stable_sort(level.begin(), level.end(), power_first_less);
    return level;
}

ParetoLevels power_oriented_sort(std::span<const Individual> pool)
{
    ParetoLevels levels = non_dominated_sort(pool);
    for (auto& level : levels.levels)
        level = rank_within_level(std::move(level));
    return levels;
}

std::map<std::string, int> global_ranks(const ParetoLevels& levels)
{
    std::map<std::string, int> ranks;
    int next = 1;
    for (const auto& level : levels.levels)
        for (const auto& ind : level)
            ranks[ind.id] = next++;
    return ranks;
}

QuotaPlan allocate_quotas(int n, int level_count)
{
    if (n < 1 || level_count < 1)
        throw Error(Errc::PreconditionViolated, "allocate_quotas requires N >= 1 and L >= 1");
    QuotaPlan plan;
    const long long total = static_cast<long long>(level_count) * (level_count + 1) / 2;
    for (int k = 1; k <= level_count; ++k) {
        const long long priority = level_count - k + 1;
        plan.weights.push_back(static_cast<double>(priority) / static_cast<double>(total));
        // floor(N * w_k) in exact integer arithmetic.
        const long long slots = (static_cast<long long>(n) * priority) / total;
        plan.quotas.push_back(static_cast<int>(std::max<long long>(1, slots)));
    }
    return plan;
}

Population select_survivors(std::span<const Individual> pool, int n)
{
    if (pool.empty())
        throw Error(Errc::EmptyPool, "cannot select from an empty pool");
    if (n < 1)
        throw Error(Errc::PreconditionViolated, "population size must be >= 1");

    const ParetoLevels levels = power_oriented_sort(pool);
    const QuotaPlan plan = allocate_quotas(n, static_cast<int>(levels.levels.size()));

    Population out;
    std::size_t capacity = static_cast<std::size_t>(n);
    std::vector<std::size_t> taken(levels.levels.size(), 0);

    // Pass A: quota per level in priority order.
    for (std::size_t k = 0; k < levels.levels.size() && out.members.size() < capacity; ++k) {
        const auto& level = levels.levels[k];
        std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(plan.quotas[k]), level.size());
        want = std::min(want, capacity - out.members.size());
        for (std::size_t i = 0; i < want; ++i)
            out.members.push_back(level[i]);
        taken[k] = want;
    }

    // Pass B: best remaining by (level, power rank).
    for (std::size_t k = 0; k < levels.levels.size() && out.members.size() < capacity; ++k) {
        const auto& level = levels.levels[k];
        for (std::size_t i = taken[k]; i < level.size() && out.members.size() < capacity; ++i)
            out.members.push_back(level[i]);
    }
    return out;
}

std::vector<double> parent_weights(std::span<const int> ranks)
{
    std::vector<double> w;
    w.reserve(ranks.size());
    double sum = 0.0;
    for (int r : ranks) {
        if (r < 1)
            throw Error(Errc::PreconditionViolated, "ranks are 1-based");
        w.push_back(1.0 / static_cast<double>(r));
        sum += w.back();
    }
    for (double& x : w)
        x /= sum;
    return w;
}

double unit_draw(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_index(std::span<const double> weights, std::mt19937_64& rng)
{
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = unit_draw(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc)
            return i;
    }
    // Rounding at the upper end: last index with positive weight.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0)
            return i;
    return 0;
}

std::vector<Individual> sample_parents(const Population& pop, int count, std::mt19937_64& rng)
{
    if (count < 1 || count > 2)
        throw Error(Errc::PreconditionViolated, "parent count must be 1 or 2");
    if (pop.members.size() < static_cast<std::size_t>(count))
        throw Error(Errc::InsufficientPopulation, "population has fewer members than requested parents");

    const auto ranks = global_ranks(power_oriented_sort(pop.members));
    std::vector<int> member_ranks;
    member_ranks.reserve(pop.members.size());
    for (const auto& m : pop.members)
        member_ranks.push_back(ranks.at(m.id));
    std::vector<double> weights = parent_weights(member_ranks);

    std::vector<Individual> parents;
    for (int draw = 0; draw < count; ++draw) {
        std::size_t idx = draw_index(weights, rng);
        parents.push_back(pop.members[idx]);
        weights[idx] = 0.0;  // without replacement
    }
    return parents;
}

}  // namespace poet::selection
