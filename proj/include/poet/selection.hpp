#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "poet/core.hpp"

namespace poet::selection {

/// Pareto levels F_1..F_L; F_1 is the non-dominated front.
struct ParetoLevels {
    std::vector<std::vector<Individual>> levels;
};

struct QuotaPlan {
    std::vector<int> quotas;
    std::vector<double> weights;
};

/// Index-level non-dominated sort: returns levels of indices into `metrics`, each in input order.
std::vector<std::vector<std::size_t>> sort_indices(std::span<const PpaMetrics> metrics);

/// Throws EmptyPool on an empty pool.
ParetoLevels non_dominated_sort(std::span<const Individual> pool);

/// Stable order by (power, area, delay, id), ascending.
std::vector<Individual> rank_within_level(std::vector<Individual> level);

/// True when `a` ranks before `b` under the power-first tie-break chain.
bool power_first_less(const Individual& a, const Individual& b);

/// Non-dominated sort followed by intra-level power ranking.
ParetoLevels power_oriented_sort(std::span<const Individual> pool);

/// 1-based rank of each individual in F_1 || F_2 || ... || F_L.
std::map<std::string, int> global_ranks(const ParetoLevels& levels);

/// s_k = max(1, floor(N * w_k)), w_k = (L - k + 1) / sum_j (L - j + 1).
QuotaPlan allocate_quotas(int n, int level_count);

/// Capacity-capped proportional fill: quota pass by level priority, then best-remaining top-up.
/// Returns exactly min(n, |pool|) members.
Population select_survivors(std::span<const Individual> pool, int n);

/// p_i = (1/r_i) / sum_j (1/r_j)
std::vector<double> parent_weights(std::span<const int> ranks);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double unit_draw(std::mt19937_64& rng);

/// Index drawn from `weights` (need not be normalized) by inverse CDF.
std::size_t draw_index(std::span<const double> weights, std::mt19937_64& rng);

/// Draws `count` (1 or 2) distinct members with probability proportional to 1/global rank.
/// Throws InsufficientPopulation when the population is too small.
std::vector<Individual> sample_parents(const Population& pop, int count, std::mt19937_64& rng);

}  // namespace poet::selection
