#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace poet {

/// Evolutionary operators, in the fixed tie-break order used by the bandit.
enum class OperatorId { Improve, Refactor, Explore, Simplify, Fusion, Crossover };

inline constexpr std::array<OperatorId, 6> kAllOperators{
    OperatorId::Improve, OperatorId::Refactor, OperatorId::Explore,
    OperatorId::Simplify, OperatorId::Fusion, OperatorId::Crossover,
};

constexpr int arity(OperatorId op) { return op == OperatorId::Crossover ? 2 : 1; }

constexpr std::size_t index_of(OperatorId op) { return static_cast<std::size_t>(op); }

std::string_view to_string(OperatorId op);
std::optional<OperatorId> operator_from_string(std::string_view name);

/// Strategies used to seed the initial population.
enum class InitStrategy {
    PowerFocused,
    AreaFocused,
    TimingFocused,
    Balanced,
    ArchitecturalExploration,
    Simplification,
};

inline constexpr std::array<InitStrategy, 6> kAllStrategies{
    InitStrategy::PowerFocused, InitStrategy::AreaFocused,
    InitStrategy::TimingFocused, InitStrategy::Balanced,
    InitStrategy::ArchitecturalExploration, InitStrategy::Simplification,
};

std::string_view to_string(InitStrategy s);

}  // namespace poet
