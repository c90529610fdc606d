#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poet/error.hpp"

namespace poet {

/// Synthesis quality of a design: power in uW, area in um^2, critical path delay in ns.
struct PpaMetrics {
    double power = 0.0;
    double area = 0.0;
    double delay = 0.0;

    /// Validating constructor; throws InvalidMetrics unless all components are finite and > 0.
    static PpaMetrics make(double power, double area, double delay);

    bool valid() const noexcept;

    friend bool operator==(const PpaMetrics&, const PpaMetrics&) = default;
};

/// Relative tolerance used whenever two metric components are compared for equality.
inline constexpr double kMetricRelTol = 1e-9;

/// |x - y| <= 1e-9 * max(1, |x|, |y|)
bool approx_equal(double x, double y) noexcept;

/// Strictly less, beyond the equality tolerance.
bool definitely_less(double x, double y) noexcept;

/// Pareto dominance for minimization: a <= b componentwise and strictly better somewhere.
bool dominates(const PpaMetrics& a, const PpaMetrics& b) noexcept;

enum class PortDirection { Input, Output, Inout };

std::string_view to_string(PortDirection dir);

struct PortDecl {
    std::string name;
    PortDirection direction = PortDirection::Input;
    int width = 1;
    bool is_clock = false;
    bool is_reset = false;

    friend bool operator==(const PortDecl&, const PortDecl&) = default;
};

bool is_clock_name(std::string_view name);
bool is_reset_name(std::string_view name);

/// Reads the port list of `module_name` from its header and body declarations.
/// Throws InvalidDesign when the module is missing or a port width cannot be resolved.
std::vector<PortDecl> parse_interface(std::string_view source, std::string_view module_name);

/// Name of the first module declared in `source`, if any.
std::optional<std::string> first_module_name(std::string_view source);

struct Lineage {
    std::vector<std::string> parents;
    std::string operator_name;
    int generation = 0;

    friend bool operator==(const Lineage&, const Lineage&) = default;
};

struct Design {
    std::string module_name;
    std::string source;
    std::vector<PortDecl> interface;
    std::optional<Lineage> lineage;

    /// Builds a design from RTL text, extracting the interface of `module_name`
    /// (or of the first module when empty).
    static Design from_source(std::string source, std::string_view module_name = {});
};

struct Individual {
    std::string id;
    Design design;
    PpaMetrics metrics;
    int born_generation = 0;
};

struct Population {
    std::vector<Individual> members;
    int generation = 0;
};

struct MetricDelta {
    double d_power = 0.0;
    double d_area = 0.0;
    double d_delay = 0.0;

    friend bool operator==(const MetricDelta&, const MetricDelta&) = default;
};

enum class Metric { Power, Area, Delay };

std::string_view to_string(Metric metric);

/// Percent change of `m` relative to `m_orig`. Throws OriginalMetricZero on a non-positive baseline.
MetricDelta metric_delta(const PpaMetrics& m, const PpaMetrics& m_orig);

/// "power -50.4% vs original, area +3.1% vs original, delay +0.0% vs original"
std::string render_delta(const MetricDelta& delta);

/// Single signed percentage, one decimal: "-50.4%".
std::string render_percent(double percent);

/// Hex SHA-256 of the whitespace-normalized source.
std::string dedup_key(const Design& design);

/// Collapses blank runs, strips trailing blanks, normalizes line endings.
std::string normalize_source(std::string_view source);

}  // namespace poet
