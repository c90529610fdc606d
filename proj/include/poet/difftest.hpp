#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poet/core.hpp"
#include "poet/operators.hpp"
#include "poet/provider.hpp"
#include "poet/tooling.hpp"

namespace poet::difftest {

enum class CircuitClass { Combinational, Sequential };
std::string_view to_string(CircuitClass c);

struct ResetSpec {
    std::string port;
    bool active_high = true;
    bool synchronous = true;
};

struct Scenario {
    std::string id;
    std::string text;
};

struct FunctionalSpec {
    std::string module_name;
    std::vector<PortDecl> ports;
    CircuitClass circuit_class = CircuitClass::Combinational;
    std::optional<std::string> clock;
    std::optional<ResetSpec> reset;
    std::string description;
    std::vector<Scenario> scenarios;
    /// Places where the provider's answer disagreed with the local interface parse.
    std::vector<std::string> corrections;
};

/// One input assignment; `hex` holds exactly ceil(width/4) lowercase hex digits.
struct Assignment {
    std::string port;
    std::string hex;
};

struct Vector {
    std::string scenario;
    std::vector<std::vector<Assignment>> cycles;
};

struct VectorSet {
    std::vector<Vector> vectors;
    std::vector<std::string> warnings;  // dropped assignments, clamped vectors
};

enum class SampleDiscipline { CombinationalSettle, ClockedNegedge };
std::string_view to_string(SampleDiscipline d);

/// Golden output values keyed by (vector index, sample index), then output port.
struct GoldenOutputs {
    SampleDiscipline discipline = SampleDiscipline::CombinationalSettle;
    std::map<std::pair<int, int>, std::map<std::string, std::string>> values;
};

struct Limits {
    int max_vectors = 24;
    int max_cycles = 16;
    int clock_period = 10;
    int max_attempts = 3;
};

struct Testbench {
    FunctionalSpec spec;
    VectorSet vectors;
    GoldenOutputs golden;
    std::string stimulus_source;
    std::string checking_source;
    bool validated = false;
    int attempts = 0;
};

using GenerateFn = std::function<provider::GenerationResponse(const provider::GenerationRequest&)>;
/// Runs a design against a testbench; `label` names the working directory.
using SimFn =
    std::function<tooling::SimResult(const std::string& design, const std::string& testbench, const std::string& label)>;
/// Receives one JSON object per pipeline step (for the journal).
using StepObserver = std::function<void(const nlohmann::json&)>;

/// Decimal, 0x/0b prefixed, or Verilog sized/unsized literal (no x/z) to ceil(width/4) hex digits.
/// Empty when malformed or wider than `width`.
std::optional<std::string> literal_to_hex(std::string_view text, int width);

/// Reads the headed response and reconciles it with the locally parsed interface.
/// Throws SpecParseError when a required heading is missing or malformed.
FunctionalSpec parse_spec_response(std::string_view response, const Design& orig);

FunctionalSpec extract_spec(const Design& orig, const ops::PromptLibrary& lib, const GenerateFn& generate,
                            const std::string& attempt_tag);

/// Throws VectorParseError when no `vector` block is present, NoValidVectors when none survive filtering.
VectorSet parse_vectors(std::string_view response, const FunctionalSpec& spec, const Limits& limits);

VectorSet generate_vectors(const FunctionalSpec& spec, const ops::PromptLibrary& lib, const GenerateFn& generate,
                           const Limits& limits, const std::string& attempt_tag);

std::string assemble_stimulus_tb(const FunctionalSpec& spec, const VectorSet& v, const Limits& limits);

/// Simulates the original with the stimulus testbench and keeps every sampled output.
/// Throws SimCompileError, SimRuntimeError, UnknownValueInGolden.
GoldenOutputs capture_golden(const Design& orig, const std::string& stimulus_source, const FunctionalSpec& spec,
                             const VectorSet& v, const SimFn& sim, const std::string& label);

/// Throws GoldenCoverageGap when a (vector, sample, output) has no golden value.
std::string assemble_checking_tb(const FunctionalSpec& spec, const VectorSet& v, const GoldenOutputs& o,
                                 const Limits& limits);

/// Full pipeline with vector regeneration on failure. Throws TestbenchGenerationFailed.
Testbench generate_testbench(const Design& orig, const ops::PromptLibrary& lib, const GenerateFn& generate,
                             const SimFn& sim, const Limits& limits, const StepObserver& observe = {});

nlohmann::json to_json(const Testbench& tb);
Testbench testbench_from_json(const nlohmann::json& j);

}  // namespace poet::difftest
