#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace poet {

enum class Errc {
    InvalidMetrics,
    InvalidDesign,
    OriginalMetricZero,
    EmptyPool,
    InsufficientPopulation,
    UnselectedOperator,
    WrongArity,
    IdenticalParents,
    PreconditionViolated,
    NoModuleFound,
    WrongModuleName,
    TemplateError,
    TransportError,
    FixtureExhausted,
    AuthError,
    SpecParseError,
    PortTableMismatch,
    VectorParseError,
    NoValidVectors,
    SimCompileError,
    SimRuntimeError,
    UnknownValueInGolden,
    GoldenCoverageGap,
    TestbenchGenerationFailed,
    ToolNotFound,
    Timeout,
    SynthesisFailed,
    ReportParseError,
    MissingKey,
    InvalidValue,
    BaselineSynthesisFailed,
    ProviderExhausted,
    ConfigParseError,
    ConfigInvalid,
    JournalParseError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace poet
