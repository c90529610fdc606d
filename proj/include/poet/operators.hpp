#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poet/core.hpp"
#include "poet/operator_id.hpp"

namespace poet::ops {

/// One provider request: system and user text plus the parents it was built from.
struct PromptBundle {
    std::string system_text;
    std::string user_text;
    std::string kind;  // "init:<strategy>", "op:<operator>", "repair", "spec", "vectors"
    std::vector<std::string> context_refs;
};

/// Text templates with `{{name}}` placeholders, loaded from a directory of `<name>.txt` files.
class PromptLibrary {
public:
    static PromptLibrary load(const std::filesystem::path& dir);

    /// Default asset directory baked in at build time, overridable via POET_PROMPT_DIR.
    static std::filesystem::path default_dir();

    void add(std::string name, std::string text);
    bool contains(std::string_view name) const;
    const std::string& raw(std::string_view name) const;

    /// Substitutes every placeholder; throws TemplateError on an unknown template or an unbound name.
    std::string render(std::string_view name, const std::map<std::string, std::string>& vars) const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

std::string render_interface(std::span<const PortDecl> ports);

/// Same names, directions, widths, and order.
bool same_interface(std::span<const PortDecl> a, std::span<const PortDecl> b);

/// Delta component with the largest value; ties prefer power, then area.
Metric weakest_metric(const MetricDelta& delta);

PromptBundle build_init_prompt(const PromptLibrary& lib, const Design& orig, InitStrategy strategy);

/// Throws WrongArity for Crossover.
PromptBundle build_mutation_prompt(const PromptLibrary& lib, OperatorId op, const Design& parent,
                                   const MetricDelta& delta, Metric weakest,
                                   std::string_view parent_id = {});

/// Throws IdenticalParents when both ids match.
PromptBundle build_crossover_prompt(const PromptLibrary& lib, const Individual& p1, const Individual& p2,
                                    const MetricDelta& d1, const MetricDelta& d2);

/// Keeps the last 4000 characters of the log. Throws PreconditionViolated on an empty log.
PromptBundle build_repair_prompt(const PromptLibrary& lib, const Design& candidate, std::string_view error_log);

inline constexpr std::size_t kRepairLogLimit = 4000;

/// Pulls the RTL for `expected_module` out of a free-form response.
/// Throws NoModuleFound or WrongModuleName.
std::string extract_rtl(std::string_view response, std::string_view expected_module);

}  // namespace poet::ops
