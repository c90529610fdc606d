#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "poet/engine.hpp"

namespace poet::config {

/// Reads a JSON config file. An empty file counts as {}. Relative paths (fixtures, liberty,
/// prompt_dir) resolve against the file's directory. Tools that are not configured fall back to
/// the installed simulator/synthesis stack or the bundled substitutes.
/// Throws ConfigParseError on unreadable or malformed input, ConfigInvalid listing every violation.
engine::RunConfig load_config(const std::filesystem::path& path);

/// Same, from an already parsed document.
engine::RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Effective configuration with defaults applied; loading it back yields the same RunConfig.
nlohmann::json config_to_json(const engine::RunConfig& cfg);

/// Throws ConfigInvalid listing every violated invariant.
void validate(const engine::RunConfig& cfg);

/// Builds the configured provider. The credential variable is read here, not at load time.
std::unique_ptr<provider::Provider> make_provider(const engine::ProviderSettings& settings);

}  // namespace poet::config
