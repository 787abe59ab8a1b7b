#pragma once

#include <filesystem>
#include <string>

#include "jamfield/harness.hpp"

namespace jamfield {

inline constexpr int kConfigSchemaVersion = 1;

/// Parses an experiment configuration (JSON, schema version 1). Missing
/// optional keys take the defaults of the corresponding structs.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

std::string dump_experiment_config(const ExperimentConfig& cfg);

}  // namespace jamfield
