#pragma once

#include "ran/pipeline.hpp"

#include <json.hpp>

#include <filesystem>

namespace ran {

/// Everything a registration run needs: the level schedule and the
/// pipeline parameters.
struct PipelineConfig {
  ArchitectureConfig arch;
  RegistrationParams params;
  // schedule parameters, kept for experiments that sweep q
  Index schedule_levels = 0;  // K when the config was given as a schedule
  Index schedule_q = 0;
  std::vector<Index> base_dilation{1};
};

/// Parses the JSON configuration. "levels" is either an integer K (the
/// schedule is built from "q" and "base_dilation") or an explicit array of
/// {"pool": p, "dilation": [..]} entries. Bad values raise invalid_argument.
PipelineConfig parse_pipeline_config(const nlohmann::json& j);

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// The fully resolved configuration, as written into run manifests.
nlohmann::json pipeline_config_json(const PipelineConfig& cfg);

}  // namespace ran
