#pragma once

// Run configuration, loaded from JSON. The schema is published in
// docs/config.schema.json; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvc/costmodel.hpp"
#include "pvc/encoder.hpp"

namespace pvc {

struct RunConfig {
  EncoderConfig encoder;
  LlmProxy llm;
  std::uint64_t seed = 0;
  std::size_t height = 1024;
  std::size_t width = 1024;
  std::vector<SweepPlan> sweep;
  std::string output_dir;
};

WtcPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WtcPlan& plan);

EncoderConfig encoder_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EncoderConfig& config);

/// Parses and validates; every violation raises ValidationError with the
/// offending key in the message.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace pvc
