#pragma once

#include <filesystem>
#include <string>

#include "sglens/generator.hpp"
#include "sglens/training.hpp"

namespace sglens {

// A run configuration file:
//   {"preset": "desk" | "reference",
//    "generator": {"latent_size": 64, "blocks": 2, "max_res": 16, "channels": [32,32,16], ...},
//    "train": {"max_iter": 2000, "batch_size": 16, "lr_g": 0.002, "g_loss": "non_saturating", ...}}
// Every section is optional; the preset (default "desk") supplies the rest.
// Unknown keys and ill-typed values raise ConfigError.
struct RunConfig {
  GeneratorConfig generator;
  TrainParams train;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig preset_config(const std::string& name);
std::string to_json(const RunConfig& config);

}  // namespace sglens
