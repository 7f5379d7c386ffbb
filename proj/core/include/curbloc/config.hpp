#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "curbloc/curb_map.hpp"
#include "curbloc/localizer.hpp"
#include "curbloc/parameterization.hpp"
#include "curbloc/sim.hpp"

namespace curbloc {

/// Every tunable of the toolkit. Missing keys in a config file keep these
/// defaults; unknown keys are rejected.
struct AppConfig {
  ParameterizationConfig parameterization;
  LocalizerConfig localizer;
  TimestampNs max_time_gap = kDefaultMaxTimeGap;
  std::size_t keyframe_stride = 5;
  /// Synthetic world (loop of streets) and drive noise for `simulate`.
  double world_width = 700.0;
  double world_height = 300.0;
  WorldSpec world = loop_world_spec(0);
  DriveNoise drive;
};

std::string config_to_json(const AppConfig& cfg);
/// Applies the keys of `json` on top of the defaults. Throws FormatError.
AppConfig config_from_json(const std::string& json);

AppConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const AppConfig& cfg);

}  // namespace curbloc
