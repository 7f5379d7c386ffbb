#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "curbloc/base_map.hpp"
#include "curbloc/curb_map.hpp"
#include "curbloc/localizer.hpp"
#include "curbloc/metrics.hpp"
#include "curbloc/sim.hpp"

namespace curbloc {

inline constexpr int kFileFormatVersion = 1;

/// Writes `path` (JSON) and, for vertices holding observations, one CSV per
/// vertex in `<stem>_clouds/` next to it.
void save_base_map(const std::filesystem::path& path, const BaseMap& map);
/// With `load_clouds` false the observations are skipped but vertices keep
/// their has_curb_data flag.
BaseMap load_base_map(const std::filesystem::path& path, bool load_clouds = true);

/// Segments, sessions and raw point count; per-vertex raw clouds live in the
/// base map and are not repeated.
void save_curb_map(const std::filesystem::path& path, const CurbMap& map);
CurbMap load_curb_map(const std::filesystem::path& path);

/// `dir/manifest.json` plus `dir/frames/NNNNNN.csv`.
void save_dataset(const std::filesystem::path& dir, const std::vector<DriveFrame>& frames);
std::vector<DriveFrame> load_dataset(const std::filesystem::path& dir);

/// timestamp,x,y,z,qw,qx,qy,qz,localized
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectorySample>& samples);
std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path);

/// One JSON object per frame.
void write_diagnostics_jsonl(const std::filesystem::path& path,
                             const std::vector<FrameRecord>& run);
RuntimeReport runtime_from_diagnostics(const std::filesystem::path& path);

struct MetricsRow {
  std::string dataset_id;
  std::string map_sessions;
  RunMetrics metrics;
  RuntimeReport runtime;
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
/// Appends a row, writing the header first when the file is new or empty.
void append_metrics_csv(const std::filesystem::path& path, const MetricsRow& row);

}  // namespace curbloc
