#pragma once

#include <optional>
#include <string>
#include <vector>

#include "curbloc/base_map.hpp"
#include "curbloc/localizer.hpp"
#include "curbloc/pose.hpp"

namespace curbloc {

struct TrajectorySample {
  TimestampNs timestamp = 0;
  Pose pose{kMapFrame, kBodyFrame};
  bool localized = true;
};

struct ErrorStats {
  double median = 0.0;
  double p90 = 0.0;
};

struct RunMetrics {
  double recall_pct = 0.0;
  double distance = 0.0;
  std::size_t frames = 0;
  std::size_t localized_frames = 0;
  ErrorStats planar;       // m
  ErrorStats lateral;      // m
  ErrorStats orientation;  // deg
  ErrorStats vertical;     // m
};

/// Linear-interpolated percentile, q in [0, 100]. Throws on empty input.
double percentile(std::vector<double> values, double q);

/// Errors over localized frames; recall over travelled ground-truth
/// distance. Throws InvalidArgumentError when timestamps differ.
RunMetrics evaluate(const std::vector<TrajectorySample>& estimates,
                    const std::vector<TrajectorySample>& truth);

/// Recall restricted to frames whose index is flagged in `mask`.
double masked_recall(const std::vector<TrajectorySample>& estimates,
                     const std::vector<TrajectorySample>& truth, const std::vector<bool>& mask);

struct RuntimeReport {
  std::size_t tracked_frames = 0;
  double curb_tracking_ms = 0.0;
  double graph_update_ms = 0.0;

  bool empty() const { return tracked_frames == 0; }
};

RuntimeReport runtime_report(const std::vector<FrameRecord>& run);

std::vector<TrajectorySample> to_trajectory(const std::vector<FrameRecord>& run);
std::vector<TrajectorySample> ground_truth(const std::vector<DriveFrame>& frames);

/// Rounds to `decimals`, strips trailing zeros but keeps one decimal.
std::string format_number(double v, int decimals = 2);

/// "recall | p_xy [p90], p_y [p90] | theta [p90]".
std::string format_table_row(const RunMetrics& m);

}  // namespace curbloc
