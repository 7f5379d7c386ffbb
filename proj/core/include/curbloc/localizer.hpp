#pragma once

#include <optional>
#include <vector>

#include "curbloc/pose_graph.hpp"
#include "curbloc/sim.hpp"
#include "curbloc/tracker.hpp"

namespace curbloc {

struct LocalizerConfig {
  TrackerConfig tracker;
  PoseGraphConfig graph;
  /// When false only the visual availability flag localizes a frame.
  bool curb_tracking = true;
};

struct FrameRecord {
  TimestampNs timestamp = 0;
  Pose estimate{kMapFrame, kBodyFrame};
  bool visual_available = false;
  std::optional<TrackOutcome> outcome;  // empty when curb tracking is off
  bool localized = false;
  double tracking_ms = 0.0;
  double graph_ms = 0.0;
};

/// A frame counts as localized when the visual pipeline reports success or
/// its curb alignment was accepted.
bool localization_success(bool visual_available, const std::optional<TrackOutcome>& outcome);

/// Online localization: odometry prediction, curb tracking against `map`,
/// windowed graph optimisation. `initial` seeds the first vertex, which is
/// held fixed.
std::vector<FrameRecord> localize(const std::vector<DriveFrame>& frames, const Pose& initial,
                                  const LocalizationMap& map, const LocalizerConfig& cfg);

}  // namespace curbloc
