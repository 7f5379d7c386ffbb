#include "curbloc/localizer.hpp"

#include <chrono>

#include "curbloc/errors.hpp"

namespace curbloc {

bool localization_success(bool visual_available, const std::optional<TrackOutcome>& outcome) {
  return visual_available || (outcome && outcome->accepted());
}

std::vector<FrameRecord> localize(const std::vector<DriveFrame>& frames, const Pose& initial,
                                  const LocalizationMap& map, const LocalizerConfig& cfg) {
  cfg.tracker.validate();
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  PoseGraph graph(cfg.graph);
  std::vector<FrameRecord> out;
  out.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const DriveFrame& f = frames[k];
    FrameRecord rec;
    rec.timestamp = f.timestamp;
    rec.visual_available = f.visual_available;

    const VertexId id = k == 0 ? graph.add_first_vertex(f.timestamp, initial)
                               : graph.add_odometry(graph.latest_id(), f.timestamp, f.odom_step);
    if (cfg.curb_tracking) {
      const auto t0 = Clock::now();
      rec.outcome = track(graph.vertex(id).estimate, f.detection, map, cfg.tracker, id);
      rec.tracking_ms = ms_since(t0);
    }
    const auto t1 = Clock::now();
    if (rec.outcome && rec.outcome->constraint) graph.add_constraint(*rec.outcome->constraint);
    graph.optimize();
    rec.graph_ms = ms_since(t1);

    rec.estimate = graph.vertex(id).estimate;
    rec.localized = localization_success(rec.visual_available, rec.outcome);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace curbloc
