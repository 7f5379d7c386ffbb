#include "curbloc/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

ErrorStats stats_of(const std::vector<double>& v) {
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  return {percentile(v, 50.0), percentile(v, 90.0)};
}

void check_aligned(const std::vector<TrajectorySample>& a, const std::vector<TrajectorySample>& b) {
  if (a.size() != b.size()) {
    throw InvalidArgumentError("trajectories differ in length: " + std::to_string(a.size()) +
                               " vs " + std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].timestamp != b[i].timestamp) {
      throw InvalidArgumentError("trajectory timestamps differ at frame " + std::to_string(i));
    }
  }
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgumentError("percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgumentError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

RunMetrics evaluate(const std::vector<TrajectorySample>& estimates,
                    const std::vector<TrajectorySample>& truth) {
  check_aligned(estimates, truth);
  RunMetrics m;
  m.frames = estimates.size();
  std::vector<double> planar;
  std::vector<double> lateral;
  std::vector<double> orientation;
  std::vector<double> vertical;
  double localized_distance = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (i > 0) {
      const double d = (truth[i].pose.translation() - truth[i - 1].pose.translation()).norm();
      m.distance += d;
      if (estimates[i].localized) localized_distance += d;
    }
    if (!estimates[i].localized) continue;
    ++m.localized_frames;
    const Eigen::Vector3d e = estimates[i].pose.translation() - truth[i].pose.translation();
    planar.push_back(e.head<2>().norm());
    lateral.push_back(std::abs((truth[i].pose.rotation().conjugate() * e).y()));
    vertical.push_back(std::abs(e.z()));
    orientation.push_back(
        so3::log(truth[i].pose.rotation().conjugate() * estimates[i].pose.rotation()).norm() *
        180.0 / std::numbers::pi);
  }
  if (m.distance > 0.0) {
    m.recall_pct = 100.0 * localized_distance / m.distance;
  } else {
    m.recall_pct = m.frames > 0 && m.localized_frames == m.frames ? 100.0 : 0.0;
  }
  m.planar = stats_of(planar);
  m.lateral = stats_of(lateral);
  m.orientation = stats_of(orientation);
  m.vertical = stats_of(vertical);
  return m;
}

double masked_recall(const std::vector<TrajectorySample>& estimates,
                     const std::vector<TrajectorySample>& truth, const std::vector<bool>& mask) {
  check_aligned(estimates, truth);
  if (mask.size() != estimates.size()) throw InvalidArgumentError("mask length mismatch");
  double total = 0.0;
  double localized = 0.0;
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    if (!mask[i]) continue;
    const double d = (truth[i].pose.translation() - truth[i - 1].pose.translation()).norm();
    total += d;
    if (estimates[i].localized) localized += d;
  }
  return total > 0.0 ? 100.0 * localized / total : 0.0;
}

RuntimeReport runtime_report(const std::vector<FrameRecord>& run) {
  RuntimeReport r;
  double graph = 0.0;
  for (const auto& f : run) {
    graph += f.graph_ms;
    if (!f.outcome) continue;
    ++r.tracked_frames;
    r.curb_tracking_ms += f.tracking_ms;
  }
  if (r.tracked_frames > 0) r.curb_tracking_ms /= static_cast<double>(r.tracked_frames);
  if (!run.empty()) r.graph_update_ms = graph / static_cast<double>(run.size());
  return r;
}

std::vector<TrajectorySample> to_trajectory(const std::vector<FrameRecord>& run) {
  std::vector<TrajectorySample> out;
  out.reserve(run.size());
  for (const auto& f : run) out.push_back({f.timestamp, f.estimate, f.localized});
  return out;
}

std::vector<TrajectorySample> ground_truth(const std::vector<DriveFrame>& frames) {
  std::vector<TrajectorySample> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f.timestamp, f.gt_pose, true});
  return out;
}

std::string format_number(double v, int decimals) {
  if (!std::isfinite(v)) return "-";
  std::string s = fmt::format("{:.{}f}", v, decimals);
  if (s.find('.') == std::string::npos) return s + ".0";
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.push_back('0');
  return s;
}

std::string format_table_row(const RunMetrics& m) {
  return fmt::format("{} | {} [{}], {} [{}] | {} [{}]", format_number(m.recall_pct),
                     format_number(m.planar.median), format_number(m.planar.p90),
                     format_number(m.lateral.median), format_number(m.lateral.p90),
                     format_number(m.orientation.median), format_number(m.orientation.p90));
}

}  // namespace curbloc
