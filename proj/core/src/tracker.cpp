#include "curbloc/tracker.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

Matrix6d diagonal_covariance(double sx, double sy, double sz, double sroll, double spitch,
                             double syaw) {
  Eigen::Matrix<double, 6, 1> s;
  s << sx, sy, sz, sroll, spitch, syaw;
  return s.cwiseAbs2().asDiagonal();
}

Matrix6d TrackerConfig::default_constraint_covariance() {
  return diagonal_covariance(0.15, 0.15, 0.5, 2.0 * kDegToRad, 2.0 * kDegToRad, 1.0 * kDegToRad);
}

NdtConfig TrackerConfig::default_ndt() {
  NdtConfig cfg;
  cfg.smoothing_schedule = {0.0};
  cfg.min_major_variance = 0.25;
  return cfg;
}

void TrackerConfig::validate() const {
  if (!(r_lookup > 0.0)) throw InvalidArgumentError("r_lookup must be positive");
  if (!(yaw_max_deg > 0.0)) throw InvalidArgumentError("yaw_max must be positive");
  if (min_points == 0) throw InvalidArgumentError("min_points must be positive");
  if (!(outlier_ratio >= 0.0 && outlier_ratio < 0.5)) {
    throw InvalidArgumentError("outlier_ratio must lie in [0, 0.5)");
  }
  if (!(p_min > 0.0 && p_min < 1.0)) throw InvalidArgumentError("P_min must lie in (0, 1)");
  if (!(sampling_spacing > 0.0)) throw InvalidArgumentError("sampling spacing must be positive");
  for (const double s : retry_schedule) {
    if (!(s >= 0.0)) throw InvalidArgumentError("retry smoothing must be non-negative");
  }
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(constraint_covariance);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw InvalidArgumentError("constraint covariance must be positive definite");
  }
}

std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::kAccepted: return "accepted";
    case TrackStatus::kNoReference: return "no_reference";
    case TrackStatus::kTooFewPoints: return "too_few_points";
    case TrackStatus::kLowScore: return "low_score";
    case TrackStatus::kRegistrationFailed: return "registration_failed";
  }
  return "unknown";
}

LocalizationMap::LocalizationMap(const BaseMap& base, const CurbMap& curbs,
                                 double sampling_spacing)
    : segments_(curbs.segments), spacing_(sampling_spacing) {
  if (!(sampling_spacing > 0.0)) throw InvalidArgumentError("sampling spacing must be positive");
  for (const auto& v : base.vertices()) {
    if (!v.holds_curbs()) continue;
    vertices_.push_back({v.id, v.T_MB});
    positions_.push_back(v.T_MB.translation());
  }
  position_tree_ = std::make_unique<KdTree>(positions_);
  samples_.reserve(segments_.size());
  for (const auto& s : segments_) samples_.push_back(sample_spline(s, spacing_));
}

std::vector<std::size_t> LocalizationMap::vertices_near(const Point3& p, double radius) const {
  return position_tree_->radius_search(p, radius);
}

std::optional<RetrievedReference> retrieve_reference(const LocalizationMap& map, const Pose& prior,
                                                     const TrackerConfig& cfg) {
  if (prior.parent_frame() != kMapFrame) {
    throw FrameMismatchError("tracking prior must be expressed in the map frame");
  }
  const Point3 p = prior.translation();
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (const auto i : map.vertices_near(p, cfg.r_lookup)) {
    const auto& v = map.curb_vertices()[i];
    const double d = (v.T_MB.translation() - p).norm();
    if (d > best_distance || (d == best_distance && i > best)) continue;
    double yaw_diff = 0.0;
    try {
      yaw_diff = yaw_difference_deg(prior, v.T_MB);
    } catch (const InvalidArgumentError&) {
      continue;
    }
    if (yaw_diff > cfg.yaw_max_deg) continue;
    best = i;
    best_distance = d;
  }
  if (!std::isfinite(best_distance)) return std::nullopt;

  RetrievedReference out;
  const auto& vertex = map.curb_vertices()[best];
  out.vertex_id = vertex.id;
  out.distance = best_distance;
  const Point3 center = vertex.T_MB.translation();
  for (std::size_t s = 0; s < map.segments().size(); ++s) {
    if (map.segments()[s].bounds.intersects_ball(center, cfg.r_lookup)) {
      out.cloud.append(map.segment_samples()[s]);
    }
  }
  if (out.cloud.empty()) return std::nullopt;
  return out;
}

TrackOutcome track(const Pose& prior, const PointCloud3& detection, const LocalizationMap& map,
                   const TrackerConfig& cfg, VertexId vertex_id) {
  const auto start = std::chrono::steady_clock::now();
  if (detection.frame() != kBodyFrame) {
    throw FrameMismatchError("curb detection must be in the body frame, got " +
                             detection.frame().str());
  }
  if (prior.parent_frame() != kMapFrame || prior.child_frame() != kBodyFrame) {
    throw FrameMismatchError("tracking prior must map body to map");
  }
  TrackOutcome out;
  auto finish = [&](TrackStatus status) {
    out.status = status;
    out.diagnostics.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return out;
  };
  out.diagnostics.detection_points = detection.size();

  const auto reference = retrieve_reference(map, prior, cfg);
  if (!reference) return finish(TrackStatus::kNoReference);
  out.diagnostics.reference_points = reference->cloud.size();
  out.diagnostics.retrieval_distance = reference->distance;
  out.diagnostics.reference_vertex = reference->vertex_id;

  if (detection.size() < cfg.min_points || reference->cloud.size() < cfg.min_points) {
    return finish(TrackStatus::kTooFewPoints);
  }

  const PointCloud3 placed = apply(prior, detection);
  auto [input, ref] = remove_outliers(placed, reference->cloud, cfg.outlier_ratio);

  auto attempt = [&](const NdtConfig& ndt) -> std::optional<RegistrationResult> {
    try {
      return register_ndt(input, ref, Pose::Identity(kMapFrame, kMapFrame), ndt);
    } catch (const DegenerateReferenceError&) {
      return std::nullopt;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };
  auto first = attempt(cfg.ndt);
  if (!cfg.retry_schedule.empty() && (!first || !first->converged || !(first->score > cfg.p_min))) {
    NdtConfig coarse = cfg.ndt;
    coarse.smoothing_schedule = cfg.retry_schedule;
    auto second = attempt(coarse);
    out.diagnostics.retried = true;
    if (second && second->converged &&
        (!first || !first->converged || second->score > first->score)) {
      first = second;
    }
  }
  if (!first) return finish(TrackStatus::kRegistrationFailed);
  const RegistrationResult& reg = *first;
  out.diagnostics.score = reg.score;
  out.diagnostics.iterations = reg.iterations;
  out.diagnostics.converged = reg.converged;
  out.diagnostics.condition_number = reg.condition_number;
  if (!reg.converged) return finish(TrackStatus::kRegistrationFailed);
  if (!(reg.score > cfg.p_min)) return finish(TrackStatus::kLowScore);

  // The registration correction lives in the map frame; expressed as a
  // body-frame correction it composes on the right of the prior.
  const Pose T_align = compose(compose(prior.inverse(), reg.T_align), prior);
  PoseConstraint c;
  c.vertex_id = vertex_id;
  c.T_estimate = compose(prior, T_align);
  c.covariance = cfg.constraint_covariance;
  c.score = reg.score;
  out.constraint = c;
  return finish(TrackStatus::kAccepted);
}

}  // namespace curbloc
