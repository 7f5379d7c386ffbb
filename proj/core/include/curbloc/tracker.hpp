#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "curbloc/base_map.hpp"
#include "curbloc/curb_map.hpp"
#include "curbloc/kdtree.hpp"
#include "curbloc/ndt.hpp"

namespace curbloc {

using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Diagonal covariance from standard deviations (x, y, z, roll, pitch, yaw).
Matrix6d diagonal_covariance(double sx, double sy, double sz, double sroll, double spitch,
                             double syaw);

struct TrackerConfig {
  double r_lookup = 30.0;
  double yaw_max_deg = 45.0;
  std::size_t min_points = 50;
  double outlier_ratio = 0.1;
  double p_min = 0.45;
  Matrix6d constraint_covariance = default_constraint_covariance();
  double sampling_spacing = 0.3;
  NdtConfig ndt = default_ndt();
  /// Smoothing schedule of a second registration attempt, made when the
  /// first does not converge or scores at most p_min. Empty disables it.
  std::vector<double> retry_schedule = {1.0, 0.3, 0.0};

  static Matrix6d default_constraint_covariance();
  /// Single unsmoothed stage (the prior is already close) and a softer
  /// major-axis floor than the registration default.
  static NdtConfig default_ndt();
  /// Throws InvalidArgumentError on non-positive knobs or p_min outside (0, 1).
  void validate() const;
};

struct PoseConstraint {
  VertexId vertex_id = 0;
  Pose T_estimate{kMapFrame, kBodyFrame};
  Matrix6d covariance = Matrix6d::Identity();
  double score = 0.0;
};

enum class TrackStatus { kAccepted, kNoReference, kTooFewPoints, kLowScore, kRegistrationFailed };

std::string_view to_string(TrackStatus s);

struct TrackDiagnostics {
  double score = 0.0;
  std::size_t detection_points = 0;
  std::size_t reference_points = 0;
  double retrieval_distance = -1.0;  // -1 when nothing was retrieved
  VertexId reference_vertex = -1;
  int iterations = 0;
  bool converged = false;
  bool retried = false;
  double condition_number = 0.0;
  double runtime_ms = 0.0;
};

struct TrackOutcome {
  TrackStatus status = TrackStatus::kNoReference;
  std::optional<PoseConstraint> constraint;
  TrackDiagnostics diagnostics;

  bool accepted() const { return status == TrackStatus::kAccepted; }
};

/// Read-only view of a curb map prepared for tracking: segment samples are
/// computed once and curb-holding vertices are indexed by position.
class LocalizationMap {
 public:
  LocalizationMap(const BaseMap& base, const CurbMap& curbs, double sampling_spacing = 0.3);

  LocalizationMap(const LocalizationMap&) = delete;
  LocalizationMap& operator=(const LocalizationMap&) = delete;

  struct CurbVertex {
    VertexId id;
    Pose T_MB;
  };

  const std::vector<CurbVertex>& curb_vertices() const { return vertices_; }
  const std::vector<CurbSegment>& segments() const { return segments_; }
  const std::vector<PointCloud3>& segment_samples() const { return samples_; }
  double sampling_spacing() const { return spacing_; }

  /// Indices of curb vertices within `radius` of p.
  std::vector<std::size_t> vertices_near(const Point3& p, double radius) const;

 private:
  std::vector<CurbVertex> vertices_;
  std::vector<Point3> positions_;
  std::unique_ptr<KdTree> position_tree_;
  std::vector<CurbSegment> segments_;
  std::vector<PointCloud3> samples_;
  double spacing_;
};

struct RetrievedReference {
  PointCloud3 cloud{kMapFrame};
  VertexId vertex_id = 0;
  double distance = 0.0;
};

/// Closest curb vertex to the prior within r_lookup that passes the yaw gate,
/// and the sampled points of every segment whose box touches the r_lookup
/// ball around it.
std::optional<RetrievedReference> retrieve_reference(const LocalizationMap& map, const Pose& prior,
                                                     const TrackerConfig& cfg);

/// One map-tracking step. `prior` maps body to map; `detection` is in the
/// body frame. Never throws for data-dependent failures.
TrackOutcome track(const Pose& prior, const PointCloud3& detection, const LocalizationMap& map,
                   const TrackerConfig& cfg, VertexId vertex_id = 0);

}  // namespace curbloc
