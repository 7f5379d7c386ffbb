#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "curbloc/bspline.hpp"
#include "curbloc/point_cloud.hpp"

namespace curbloc {

struct ParameterizationConfig {
  double voxel_leaf = 0.3;
  double cluster_tolerance = 2.0;
  double max_segment_extent = 20.0;
  double ratio_threshold = 4.0;
  double wide_width_threshold = 3.0;
  double control_points_per_meter = 0.25;
  int min_control_points = 4;
  int wide_control_points = 20;
  int ransac_iterations = 10;
  double sample_fraction = 1.0 / 3.0;
  double min_goodness = 0.5;
  int min_fit_points = 10;
  double inlier_distance = 0.3;
  double sampling_spacing = 0.3;
  int refinement_passes = 2;
};

/// Extents of a point set along its first two right-singular directions.
struct SegmentShape {
  double length = 0.0;
  double width = 0.0;
  double ratio = 0.0;  // +inf when width == 0
  Point3 centroid = Point3::Zero();
  Point3 axis = Point3::UnitX();  // first singular direction
};

enum class SegmentKind { kSpline, kRaw };

enum class FallbackReason { kNone, kTooFewPoints, kLowRatio, kSingular, kLowGoodness };

/// Compressed curb piece in the map frame: either the control points of an
/// open clamped cubic B-spline or the points it was built from.
struct CurbSegment {
  SegmentKind kind = SegmentKind::kRaw;
  std::vector<Point3> control_points;
  std::vector<double> knots;
  PointCloud3 raw_points{kMapFrame};
  double goodness = 0.0;
  Aabb bounds;
  FallbackReason fallback = FallbackReason::kNone;

  bool is_spline() const { return kind == SegmentKind::kSpline; }
  CubicBSpline spline() const { return CubicBSpline(control_points, knots); }
  /// Control points for splines, raw points otherwise.
  std::size_t stored_point_count() const {
    return is_spline() ? control_points.size() : raw_points.size();
  }

  friend bool operator==(const CurbSegment&, const CurbSegment&) = default;
};

/// Means of the points falling into each occupied cubic voxel of edge
/// `leaf`, ordered by voxel index. When `membership` is given it receives the
/// output index of every input point.
PointCloud3 voxel_subsample(const PointCloud3& cloud, double leaf,
                            std::vector<std::size_t>* membership = nullptr);

/// Two-step clustering: Euclidean clusters with `tolerance`, each split along
/// its principal axis into pieces of at most `max_extent`, then re-split into
/// connected parts. Returns index lists into `cloud` forming a partition.
std::vector<std::vector<std::size_t>> cluster_segment_indices(const PointCloud3& cloud,
                                                              double tolerance,
                                                              double max_extent);

std::vector<PointCloud3> cluster_segments(const PointCloud3& cloud, double tolerance = 2.0,
                                          double max_extent = 20.0);

/// Throws InvalidArgumentError for fewer than two points.
SegmentShape segment_shape(const PointCloud3& cluster);

/// Control-point budget for a segment of the given shape.
int control_point_count(const SegmentShape& shape, const ParameterizationConfig& cfg);

/// Least-squares fit of an open clamped cubic B-spline with `control_count`
/// control points to `points`, using chord-length parameters ordered along
/// `axis` and `refinement_passes` foot-point updates. Returns nullopt when the
/// system is rank deficient.
std::optional<CubicBSpline> fit_bspline_least_squares(std::span<const Point3> points,
                                                      const Point3& axis, int control_count,
                                                      int refinement_passes);

/// RANSAC-style spline fit of one sub-cluster, falling back to raw points.
CurbSegment fit_spline(const PointCloud3& cluster, const SegmentShape& shape,
                       const ParameterizationConfig& cfg, std::uint64_t seed);

/// Fraction of samples near a raw point times fraction of raw points near a
/// sample.
double goodness_score(std::span<const Point3> spline_samples, std::span<const Point3> raw,
                      double inlier_distance);

/// Samples `segment` at `spacing` and scores it against `raw`.
double goodness_score(const CurbSegment& segment, const PointCloud3& raw, double inlier_distance,
                      double spacing = 0.3);

/// Arc-length uniform samples of a spline segment (raw segments return their
/// points unchanged).
PointCloud3 sample_spline(const CurbSegment& segment, double spacing);

struct ParameterizationResult {
  std::vector<CurbSegment> segments;
  PointCloud3 subsampled{kMapFrame};
  /// For every input point, its index in `subsampled`.
  std::vector<std::size_t> voxel_membership;
  /// For every segment, indices into `subsampled` of its source cluster.
  std::vector<std::vector<std::size_t>> segment_members;

  std::size_t stored_point_count() const;
};

/// Full pipeline over a map-frame raw cloud. The per-segment RNG seed is
/// derived from `seed` and the segment index.
ParameterizationResult parameterize(const PointCloud3& raw_map_cloud,
                                    const ParameterizationConfig& cfg, std::uint64_t seed);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace curbloc
