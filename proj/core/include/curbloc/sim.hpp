#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

#include "curbloc/base_map.hpp"
#include "curbloc/point_cloud.hpp"
#include "curbloc/pose.hpp"

namespace curbloc {

using Point2 = Eigen::Vector2d;

struct StreetSpec {
  std::vector<Point2> centerline;
  double lane_width = 8.0;  // curb to curb
};

struct IntersectionSpec {
  Point2 position = Point2::Zero();
  double radius = 8.0;
};

struct WorldSpec {
  std::uint64_t seed = 0;
  std::vector<StreetSpec> streets;
  std::vector<IntersectionSpec> intersections;
  /// Expected detected curb points per metre of visible curb.
  double curb_density = 10.0;
  double curb_height = 0.12;
  /// Driveway gaps: curb runs between gaps are uniform in
  /// [break_min_spacing, break_max_spacing], gap lengths uniform in
  /// [break_min_length, break_max_length]. A zero max spacing disables gaps.
  double break_min_spacing = 20.0;
  double break_max_spacing = 50.0;
  double break_min_length = 2.5;
  double break_max_length = 3.5;
  /// Vehicle path; when closed the last point connects back to the first.
  std::vector<Point2> route;
  bool route_closed = false;
  double turn_radius = 6.0;
};

/// Piece of the vehicle path: a straight line or a circular arc.
struct PathPiece {
  bool arc = false;
  Point2 start = Point2::Zero();
  Point2 end = Point2::Zero();
  Point2 center = Point2::Zero();
  double radius = 0.0;
  double start_angle = 0.0;
  double sweep = 0.0;  // signed, radians
  double length = 0.0;
};

struct World {
  WorldSpec spec;
  /// Curb polylines at curb height, in the map frame.
  std::vector<std::vector<Point3>> curbs;
  std::vector<PathPiece> path;
  double path_length = 0.0;

  /// Ground-truth body pose at arc length s along the path (clamped).
  Pose pose_at(double s) const;
  double curb_length() const;
  /// Curb length over the length the curbs would have without any gap.
  double curb_coverage() const;
};

/// Throws InvalidArgumentError for invalid values or a self-intersecting
/// street or route polyline.
World generate_world(const WorldSpec& spec);

/// Rectangular loop of width x height metres whose four streets run past the
/// corners, giving four four-way intersections.
WorldSpec loop_world_spec(std::uint64_t seed, double width = 700.0, double height = 300.0);

/// One straight street of the given length along +x, driven end to end.
WorldSpec straight_street_spec(std::uint64_t seed, double length = 100.0);

struct DriveNoise {
  std::uint64_t seed = 0;
  /// Odometry random walk per sqrt(metre) on x, y, z.
  double odometry_sigma = 0.02;
  /// Odometry heading random walk, radians per sqrt(metre).
  double odometry_yaw_sigma = 0.0;
  double detection_sigma = 0.05;
  double dropout = 0.2;
  /// Poisson clutter, points per square metre over a disc of clutter_range.
  double clutter_rate = 0.5;
  double clutter_range = 10.0;
  double sensor_range = 30.0;
  double frame_rate_hz = 10.0;
  double speed = 10.0;
  /// Travelled-distance intervals [from, to) without visual localization.
  std::vector<std::pair<double, double>> visual_dropouts;
  bool visual_enabled = true;
};

struct DriveFrame {
  TimestampNs timestamp = 0;
  double distance = 0.0;  // travelled along the path
  Pose gt_pose{kMapFrame, kBodyFrame};
  /// Measured motion since the previous frame; identity on the first frame.
  Pose odom_step{kBodyFrame, kBodyFrame};
  PointCloud3 detection{kBodyFrame};
  bool visual_available = true;
};

/// Drives the whole path once.
std::vector<DriveFrame> simulate_drive(const World& world, const DriveNoise& noise);

/// Noiseless curb points of the world at `density` points per metre plus
/// isotropic noise `sigma`, in the map frame.
PointCloud3 sample_world_curbs(const World& world, double density, double sigma,
                               std::uint64_t seed);

/// Base map of one session: a vertex per frame at its ground-truth pose, with
/// the detections of every `keyframe_stride`-th frame attached.
BaseMap base_map_from_drive(const std::vector<DriveFrame>& frames, SessionId session,
                            VertexId first_id = 0, std::size_t keyframe_stride = 5);

}  // namespace curbloc
