#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "curbloc/pose.hpp"

namespace curbloc {

using Point3 = Eigen::Vector3d;

/// Ordered 3D points tagged with the frame they are expressed in.
/// All coordinates are finite; insertion of a non-finite point throws.
class PointCloud3 {
 public:
  PointCloud3() = default;
  explicit PointCloud3(FrameId frame) : frame_(std::move(frame)) {}
  PointCloud3(std::vector<Point3> points, FrameId frame);

  const FrameId& frame() const { return frame_; }
  std::span<const Point3> points() const { return points_; }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  void reserve(std::size_t n) { points_.reserve(n); }
  void push_back(const Point3& p);
  /// Appends every point of `other`; frames must agree.
  void append(const PointCloud3& other);

  Point3 centroid() const;

  friend bool operator==(const PointCloud3&, const PointCloud3&) = default;

 private:
  std::vector<Point3> points_;
  FrameId frame_;
};

/// Maps every point p to R p + t. Requires c.frame() == T.child_frame(); the
/// result carries T.parent_frame().
PointCloud3 apply(const Pose& T, const PointCloud3& c);

/// Axis-aligned box.
struct Aabb {
  Point3 min = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 max = Point3::Constant(-std::numeric_limits<double>::infinity());

  bool valid() const { return (min.array() <= max.array()).all(); }
  void extend(const Point3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  /// True if the ball (center, radius) touches the box.
  bool intersects_ball(const Point3& center, double radius) const;

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

Aabb bounding_box(std::span<const Point3> points);

}  // namespace curbloc
