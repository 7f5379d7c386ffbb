#include "curbloc/point_cloud.hpp"

#include "curbloc/errors.hpp"

namespace curbloc {

PointCloud3::PointCloud3(std::vector<Point3> points, FrameId frame)
    : points_(std::move(points)), frame_(std::move(frame)) {
  for (const auto& p : points_) {
    if (!p.allFinite()) {
      throw InvalidArgumentError("point cloud coordinates must be finite");
    }
  }
}

void PointCloud3::push_back(const Point3& p) {
  if (!p.allFinite()) {
    throw InvalidArgumentError("point cloud coordinates must be finite");
  }
  points_.push_back(p);
}

void PointCloud3::append(const PointCloud3& other) {
  if (other.frame_ != frame_) {
    throw FrameMismatchError("cannot append cloud in frame " + other.frame_.str() +
                             " to cloud in frame " + frame_.str());
  }
  points_.insert(points_.end(), other.points_.begin(), other.points_.end());
}

Point3 PointCloud3::centroid() const {
  Point3 sum = Point3::Zero();
  for (const auto& p : points_) sum += p;
  return points_.empty() ? sum : Point3(sum / static_cast<double>(points_.size()));
}

PointCloud3 apply(const Pose& T, const PointCloud3& c) {
  if (c.frame() != T.child_frame()) {
    throw FrameMismatchError("cannot apply " + T.parent_frame().str() + "<-" +
                             T.child_frame().str() + " to a cloud in frame " + c.frame().str());
  }
  const Eigen::Matrix3d R = T.rotation_matrix();
  const Eigen::Vector3d& t = T.translation();
  std::vector<Point3> out;
  out.reserve(c.size());
  for (const auto& p : c) out.emplace_back(R * p + t);
  return PointCloud3(std::move(out), T.parent_frame());
}

bool Aabb::intersects_ball(const Point3& center, double radius) const {
  if (!valid()) return false;
  const Point3 closest = center.cwiseMax(min).cwiseMin(max);
  return (closest - center).squaredNorm() <= radius * radius;
}

Aabb bounding_box(std::span<const Point3> points) {
  Aabb box;
  for (const auto& p : points) box.extend(p);
  return box;
}

}  // namespace curbloc
