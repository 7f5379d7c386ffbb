#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <compare>
#include <string>
#include <utility>

namespace curbloc {

/// Name of a coordinate frame. Operations combining poses and clouds check
/// these at their boundary and throw FrameMismatchError on disagreement.
class FrameId {
 public:
  FrameId() = default;
  explicit FrameId(std::string name) : name_(std::move(name)) {}

  const std::string& str() const { return name_; }

  friend bool operator==(const FrameId&, const FrameId&) = default;
  friend auto operator<=>(const FrameId&, const FrameId&) = default;

 private:
  std::string name_;
};

inline const FrameId kMapFrame{"map"};
inline const FrameId kBodyFrame{"body"};

/// Rigid transform taking coordinates in `child_frame` to `parent_frame`,
/// i.e. p_parent = R * p_child + t.
class Pose {
 public:
  Pose(FrameId parent, FrameId child);
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation, FrameId parent,
       FrameId child);

  static Pose Identity(FrameId parent, FrameId child) {
    return Pose(std::move(parent), std::move(child));
  }
  static Pose FromTranslation(const Eigen::Vector3d& t, FrameId parent, FrameId child);
  static Pose FromXYZYaw(double x, double y, double z, double yaw_rad, FrameId parent,
                         FrameId child);
  static Pose FromXYZRPY(double x, double y, double z, double roll, double pitch, double yaw,
                         FrameId parent, FrameId child);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  const Eigen::Vector3d& translation() const { return translation_; }
  const FrameId& parent_frame() const { return parent_; }
  const FrameId& child_frame() const { return child_; }

  Eigen::Matrix4d matrix() const;

  /// Heading of the body x-axis projected to the ground plane, radians.
  double yaw() const;

  /// Geodesic rotation angle in radians, [0, pi].
  double rotation_angle() const;

  Pose inverse() const;

  Eigen::Vector3d transform_point(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  Pose with_frames(FrameId parent, FrameId child) const;

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
  FrameId parent_;
  FrameId child_;
};

/// a * b. Requires a.child_frame() == b.parent_frame().
Pose compose(const Pose& a, const Pose& b);

/// Absolute heading difference of the ground-projected body x-axes, degrees
/// in [0, 180]. Both poses must share a parent frame.
double yaw_difference_deg(const Pose& a, const Pose& b);

namespace so3 {

Eigen::Matrix3d hat(const Eigen::Vector3d& w);
Eigen::Quaterniond exp(const Eigen::Vector3d& w);
Eigen::Vector3d log(const Eigen::Quaterniond& q);
Eigen::Vector3d log(const Eigen::Matrix3d& R);
/// Inverse of the right Jacobian of SO(3) at `w`.
Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& w);

}  // namespace so3

}  // namespace curbloc
