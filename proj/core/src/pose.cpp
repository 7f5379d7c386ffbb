#include "curbloc/pose.hpp"

#include <cmath>
#include <numbers>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidArgumentError("pose rotation quaternion must be finite and non-zero");
  }
  q.coeffs() /= n;
  return q;
}

}  // namespace

Pose::Pose(FrameId parent, FrameId child)
    : rotation_(Eigen::Quaterniond::Identity()),
      translation_(Eigen::Vector3d::Zero()),
      parent_(std::move(parent)),
      child_(std::move(child)) {}

Pose::Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation, FrameId parent,
           FrameId child)
    : rotation_(canonical(rotation)),
      translation_(translation),
      parent_(std::move(parent)),
      child_(std::move(child)) {
  if (!translation_.allFinite()) {
    throw InvalidArgumentError("pose translation must be finite");
  }
}

Pose Pose::FromTranslation(const Eigen::Vector3d& t, FrameId parent, FrameId child) {
  return Pose(Eigen::Quaterniond::Identity(), t, std::move(parent), std::move(child));
}

Pose Pose::FromXYZYaw(double x, double y, double z, double yaw_rad, FrameId parent,
                      FrameId child) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw_rad, Eigen::Vector3d::UnitZ())),
              Eigen::Vector3d(x, y, z), std::move(parent), std::move(child));
}

Pose Pose::FromXYZRPY(double x, double y, double z, double roll, double pitch, double yaw,
                      FrameId parent, FrameId child) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX());
  return Pose(q, Eigen::Vector3d(x, y, z), std::move(parent), std::move(child));
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

double Pose::yaw() const {
  const Eigen::Vector3d x_axis = rotation_ * Eigen::Vector3d::UnitX();
  return std::atan2(x_axis.y(), x_axis.x());
}

double Pose::rotation_angle() const { return so3::log(rotation_).norm(); }

Pose Pose::inverse() const {
  const Eigen::Quaterniond q_inv = rotation_.conjugate();
  return Pose(q_inv, -(q_inv * translation_), child_, parent_);
}

Pose Pose::with_frames(FrameId parent, FrameId child) const {
  return Pose(rotation_, translation_, std::move(parent), std::move(child));
}

Pose compose(const Pose& a, const Pose& b) {
  if (a.child_frame() != b.parent_frame()) {
    throw FrameMismatchError("cannot compose " + a.parent_frame().str() + "<-" +
                             a.child_frame().str() + " with " + b.parent_frame().str() + "<-" +
                             b.child_frame().str());
  }
  return Pose(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation(),
              a.parent_frame(), b.child_frame());
}

double yaw_difference_deg(const Pose& a, const Pose& b) {
  if (a.parent_frame() != b.parent_frame()) {
    throw FrameMismatchError("yaw difference needs a common parent frame, got " +
                             a.parent_frame().str() + " and " + b.parent_frame().str());
  }
  const Eigen::Vector3d xa = a.rotation() * Eigen::Vector3d::UnitX();
  const Eigen::Vector3d xb = b.rotation() * Eigen::Vector3d::UnitX();
  const Eigen::Vector2d ha = xa.head<2>();
  const Eigen::Vector2d hb = xb.head<2>();
  constexpr double kMinProjection = 1e-9;
  if (ha.norm() < kMinProjection || hb.norm() < kMinProjection) {
    throw InvalidArgumentError("yaw undefined: body x-axis is vertical");
  }
  const double cross = ha.x() * hb.y() - ha.y() * hb.x();
  const double dot = ha.dot(hb);
  return std::abs(std::atan2(cross, dot)) * 180.0 / std::numbers::pi;
}

namespace so3 {

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Quaterniond exp(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double real;
  double imag_scale;
  if (theta < 1e-8) {
    real = 1.0 - theta2 / 8.0;
    imag_scale = 0.5 - theta2 / 48.0;
  } else {
    real = std::cos(0.5 * theta);
    imag_scale = std::sin(0.5 * theta) / theta;
  }
  Eigen::Quaterniond q(real, imag_scale * w.x(), imag_scale * w.y(), imag_scale * w.z());
  q.normalize();
  return q;
}

Eigen::Vector3d log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  const Eigen::Vector3d v = q.vec();
  const double n = v.norm();
  const double w = q.w();
  if (n < 1e-8) {
    // atan2(n, w) / n expanded around n = 0
    return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
  }
  return (2.0 * std::atan2(n, w) / n) * v;
}

Eigen::Vector3d log(const Eigen::Matrix3d& R) { return log(Eigen::Quaterniond(R)); }

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d W = hat(w);
  double coeff;
  if (theta2 < 1e-10) {
    coeff = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double theta = std::sqrt(theta2);
    coeff = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Eigen::Matrix3d::Identity() + 0.5 * W + coeff * W * W;
}

}  // namespace so3

}  // namespace curbloc
