#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "curbloc/base_map.hpp"
#include "curbloc/tracker.hpp"

namespace curbloc {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Tangent ordering everywhere below is (translation, rotation). Poses are
/// perturbed as t <- t + dt, R <- R Exp(dphi).
Pose retract(const Pose& x, const Vector6d& delta);

/// r = (R_z^T (t - t_z), Log(R_z^T R)). `J` receives dr/dx when given.
Vector6d absolute_residual(const Pose& x, const Pose& measured, Matrix6d* J = nullptr);

/// r = (R_z^T (R_i^T (t_j - t_i) - t_z), Log(R_z^T R_i^T R_j)) for the
/// measured relative pose z of j seen from i.
Vector6d odometry_residual(const Pose& xi, const Pose& xj, const Pose& measured,
                           Matrix6d* Ji = nullptr,
                           Matrix6d* Jj = nullptr);

struct PoseGraphConfig {
  std::size_t window = 50;
  int max_iterations = 20;
  double update_tolerance = 1e-6;
  /// Odometry standard deviations per metre travelled (x, y, z, roll, pitch,
  /// yaw); the covariance scales with max(distance, min_odometry_distance).
  Vector6d odometry_sigma_per_meter = default_odometry_sigma();
  double min_odometry_distance = 0.1;

  static Vector6d default_odometry_sigma();
};

struct GraphVertex {
  VertexId id = 0;
  TimestampNs timestamp = 0;
  Pose estimate{kMapFrame, kBodyFrame};
  bool fixed = false;
  bool localized = false;
};

struct OdometryEdge {
  VertexId from = 0;
  VertexId to = 0;
  Pose relative{kBodyFrame, kBodyFrame};
  Matrix6d covariance = Matrix6d::Identity();
};

enum class ConstraintSource { kCurb, kExternal };

struct AbsoluteEdge {
  VertexId vertex = 0;
  Pose measured{kMapFrame, kBodyFrame};
  Matrix6d covariance = Matrix6d::Identity();
  ConstraintSource source = ConstraintSource::kCurb;
};

struct OptimizeReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double last_update_norm = 0.0;
  bool converged = false;
  /// Cost after every accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

/// Chain of body poses linked by odometry, anchored by absolute constraints,
/// optimised over a sliding window whose oldest vertex is held fixed.
class PoseGraph {
 public:
  explicit PoseGraph(PoseGraphConfig cfg = {});

  const PoseGraphConfig& config() const { return cfg_; }
  const std::vector<GraphVertex>& vertices() const { return vertices_; }
  const std::vector<OdometryEdge>& odometry_edges() const { return odometry_; }
  const std::vector<AbsoluteEdge>& absolute_edges() const { return absolute_; }
  const GraphVertex& vertex(VertexId id) const;
  bool empty() const { return vertices_.empty(); }
  VertexId latest_id() const;

  VertexId add_first_vertex(TimestampNs t, const Pose& estimate, bool fixed = true);

  /// Appends a vertex at estimate(from) * relative. `from` must be the latest
  /// vertex. Without an explicit covariance the distance-scaled model is used.
  VertexId add_odometry(VertexId from, TimestampNs t, const Pose& relative,
                        const std::optional<Matrix6d>& covariance = std::nullopt);

  /// Returns false (and logs a warning) when the vertex lies outside the
  /// current window.
  bool add_constraint(const PoseConstraint& c, ConstraintSource source = ConstraintSource::kCurb);
  bool add_absolute(const AbsoluteEdge& e);

  Matrix6d odometry_covariance(const Pose& relative) const;

  OptimizeReport optimize() { return optimize(cfg_.window); }
  /// Gauss-Newton over the last `window` vertices. Throws NumericalError on a
  /// non-finite residual, leaving the estimates untouched.
  OptimizeReport optimize(std::size_t window);

  /// Weighted squared residual over edges touching the last `window` vertices.
  double cost(std::size_t window) const;

 private:
  std::size_t window_begin(std::size_t window) const;

  PoseGraphConfig cfg_;
  std::vector<GraphVertex> vertices_;
  std::vector<OdometryEdge> odometry_;
  std::vector<AbsoluteEdge> absolute_;
  std::vector<std::vector<std::size_t>> absolute_by_vertex_;
};

}  // namespace curbloc
