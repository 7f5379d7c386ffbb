#include "curbloc/pose_graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

Matrix6d information_of(const Matrix6d& covariance) {
  Eigen::LLT<Matrix6d> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgumentError("edge covariance must be positive definite");
  }
  return llt.solve(Matrix6d::Identity());
}

}  // namespace

Pose retract(const Pose& x, const Vector6d& delta) {
  return Pose(x.rotation() * so3::exp(delta.tail<3>()), x.translation() + delta.head<3>(),
              x.parent_frame(), x.child_frame());
}

Vector6d absolute_residual(const Pose& x, const Pose& measured, Matrix6d* J) {
  const Eigen::Matrix3d Rz_t = measured.rotation_matrix().transpose();
  Vector6d r;
  r.head<3>() = Rz_t * (x.translation() - measured.translation());
  r.tail<3>() = so3::log(measured.rotation().conjugate() * x.rotation());
  if (J != nullptr) {
    J->setZero();
    J->topLeftCorner<3, 3>() = Rz_t;
    J->bottomRightCorner<3, 3>() = so3::right_jacobian_inverse(r.tail<3>());
  }
  return r;
}

Vector6d odometry_residual(const Pose& xi, const Pose& xj, const Pose& measured, Matrix6d* Ji,
                           Matrix6d* Jj) {
  const Eigen::Matrix3d Ri = xi.rotation_matrix();
  const Eigen::Matrix3d Rj = xj.rotation_matrix();
  const Eigen::Matrix3d Rz_t = measured.rotation_matrix().transpose();
  const Eigen::Vector3d local = Ri.transpose() * (xj.translation() - xi.translation());
  Vector6d r;
  r.head<3>() = Rz_t * (local - measured.translation());
  r.tail<3>() =
      so3::log(measured.rotation().conjugate() * xi.rotation().conjugate() * xj.rotation());
  if (Ji != nullptr || Jj != nullptr) {
    const Eigen::Matrix3d Jr_inv = so3::right_jacobian_inverse(r.tail<3>());
    if (Ji != nullptr) {
      Ji->setZero();
      Ji->topLeftCorner<3, 3>() = -Rz_t * Ri.transpose();
      Ji->topRightCorner<3, 3>() = Rz_t * so3::hat(local);
      Ji->bottomRightCorner<3, 3>() = -Jr_inv * Rj.transpose() * Ri;
    }
    if (Jj != nullptr) {
      Jj->setZero();
      Jj->topLeftCorner<3, 3>() = Rz_t * Ri.transpose();
      Jj->bottomRightCorner<3, 3>() = Jr_inv;
    }
  }
  return r;
}

Vector6d PoseGraphConfig::default_odometry_sigma() {
  constexpr double deg = std::numbers::pi / 180.0;
  Vector6d s;
  s << 0.02, 0.02, 0.05, 0.1 * deg, 0.1 * deg, 0.2 * deg;
  return s;
}

PoseGraph::PoseGraph(PoseGraphConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.window < 2) throw InvalidArgumentError("pose graph window must be at least 2");
}

const GraphVertex& PoseGraph::vertex(VertexId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vertices_.size()) {
    throw InvalidArgumentError("unknown graph vertex " + std::to_string(id));
  }
  return vertices_[static_cast<std::size_t>(id)];
}

VertexId PoseGraph::latest_id() const {
  if (vertices_.empty()) throw EmptyMapError("pose graph has no vertices");
  return vertices_.back().id;
}

VertexId PoseGraph::add_first_vertex(TimestampNs t, const Pose& estimate, bool fixed) {
  if (!vertices_.empty()) throw InvalidArgumentError("pose graph already has a first vertex");
  if (estimate.parent_frame() != kMapFrame || estimate.child_frame() != kBodyFrame) {
    throw FrameMismatchError("graph vertex estimates map body to map");
  }
  vertices_.push_back({0, t, estimate, fixed, false});
  absolute_by_vertex_.emplace_back();
  return 0;
}

Matrix6d PoseGraph::odometry_covariance(const Pose& relative) const {
  const double d = std::max(relative.translation().norm(), cfg_.min_odometry_distance);
  return Matrix6d(cfg_.odometry_sigma_per_meter.cwiseAbs2().asDiagonal()) * d;
}

VertexId PoseGraph::add_odometry(VertexId from, TimestampNs t, const Pose& relative,
                                 const std::optional<Matrix6d>& covariance) {
  if (vertices_.empty()) throw EmptyMapError("add a first vertex before odometry");
  if (from != latest_id()) {
    throw InvalidArgumentError("odometry must start at the latest vertex " +
                               std::to_string(latest_id()) + ", got " + std::to_string(from));
  }
  if (t <= vertices_.back().timestamp) {
    throw InvalidArgumentError("graph vertex timestamps must increase");
  }
  const Pose rel = relative.with_frames(kBodyFrame, kBodyFrame);
  OdometryEdge e;
  e.from = from;
  e.to = from + 1;
  e.relative = rel;
  e.covariance = covariance.value_or(odometry_covariance(rel));
  information_of(e.covariance);
  Pose next = compose(vertices_.back().estimate, rel.with_frames(kBodyFrame, kBodyFrame));
  vertices_.push_back({e.to, t, next.with_frames(kMapFrame, kBodyFrame), false, false});
  absolute_by_vertex_.emplace_back();
  odometry_.push_back(e);
  return e.to;
}

bool PoseGraph::add_constraint(const PoseConstraint& c, ConstraintSource source) {
  return add_absolute({c.vertex_id, c.T_estimate, c.covariance, source});
}

bool PoseGraph::add_absolute(const AbsoluteEdge& e) {
  if (vertices_.empty() || e.vertex < 0 ||
      static_cast<std::size_t>(e.vertex) >= vertices_.size()) {
    throw InvalidArgumentError("constraint on unknown vertex " + std::to_string(e.vertex));
  }
  if (e.measured.parent_frame() != kMapFrame || e.measured.child_frame() != kBodyFrame) {
    throw FrameMismatchError("absolute constraints map body to map");
  }
  information_of(e.covariance);
  if (static_cast<std::size_t>(e.vertex) < window_begin(cfg_.window)) {
    spdlog::warn("dropping constraint on vertex {} outside the optimisation window", e.vertex);
    return false;
  }
  absolute_by_vertex_[static_cast<std::size_t>(e.vertex)].push_back(absolute_.size());
  absolute_.push_back(e);
  vertices_[static_cast<std::size_t>(e.vertex)].localized = true;
  return true;
}

std::size_t PoseGraph::window_begin(std::size_t window) const {
  return vertices_.size() > window ? vertices_.size() - window : 0;
}

double PoseGraph::cost(std::size_t window) const {
  if (vertices_.empty()) return 0.0;
  const std::size_t begin = window_begin(window);
  double total = 0.0;
  for (std::size_t i = begin; i < vertices_.size(); ++i) {
    for (const auto k : absolute_by_vertex_[i]) {
      const auto& e = absolute_[k];
      const Vector6d r = absolute_residual(vertices_[i].estimate, e.measured);
      total += r.dot(information_of(e.covariance) * r);
    }
    if (i > begin) {
      const auto& e = odometry_[i - 1];
      const Vector6d r =
          odometry_residual(vertices_[i - 1].estimate, vertices_[i].estimate, e.relative);
      total += r.dot(information_of(e.covariance) * r);
    }
  }
  return total;
}

OptimizeReport PoseGraph::optimize(std::size_t window) {
  if (window < 2) throw InvalidArgumentError("optimisation window must be at least 2");
  OptimizeReport report;
  if (vertices_.empty()) return report;

  const std::size_t begin = window_begin(window);
  const std::size_t n = vertices_.size() - begin;
  // Free-variable slot of every in-window vertex, or -1 when held fixed.
  std::vector<int> slot(n, -1);
  int free_count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const bool held = k == 0 || vertices_[begin + k].fixed;
    if (!held) slot[k] = free_count++;
  }

  const std::vector<GraphVertex> saved = vertices_;
  auto checked_cost = [&] {
    const double c = cost(window);
    if (!std::isfinite(c)) {
      vertices_ = saved;
      throw NumericalError("non-finite pose graph residual");
    }
    return c;
  };

  double current = checked_cost();
  report.initial_cost = current;
  report.cost_history.push_back(current);
  if (free_count == 0) {
    report.final_cost = current;
    report.converged = true;
    return report;
  }

  const auto dim = static_cast<Eigen::Index>(6 * free_count);
  for (int iter = 0; iter < cfg_.max_iterations; ++iter) {
    ++report.iterations;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    auto add_block = [&](int si, int sj, const Matrix6d& block) {
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) triplets.emplace_back(6 * si + r, 6 * sj + c, block(r, c));
      }
    };
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = begin + k;
      if (slot[k] >= 0) {
        for (const auto a : absolute_by_vertex_[i]) {
          const auto& e = absolute_[a];
          Matrix6d J;
          const Vector6d r = absolute_residual(vertices_[i].estimate, e.measured, &J);
          const Matrix6d W = information_of(e.covariance);
          add_block(slot[k], slot[k], J.transpose() * W * J);
          b.segment<6>(6 * slot[k]) += J.transpose() * W * r;
        }
      }
      if (k > 0 && (slot[k - 1] >= 0 || slot[k] >= 0)) {
        const auto& e = odometry_[i - 1];
        Matrix6d Ji;
        Matrix6d Jj;
        const Vector6d r = odometry_residual(vertices_[i - 1].estimate, vertices_[i].estimate,
                                             e.relative, &Ji, &Jj);
        const Matrix6d W = information_of(e.covariance);
        const int si = slot[k - 1];
        const int sj = slot[k];
        if (si >= 0) {
          add_block(si, si, Ji.transpose() * W * Ji);
          b.segment<6>(6 * si) += Ji.transpose() * W * r;
        }
        if (sj >= 0) {
          add_block(sj, sj, Jj.transpose() * W * Jj);
          b.segment<6>(6 * sj) += Jj.transpose() * W * r;
        }
        if (si >= 0 && sj >= 0) {
          add_block(si, sj, Ji.transpose() * W * Jj);
          add_block(sj, si, Jj.transpose() * W * Ji);
        }
      }
    }
    if (!b.allFinite()) {
      vertices_ = saved;
      throw NumericalError("non-finite pose graph gradient");
    }
    Eigen::SparseMatrix<double> H(dim, dim);
    H.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H);
    if (solver.info() != Eigen::Success) {
      vertices_ = saved;
      throw NumericalError("pose graph normal equations are singular");
    }
    const Eigen::VectorXd delta = solver.solve(-b);
    if (!delta.allFinite()) {
      vertices_ = saved;
      throw NumericalError("non-finite pose graph update");
    }

    // Backtrack so that an accepted step never raises the cost.
    const std::vector<GraphVertex> before = vertices_;
    double step = 1.0;
    bool accepted = false;
    double trial = current;
    for (int halving = 0; halving < 12; ++halving, step *= 0.5) {
      for (std::size_t k = 0; k < n; ++k) {
        if (slot[k] < 0) continue;
        vertices_[begin + k].estimate =
            retract(before[begin + k].estimate, step * delta.segment<6>(6 * slot[k]));
      }
      trial = checked_cost();
      if (trial <= current) {
        accepted = true;
        break;
      }
    }
    report.last_update_norm = step * delta.norm();
    if (!accepted) {
      vertices_ = before;
      report.converged = true;
      break;
    }
    current = trial;
    report.cost_history.push_back(current);
    if (report.last_update_norm < cfg_.update_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.final_cost = current;
  return report;
}

}  // namespace curbloc
