#include "curbloc/ndt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// Per-stage view of the grid: information matrices of the cell Gaussians
// convolved with an isotropic kernel, and the neighbourhood radius.
struct SmoothedModel {
  std::vector<Eigen::Matrix3d> information;
  double radius = 1.0;
};

SmoothedModel smooth(const NdtGrid& grid, double sigma) {
  SmoothedModel model;
  model.radius = grid.cell_size() + 3.0 * sigma;
  model.information.reserve(grid.cells().size());
  for (const auto& cell : grid.cells()) {
    if (sigma > 0.0) {
      model.information.push_back(
          (cell.covariance + sigma * sigma * Eigen::Matrix3d::Identity()).inverse());
    } else {
      model.information.push_back(cell.information);
    }
  }
  return model;
}

NdtObjective evaluate(std::span<const Point3> transformed, const NdtGrid& grid,
                      const SmoothedModel& model, const Point3& center, bool derivatives) {
  NdtObjective obj;
  Eigen::Matrix<double, 3, 6> J;
  J.leftCols<3>().setIdentity();
  for (const auto& q : transformed) {
    const Point3 r = q - center;
    if (derivatives) J.rightCols<3>() = -so3::hat(r);
    for (const auto c : grid.cells_near(q, model.radius)) {
      const Eigen::Matrix3d& A = model.information[c];
      const Point3 e = q - grid.cells()[c].mean;
      const Point3 w = A * e;
      const double f = std::exp(-0.5 * e.dot(w));
      obj.value += f;
      if (!derivatives || f < 1e-12) continue;
      const Vector6d jw = J.transpose() * w;
      obj.gradient -= f * jw;
      Matrix6d h = J.transpose() * A * J - jw * jw.transpose();
      // Second-order term of the rotation acting on r.
      h.bottomRightCorner<3, 3>() +=
          0.5 * (w * r.transpose() + r * w.transpose()) - w.dot(r) * Eigen::Matrix3d::Identity();
      obj.neg_hessian += f * h;
    }
  }
  return obj;
}

// x -> Exp(dphi) (x - c) + c + dt, as a pose in `frame`.
Pose perturbation(const Vector6d& delta, const Point3& center, const FrameId& frame) {
  const Eigen::Quaterniond dq = so3::exp(delta.tail<3>());
  const Eigen::Vector3d t = center - dq * center + delta.head<3>();
  return Pose(dq, t, frame, frame);
}

std::vector<Point3> transform_all(const Pose& T, std::span<const Point3> pts) {
  std::vector<Point3> out;
  out.reserve(pts.size());
  const Eigen::Matrix3d R = T.rotation_matrix();
  for (const auto& p : pts) out.emplace_back(R * p + T.translation());
  return out;
}

double score_points(std::span<const Point3> pts, const NdtGrid& grid) {
  if (pts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : pts) {
    double best = 0.0;
    for (const auto c : grid.cells_near(p, grid.cell_size())) {
      const NdtCell& cell = grid.cells()[c];
      const Point3 e = p - cell.mean;
      best = std::max(best, std::exp(-0.5 * e.dot(cell.information * e)));
    }
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

}  // namespace

std::size_t NdtGrid::KeyHash::operator()(const Key& k) const {
  std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
  h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
  h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
  return static_cast<std::size_t>(h);
}

NdtGrid::Key NdtGrid::key_of(const Point3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_size_))};
}

NdtGrid NdtGrid::build(const PointCloud3& reference, const NdtConfig& cfg) {
  if (reference.empty()) throw InvalidArgumentError("NDT reference cloud is empty");
  if (!(cfg.cell_size > 0.0)) throw InvalidArgumentError("NDT cell size must be positive");
  NdtGrid grid;
  grid.cell_size_ = cfg.cell_size;
  grid.frame_ = reference.frame();

  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> members;
  std::vector<Key> order;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const Key k = grid.key_of(reference[i]);
    auto [it, inserted] = members.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(i);
  }
  const auto min_points = static_cast<std::size_t>(std::max(cfg.min_cell_points, 1));
  for (const Key& k : order) {
    const auto& idx = members[k];
    if (idx.size() < min_points) continue;
    NdtCell cell;
    cell.count = idx.size();
    for (const auto i : idx) cell.mean += reference[i];
    cell.mean /= static_cast<double>(idx.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto i : idx) {
      const Point3 d = reference[i] - cell.mean;
      cov += d * d.transpose();
    }
    if (idx.size() > 1) cov /= static_cast<double>(idx.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d values = eig.eigenvalues().cwiseMax(0.0);
    values(2) = std::max(values(2), cfg.min_major_variance);
    const double floor = std::max(cfg.eps_reg * values.maxCoeff(), cfg.min_variance);
    values = values.cwiseMax(floor);
    if (!(values.minCoeff() > 0.0)) {
      throw NumericalError("NDT covariance floor must be positive");
    }
    cell.covariance = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    cell.information =
        eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    grid.lookup_.emplace(k, grid.cells_.size());
    grid.cells_.push_back(cell);
    grid.means_.push_back(cell.mean);
  }
  if (grid.cells_.empty()) {
    throw DegenerateReferenceError("no NDT cell holds at least " + std::to_string(min_points) +
                                   " reference points");
  }
  grid.mean_tree_ = std::make_unique<KdTree>(grid.means_);
  return grid;
}

const NdtCell* NdtGrid::containing(const Point3& p) const {
  const auto it = lookup_.find(key_of(p));
  return it == lookup_.end() ? nullptr : &cells_[it->second];
}

std::vector<std::size_t> NdtGrid::cells_near(const Point3& p, double radius) const {
  return mean_tree_ ? mean_tree_->radius_search(p, radius) : std::vector<std::size_t>{};
}

NdtGrid build_grid(const PointCloud3& reference, const NdtConfig& cfg) {
  return NdtGrid::build(reference, cfg);
}

double matching_score(const PointCloud3& aligned_input, const NdtGrid& grid) {
  if (aligned_input.frame() != grid.frame()) {
    throw FrameMismatchError("matching score: input in " + aligned_input.frame().str() +
                             ", grid in " + grid.frame().str());
  }
  return score_points(aligned_input.points(), grid);
}

std::pair<PointCloud3, PointCloud3> remove_outliers(const PointCloud3& input,
                                                    const PointCloud3& reference, double ratio) {
  if (!(ratio >= 0.0 && ratio < 0.5)) {
    throw InvalidArgumentError("outlier ratio must lie in [0, 0.5)");
  }
  auto prune = [ratio](const PointCloud3& cloud, const PointCloud3& other) {
    const auto n = cloud.size();
    const auto drop = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n) - 1e-9));
    if (drop == 0 || other.empty()) return cloud;
    const KdTree tree(other.points());
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = tree.nearest(cloud[i]).distance;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
    std::vector<bool> removed(n, false);
    for (std::size_t k = 0; k < std::min(drop, n); ++k) removed[order[k]] = true;
    PointCloud3 kept(cloud.frame());
    kept.reserve(n - std::min(drop, n));
    for (std::size_t i = 0; i < n; ++i) {
      if (!removed[i]) kept.push_back(cloud[i]);
    }
    return kept;
  };
  return {prune(input, reference), prune(reference, input)};
}

NdtObjective evaluate_ndt_objective(std::span<const Point3> transformed, const NdtGrid& grid,
                                    const Point3& center, double smoothing_sigma,
                                    bool derivatives) {
  return evaluate(transformed, grid, smooth(grid, smoothing_sigma), center, derivatives);
}

RegistrationResult register_ndt(const PointCloud3& input, const PointCloud3& reference,
                                const Pose& guess, const NdtConfig& cfg) {
  if (input.frame() != reference.frame()) {
    throw FrameMismatchError("registration clouds must share a frame: " + input.frame().str() +
                             " vs " + reference.frame().str());
  }
  return register_ndt(input, build_grid(reference, cfg), guess, cfg);
}

RegistrationResult register_ndt(const PointCloud3& input, const NdtGrid& grid, const Pose& guess,
                                const NdtConfig& cfg) {
  if (input.empty()) throw InvalidArgumentError("registration input cloud is empty");
  const FrameId& frame = grid.frame();
  if (input.frame() != frame || guess.parent_frame() != frame || guess.child_frame() != frame) {
    throw FrameMismatchError("registration input, reference and guess must share frame " +
                             frame.str());
  }
  const std::span<const Point3> source = input.points();

  Pose current = guess;
  std::vector<Point3> moved = transform_all(current, source);
  const double initial_score = score_points(moved, grid);

  // Rotations act about the centroid of the initially placed input, and are
  // scaled by its RMS radius when measuring step sizes and conditioning.
  Point3 center = Point3::Zero();
  for (const auto& q : moved) center += q;
  center /= static_cast<double>(moved.size());
  double rms = 0.0;
  for (const auto& q : moved) rms += (q - center).squaredNorm();
  const double length = std::max(1.0, std::sqrt(rms / static_cast<double>(moved.size())));

  std::vector<double> schedule = cfg.smoothing_schedule;
  if (schedule.empty()) schedule.push_back(0.0);

  RegistrationResult result;
  bool final_converged = false;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const SmoothedModel model = smooth(grid, schedule[stage]);
    double lambda = cfg.initial_lambda;
    NdtObjective obj = evaluate(moved, grid, model, center, true);
    if (!std::isfinite(obj.value)) throw NumericalError("non-finite NDT objective");
    bool stage_converged = false;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      ++result.iterations;
      if (obj.value <= 0.0) break;  // no reference support at all
      Vector6d diag = obj.neg_hessian.diagonal().cwiseAbs();
      const double diag_floor = std::max(1e-12, 1e-9 * diag.maxCoeff());
      diag = diag.cwiseMax(diag_floor);
      bool improved = false;
      Vector6d delta = Vector6d::Zero();
      while (lambda < 1e12) {
        Matrix6d damped = obj.neg_hessian;
        damped.diagonal() += lambda * diag;
        Eigen::LLT<Matrix6d> llt(damped);
        if (llt.info() != Eigen::Success) {
          lambda *= 10.0;
          continue;
        }
        delta = llt.solve(obj.gradient);
        if (!delta.allFinite()) throw NumericalError("non-finite NDT update");
        const Pose candidate = compose(perturbation(delta, center, frame), current);
        std::vector<Point3> candidate_pts = transform_all(candidate, source);
        NdtObjective cand = evaluate(candidate_pts, grid, model, center, true);
        if (!std::isfinite(cand.value)) throw NumericalError("non-finite NDT objective");
        if (cand.value > obj.value) {
          current = candidate;
          moved = std::move(candidate_pts);
          obj = std::move(cand);
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          break;
        }
        lambda *= 10.0;
      }
      const double step = delta.head<3>().norm() + length * delta.tail<3>().norm();
      if (!improved || step < cfg.conv_tol) {
        stage_converged = true;
        break;
      }
    }
    if (stage + 1 == schedule.size()) {
      final_converged = stage_converged;
      Matrix6d scaled = obj.neg_hessian;
      Vector6d s;
      s << 1.0, 1.0, 1.0, length, length, length;
      scaled = s.asDiagonal().inverse() * scaled * s.asDiagonal().inverse();
      // Column/row scaling of rotation by 1/length puts it in metres.
      Eigen::SelfAdjointEigenSolver<Matrix6d> eig(scaled);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      result.condition_number =
          lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }
  }

  result.score = score_points(moved, grid);
  result.converged = final_converged && result.condition_number <= cfg.max_condition;
  result.T_align = current;
  // The objective and the score weigh neighbouring cells differently; when
  // the optimum scores worse than the guess, the guess is the better answer.
  if (result.score < initial_score) {
    result.T_align = guess;
    result.score = initial_score;
  }
  return result;
}

}  // namespace curbloc
