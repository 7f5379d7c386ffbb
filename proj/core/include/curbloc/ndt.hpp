#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "curbloc/kdtree.hpp"
#include "curbloc/point_cloud.hpp"
#include "curbloc/pose.hpp"

namespace curbloc {

struct NdtConfig {
  double cell_size = 1.0;
  int min_cell_points = 3;
  /// Eigenvalues are floored at eps_reg times the largest one ...
  double eps_reg = 0.01;
  /// ... and at this absolute variance (m^2).
  double min_variance = 0.15 * 0.15;
  /// Floor on the largest eigenvalue (m^2). With it the cells along a
  /// straight curb merge into a flat ridge instead of a chain of bumps locked
  /// to the grid.
  double min_major_variance = 0.5;
  int max_iters = 50;
  double conv_tol = 1e-4;
  double max_condition = 1e6;
  double initial_lambda = 1e-3;
  /// Isotropic standard deviations (m) added to every cell covariance, one
  /// optimisation stage per entry, coarse to fine. The last entry is usually 0.
  std::vector<double> smoothing_schedule = {1.0, 0.3, 0.0};
};

struct NdtCell {
  Point3 mean = Point3::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();
  std::size_t count = 0;
};

/// Voxelised Gaussian model of a reference cloud. Immutable once built.
class NdtGrid {
 public:
  static NdtGrid build(const PointCloud3& reference, const NdtConfig& cfg);

  double cell_size() const { return cell_size_; }
  const FrameId& frame() const { return frame_; }
  const std::vector<NdtCell>& cells() const { return cells_; }

  /// Cell whose voxel contains p, or nullptr.
  const NdtCell* containing(const Point3& p) const;

  /// Indices of cells whose mean lies within `radius` of p.
  std::vector<std::size_t> cells_near(const Point3& p, double radius) const;

 private:
  struct Key {
    std::int64_t x, y, z;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  Key key_of(const Point3& p) const;

  double cell_size_ = 1.0;
  FrameId frame_;
  std::vector<NdtCell> cells_;
  std::vector<Point3> means_;  // borrowed by mean_tree_
  std::unordered_map<Key, std::size_t, KeyHash> lookup_;
  std::unique_ptr<KdTree> mean_tree_;
};

NdtGrid build_grid(const PointCloud3& reference, const NdtConfig& cfg = {});

/// Mean over points of exp(-d^2 / 2), d the Mahalanobis distance to the best
/// cell whose mean lies within one cell size; points with no such cell score
/// 0. Looking past the containing voxel keeps points that straddle a cell
/// border from scoring 0.
double matching_score(const PointCloud3& aligned_input, const NdtGrid& grid);

/// Drops from each cloud the ceil(ratio * n) points farthest from the other
/// cloud. Order of the kept points is preserved.
std::pair<PointCloud3, PointCloud3> remove_outliers(const PointCloud3& input,
                                                    const PointCloud3& reference, double ratio);

struct RegistrationResult {
  Pose T_align{FrameId{}, FrameId{}};
  double score = 0.0;
  int iterations = 0;
  bool converged = false;
  double condition_number = 0.0;
};

/// NDT alignment of `input` onto `reference` starting from `guess`. The
/// returned transform maps input coordinates into the reference frame.
RegistrationResult register_ndt(const PointCloud3& input, const PointCloud3& reference,
                                const Pose& guess, const NdtConfig& cfg = {});

/// Same, against a prebuilt grid.
RegistrationResult register_ndt(const PointCloud3& input, const NdtGrid& grid, const Pose& guess,
                                const NdtConfig& cfg = {});

/// Value, gradient and negated Hessian of the smoothed NDT objective with
/// respect to a left perturbation (translation, rotation about `center`) of
/// the already transformed points. Exposed for derivative tests.
struct NdtObjective {
  double value = 0.0;
  Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 6> neg_hessian = Eigen::Matrix<double, 6, 6>::Zero();
};

NdtObjective evaluate_ndt_objective(std::span<const Point3> transformed, const NdtGrid& grid,
                                    const Point3& center, double smoothing_sigma,
                                    bool derivatives = true);

}  // namespace curbloc
