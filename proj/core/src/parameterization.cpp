#include "curbloc/parameterization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include "curbloc/errors.hpp"
#include "curbloc/kdtree.hpp"

namespace curbloc {

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

// Centroid and right-singular directions (columns, decreasing singular value)
// of the mean-centred points.
struct PrincipalFrame {
  Point3 centroid = Point3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
};

PrincipalFrame principal_frame(std::span<const Point3> points,
                               std::span<const std::size_t> subset = {}) {
  const std::size_t n = subset.empty() ? points.size() : subset.size();
  auto at = [&](std::size_t i) -> const Point3& {
    return subset.empty() ? points[i] : points[subset[i]];
  };
  PrincipalFrame frame;
  for (std::size_t i = 0; i < n; ++i) frame.centroid += at(i);
  frame.centroid /= static_cast<double>(n);
  Eigen::MatrixX3d centred(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    centred.row(static_cast<Eigen::Index>(i)) = (at(i) - frame.centroid).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(centred, Eigen::ComputeFullV);
  frame.axes = svd.matrixV();
  for (int c = 0; c < 3; ++c) {
    Eigen::Index largest = 0;
    frame.axes.col(c).cwiseAbs().maxCoeff(&largest);
    if (frame.axes(largest, c) < 0.0) frame.axes.col(c) *= -1.0;
  }
  return frame;
}

PointCloud3 gather(const PointCloud3& cloud, std::span<const std::size_t> idx) {
  std::vector<Point3> pts;
  pts.reserve(idx.size());
  for (const auto i : idx) pts.push_back(cloud[i]);
  return PointCloud3(std::move(pts), cloud.frame());
}

// Connected components of `subset` (indices into points) under `tolerance`.
// Components are ordered by their smallest member; members ascending.
std::vector<std::vector<std::size_t>> euclidean_components(std::span<const Point3> points,
                                                           std::vector<std::size_t> subset,
                                                           double tolerance) {
  std::sort(subset.begin(), subset.end());
  std::vector<Point3> local;
  local.reserve(subset.size());
  for (const auto i : subset) local.push_back(points[i]);
  const KdTree tree(local);

  std::vector<std::size_t> parent(local.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (std::size_t i = 0; i < local.size(); ++i) {
    for (const auto j : tree.radius_search(local[i], tolerance)) {
      const auto ri = find(i);
      const auto rj = find(j);
      if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
    }
  }
  std::vector<std::vector<std::size_t>> components;
  std::unordered_map<std::size_t, std::size_t> root_to_component;
  for (std::size_t i = 0; i < local.size(); ++i) {
    const auto root = find(i);
    auto [it, inserted] = root_to_component.try_emplace(root, components.size());
    if (inserted) components.emplace_back();
    components[it->second].push_back(subset[i]);
  }
  return components;
}

std::vector<Point3> arc_length_table(const CubicBSpline& spline, std::size_t chords,
                                     std::vector<double>& cumulative) {
  std::vector<Point3> pts(chords + 1);
  cumulative.assign(chords + 1, 0.0);
  for (std::size_t j = 0; j <= chords; ++j) {
    pts[j] = spline.evaluate(static_cast<double>(j) / static_cast<double>(chords));
    if (j > 0) cumulative[j] = cumulative[j - 1] + (pts[j] - pts[j - 1]).norm();
  }
  return pts;
}

CurbSegment make_raw_segment(const PointCloud3& cluster, FallbackReason reason, double goodness) {
  CurbSegment seg;
  seg.kind = SegmentKind::kRaw;
  seg.raw_points = cluster;
  seg.goodness = std::clamp(goodness, 0.0, 1.0);
  seg.bounds = bounding_box(cluster.points());
  seg.fallback = reason;
  return seg;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finaliser
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

PointCloud3 voxel_subsample(const PointCloud3& cloud, double leaf,
                            std::vector<std::size_t>* membership) {
  if (!(leaf > 0.0)) throw InvalidArgumentError("voxel leaf size must be positive");
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
  std::vector<VoxelKey> keys;
  std::vector<Point3> sums;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> point_slot(cloud.size());
  slot.reserve(cloud.size() / 2 + 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                       static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                       static_cast<std::int64_t>(std::floor(p.z() / leaf))};
    auto [it, inserted] = slot.try_emplace(key, keys.size());
    if (inserted) {
      keys.push_back(key);
      sums.push_back(Point3::Zero());
      counts.push_back(0);
    }
    sums[it->second] += p;
    ++counts[it->second];
    point_slot[i] = it->second;
  }
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::size_t> rank(keys.size());
  std::vector<Point3> means;
  means.reserve(keys.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = r;
    means.push_back(sums[order[r]] / static_cast<double>(counts[order[r]]));
  }
  if (membership != nullptr) {
    membership->resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) (*membership)[i] = rank[point_slot[i]];
  }
  return PointCloud3(std::move(means), cloud.frame());
}

std::vector<std::vector<std::size_t>> cluster_segment_indices(const PointCloud3& cloud,
                                                              double tolerance,
                                                              double max_extent) {
  if (!(tolerance > 0.0) || !(max_extent > 0.0)) {
    throw InvalidArgumentError("cluster tolerance and extent must be positive");
  }
  std::vector<std::vector<std::size_t>> result;
  if (cloud.empty()) return result;
  std::vector<std::size_t> all(cloud.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto coarse = euclidean_components(cloud.points(), all, tolerance);

  for (const auto& cluster : coarse) {
    if (cluster.size() < 2) {
      result.push_back(cluster);
      continue;
    }
    const PrincipalFrame frame = principal_frame(cloud.points(), cluster);
    const Point3 axis = frame.axes.col(0);
    std::vector<double> proj(cluster.size());
    for (std::size_t i = 0; i < cluster.size(); ++i) proj[i] = (cloud[cluster[i]] - frame.centroid).dot(axis);
    const auto [lo_it, hi_it] = std::minmax_element(proj.begin(), proj.end());
    const double lo = *lo_it;
    const double extent = *hi_it - lo;
    const auto pieces = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(extent / max_extent - 1e-9)));
    const double width = extent / static_cast<double>(pieces);
    std::vector<std::vector<std::size_t>> bins(pieces);
    for (std::size_t i = 0; i < cluster.size(); ++i) {
      std::size_t b = width > 0.0 ? static_cast<std::size_t>((proj[i] - lo) / width) : 0;
      bins[std::min(b, pieces - 1)].push_back(cluster[i]);
    }
    for (auto& bin : bins) {
      if (bin.empty()) continue;
      for (auto& part : euclidean_components(cloud.points(), std::move(bin), tolerance)) {
        result.push_back(std::move(part));
      }
    }
  }
  return result;
}

std::vector<PointCloud3> cluster_segments(const PointCloud3& cloud, double tolerance,
                                          double max_extent) {
  std::vector<PointCloud3> out;
  for (const auto& idx : cluster_segment_indices(cloud, tolerance, max_extent)) {
    out.push_back(gather(cloud, idx));
  }
  return out;
}

SegmentShape segment_shape(const PointCloud3& cluster) {
  if (cluster.size() < 2) throw InvalidArgumentError("segment shape needs at least two points");
  const PrincipalFrame frame = principal_frame(cluster.points());
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[1]};
  for (const auto& p : cluster) {
    const Point3 d = p - frame.centroid;
    for (int k = 0; k < 2; ++k) {
      const double s = d.dot(frame.axes.col(k));
      lo[k] = std::min(lo[k], s);
      hi[k] = std::max(hi[k], s);
    }
  }
  SegmentShape shape;
  shape.centroid = frame.centroid;
  shape.axis = frame.axes.col(0);
  shape.length = hi[0] - lo[0];
  shape.width = hi[1] - lo[1];
  if (shape.width > shape.length) std::swap(shape.width, shape.length);
  // Round-off residue of exactly collinear input.
  if (shape.width <= 1e-12 * std::max(1.0, shape.length)) shape.width = 0.0;
  shape.ratio = shape.width > 0.0 ? shape.length / shape.width
                                  : std::numeric_limits<double>::infinity();
  return shape;
}

int control_point_count(const SegmentShape& shape, const ParameterizationConfig& cfg) {
  if (shape.width > cfg.wide_width_threshold) return cfg.wide_control_points;
  const int proportional =
      static_cast<int>(std::lround(cfg.control_points_per_meter * shape.length));
  return std::max(cfg.min_control_points, proportional);
}

std::optional<CubicBSpline> fit_bspline_least_squares(std::span<const Point3> points,
                                                      const Point3& axis, int control_count,
                                                      int refinement_passes) {
  const auto n = points.size();
  const auto m = static_cast<std::size_t>(control_count);
  if (control_count < CubicBSpline::kOrder || n < m) return std::nullopt;

  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> proj(n);
  for (std::size_t i = 0; i < n; ++i) proj[i] = (points[i] - centroid).dot(axis);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });

  Eigen::MatrixX3d X(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) X.row(static_cast<Eigen::Index>(i)) = points[order[i]].transpose();

  std::vector<double> u(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    u[i] = u[i - 1] + (X.row(static_cast<Eigen::Index>(i)) - X.row(static_cast<Eigen::Index>(i - 1))).norm();
  }
  const double total = u.back();
  if (!(total > 0.0)) return std::nullopt;
  for (auto& v : u) v /= total;

  const std::vector<double> knots = CubicBSpline::clamped_uniform_knots(m);
  std::optional<CubicBSpline> fitted;
  for (int pass = 0; pass <= refinement_passes; ++pass) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t span = CubicBSpline::find_span(knots, m, u[i]);
      const auto N = CubicBSpline::basis(knots, span, u[i]);
      for (int k = 0; k < CubicBSpline::kOrder; ++k) {
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(span - CubicBSpline::kDegree + k)) = N[k];
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-9);
    if (qr.rank() < static_cast<Eigen::Index>(m)) break;
    const Eigen::MatrixX3d P = qr.solve(X);
    if (!P.allFinite()) break;
    // A nearly empty knot span lets its control point run away; treat that
    // like a singular system.
    const Eigen::RowVector3d lo = X.colwise().minCoeff();
    const Eigen::RowVector3d hi = X.colwise().maxCoeff();
    const double reach = (hi - lo).norm();
    bool runaway = false;
    for (Eigen::Index k = 0; k < P.rows(); ++k) {
      const Eigen::RowVector3d outside =
          (P.row(k) - hi).cwiseMax(0.0) + (lo - P.row(k)).cwiseMax(0.0);
      if (outside.norm() > reach) runaway = true;
    }
    if (runaway) break;
    std::vector<Point3> ctrl(m);
    for (std::size_t k = 0; k < m; ++k) ctrl[k] = P.row(static_cast<Eigen::Index>(k)).transpose();
    fitted.emplace(std::move(ctrl), knots);
    if (pass == refinement_passes) break;

    // Foot-point update of the parameters (Gauss-Newton on |C(u) - x|^2).
    for (std::size_t i = 0; i < n; ++i) {
      const Point3 x = X.row(static_cast<Eigen::Index>(i)).transpose();
      double ui = u[i];
      for (int it = 0; it < 3; ++it) {
        const Point3 d = fitted->evaluate(ui) - x;
        const Point3 t = fitted->derivative(ui);
        const double tt = t.squaredNorm();
        if (tt <= 0.0) break;
        ui = std::clamp(ui - d.dot(t) / tt, 0.0, 1.0);
      }
      u[i] = ui;
    }
  }
  return fitted;
}

double goodness_score(std::span<const Point3> spline_samples, std::span<const Point3> raw,
                      double inlier_distance) {
  if (spline_samples.empty()) throw InvalidArgumentError("goodness score needs spline samples");
  if (raw.empty()) throw InvalidArgumentError("goodness score needs raw points");
  const KdTree raw_tree(raw);
  const KdTree sample_tree(spline_samples);
  std::size_t spline_inliers = 0;
  for (const auto& s : spline_samples) {
    if (raw_tree.nearest(s).distance <= inlier_distance) ++spline_inliers;
  }
  std::size_t point_inliers = 0;
  for (const auto& p : raw) {
    if (sample_tree.nearest(p).distance <= inlier_distance) ++point_inliers;
  }
  return (static_cast<double>(spline_inliers) / static_cast<double>(spline_samples.size())) *
         (static_cast<double>(point_inliers) / static_cast<double>(raw.size()));
}

double goodness_score(const CurbSegment& segment, const PointCloud3& raw, double inlier_distance,
                      double spacing) {
  const PointCloud3 samples = sample_spline(segment, spacing);
  return goodness_score(samples.points(), raw.points(), inlier_distance);
}

PointCloud3 sample_spline(const CurbSegment& segment, double spacing) {
  if (!segment.is_spline()) return segment.raw_points;
  if (!(spacing > 0.0)) throw InvalidArgumentError("sampling spacing must be positive");
  const CubicBSpline spline = segment.spline();
  double polygon = 0.0;
  for (std::size_t i = 1; i < spline.control_points().size(); ++i) {
    polygon += (spline.control_points()[i] - spline.control_points()[i - 1]).norm();
  }
  const double wanted = std::ceil(20.0 * polygon / spacing);
  const auto chords = static_cast<std::size_t>(std::clamp(wanted, 1000.0, 4.0e6));
  std::vector<double> cumulative;
  const auto table = arc_length_table(spline, chords, cumulative);
  const double length = cumulative.back();

  PointCloud3 out(kMapFrame);
  const auto count = static_cast<std::size_t>(std::floor(length / spacing + 1e-6)) + 1;
  out.reserve(count);
  out.push_back(table.front());
  for (std::size_t k = 1; k < count; ++k) {
    const double s = std::min(static_cast<double>(k) * spacing, length);
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), s);
    const auto j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cumulative.begin()));
    const double seg = cumulative[j] - cumulative[j - 1];
    const double frac = seg > 0.0 ? (s - cumulative[j - 1]) / seg : 0.0;
    const double u = (static_cast<double>(j - 1) + frac) / static_cast<double>(chords);
    out.push_back(spline.evaluate(u));
  }
  return out;
}

CurbSegment fit_spline(const PointCloud3& cluster, const SegmentShape& shape,
                       const ParameterizationConfig& cfg, std::uint64_t seed) {
  const std::size_t n = cluster.size();
  if (n < static_cast<std::size_t>(std::max(cfg.min_fit_points, 2))) {
    return make_raw_segment(cluster, FallbackReason::kTooFewPoints, 0.0);
  }
  if (shape.ratio < cfg.ratio_threshold) {
    return make_raw_segment(cluster, FallbackReason::kLowRatio, 0.0);
  }
  const int budget = control_point_count(shape, cfg);
  const auto sample_size = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * cfg.sample_fraction + 1e-9));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  std::vector<Point3> sample;
  std::optional<CubicBSpline> best;
  PointCloud3 best_samples;
  double best_score = -1.0;
  for (int iter = 0; iter < cfg.ransac_iterations; ++iter) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < sample_size; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
      std::swap(idx[i], idx[j]);
    }
    sample.clear();
    for (std::size_t i = 0; i < sample_size; ++i) sample.push_back(cluster[idx[i]]);

    std::optional<CubicBSpline> spline;
    for (int m = budget; m >= cfg.min_control_points && !spline; --m) {
      spline = fit_bspline_least_squares(sample, shape.axis, m, cfg.refinement_passes);
    }
    if (!spline) continue;
    CurbSegment candidate;
    candidate.kind = SegmentKind::kSpline;
    candidate.control_points = spline->control_points();
    candidate.knots = spline->knots();
    PointCloud3 samples = sample_spline(candidate, cfg.sampling_spacing);
    const double score = goodness_score(samples.points(), cluster.points(), cfg.inlier_distance);
    if (score > best_score) {
      best_score = score;
      best = std::move(spline);
      best_samples = std::move(samples);
    }
  }
  if (!best) return make_raw_segment(cluster, FallbackReason::kSingular, 0.0);
  if (best_score < cfg.min_goodness) {
    return make_raw_segment(cluster, FallbackReason::kLowGoodness, best_score);
  }
  CurbSegment seg;
  seg.kind = SegmentKind::kSpline;
  seg.control_points = best->control_points();
  seg.knots = best->knots();
  seg.goodness = best_score;
  seg.bounds = bounding_box(best_samples.points());
  return seg;
}

std::size_t ParameterizationResult::stored_point_count() const {
  std::size_t total = 0;
  for (const auto& s : segments) total += s.stored_point_count();
  return total;
}

ParameterizationResult parameterize(const PointCloud3& raw_map_cloud,
                                    const ParameterizationConfig& cfg, std::uint64_t seed) {
  if (raw_map_cloud.frame() != kMapFrame) {
    throw FrameMismatchError("parameterization expects a map-frame cloud, got " +
                             raw_map_cloud.frame().str());
  }
  ParameterizationResult result;
  result.subsampled = voxel_subsample(raw_map_cloud, cfg.voxel_leaf, &result.voxel_membership);
  result.segment_members =
      cluster_segment_indices(result.subsampled, cfg.cluster_tolerance, cfg.max_segment_extent);
  result.segments.reserve(result.segment_members.size());
  for (std::size_t k = 0; k < result.segment_members.size(); ++k) {
    const PointCloud3 cluster = gather(result.subsampled, result.segment_members[k]);
    if (cluster.size() < 2) {
      result.segments.push_back(make_raw_segment(cluster, FallbackReason::kTooFewPoints, 0.0));
      continue;
    }
    result.segments.push_back(fit_spline(cluster, segment_shape(cluster), cfg, derive_seed(seed, k)));
  }
  return result;
}

}  // namespace curbloc
