// Acceptance suite: one PASS/FAIL line per criterion. Exit code is non-zero
// when any criterion fails.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "curbloc/curb_map.hpp"
#include "curbloc/io.hpp"
#include "curbloc/localizer.hpp"
#include "curbloc/metrics.hpp"
#include "curbloc/pose_graph.hpp"
#include "curbloc/sim.hpp"
#include "curbloc/tracker.hpp"

using namespace curbloc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double kMinRecallPct = 99.0;
constexpr double kMaxPlanarMedian = 0.10;
constexpr double kMaxLateralMedian = 0.05;
constexpr double kMaxPipelineSeconds = 300.0;

constexpr double kMinBridgedRecallPct = 95.0;
constexpr double kMaxVisualOnlyRecallPct = 50.0;

constexpr int kPerturbationTrials = 100;
constexpr double kMaxPerturbTranslation = 1.0;
constexpr double kMaxPerturbYawDeg = 10.0;
constexpr double kRecoveryTranslation = 0.05;
constexpr double kRecoveryRotationDeg = 0.5;
constexpr double kMinRecoveredFraction = 0.95;
constexpr double kClutterReplaced = 0.6;
constexpr double kMinClutterRejectedFraction = 0.90;

constexpr double kNetworkCurbLength = 1000.0;
constexpr double kNetworkDensity = 5.0;
constexpr double kMaxStoredFraction = 0.20;
constexpr double kMinGoodness = 0.8;
constexpr double kMinGoodSplineFraction = 0.90;
constexpr double kRescoreTolerance = 0.05;

constexpr int kJacobianResiduals = 1000;
constexpr double kJacobianRelTolerance = 1e-5;
constexpr double kClosedFormTolerance = 1e-9;

constexpr double kMaxTrackingMeanMs = 50.0;
constexpr std::size_t kMaxTrackingPoints = 2000;
constexpr double kMaxLoadAndRetrieveSeconds = 1.0;

// Seeds of the synthetic world and its drives.
constexpr std::uint64_t kWorldSeed = 7;
constexpr std::uint64_t kMappingSeed = 11;
constexpr std::uint64_t kLocalizationSeed = 22;
constexpr std::uint64_t kBridgingSeed = 33;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  fmt::print("criterion {}: {} | {}\n", id, pass ? "PASS" : "FAIL", detail);
  std::fflush(stdout);
  if (!pass) ++failures;
}

// FNV-1a over raw bytes.
class Hasher {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 1099511628211ULL;
    }
  }
  template <class T>
  void value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    bytes(&v, sizeof v);
  }
  void point(const Point3& p) { bytes(p.data(), 3 * sizeof(double)); }
  void pose(const Pose& p) {
    bytes(p.rotation().coeffs().data(), 4 * sizeof(double));
    point(p.translation());
  }
  void cloud(const PointCloud3& c) {
    value(c.size());
    for (const auto& p : c) point(p);
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ULL;
};

// Map and drives shared by the pipeline criteria.
struct Pipeline {
  World world;
  BaseMap base;
  CurbMap curbs;
  std::vector<DriveFrame> frames;
  std::vector<FrameRecord> run;
  double seconds = 0.0;
  std::uint64_t world_hash = 0, drive_hash = 0, base_hash = 0, curb_hash = 0, run_hash = 0;
};

Pipeline run_pipeline() {
  Pipeline p;
  const auto t0 = Clock::now();
  p.world = generate_world(loop_world_spec(kWorldSeed));

  DriveNoise mapping;
  mapping.seed = kMappingSeed;
  mapping.clutter_rate = 0.0;
  p.base = base_map_from_drive(simulate_drive(p.world, mapping), 0);
  p.curbs = build_curb_map(p.base);
  parameterize_curb_map(p.curbs, {}, kWorldSeed);
  const LocalizationMap map(p.base, p.curbs);

  DriveNoise drive;
  drive.seed = kLocalizationSeed;
  drive.visual_enabled = false;
  p.frames = simulate_drive(p.world, drive);
  p.run = localize(p.frames, p.frames.front().gt_pose, map, LocalizerConfig{});
  p.seconds = seconds_since(t0);

  Hasher hw, hd, hb, hc, hr;
  for (const auto& curb : p.world.curbs) {
    hw.value(curb.size());
    for (const auto& q : curb) hw.point(q);
  }
  for (const auto& f : p.frames) {
    hd.value(f.timestamp);
    hd.pose(f.gt_pose);
    hd.pose(f.odom_step);
    hd.cloud(f.detection);
    hd.value(f.visual_available);
  }
  for (const auto& v : p.base.vertices()) {
    hb.value(v.id);
    hb.value(v.timestamp);
    hb.pose(v.T_MB);
    if (v.curb_observation) hb.cloud(*v.curb_observation);
  }
  for (const auto& s : p.curbs.segments) {
    hc.value(s.kind);
    hc.value(s.goodness);
    for (const auto& q : s.control_points) hc.point(q);
    for (const double k : s.knots) hc.value(k);
    hc.cloud(s.raw_points);
  }
  for (const auto& r : p.run) {
    hr.value(r.timestamp);
    hr.pose(r.estimate);
    hr.value(r.localized);
    if (r.outcome) {
      hr.value(r.outcome->status);
      hr.value(r.outcome->diagnostics.score);
    }
  }
  p.world_hash = hw.digest();
  p.drive_hash = hd.digest();
  p.base_hash = hb.digest();
  p.curb_hash = hc.digest();
  p.run_hash = hr.digest();
  return p;
}

void criterion_1(const Pipeline& p) {
  const RunMetrics m = evaluate(to_trajectory(p.run), ground_truth(p.frames));
  const bool pass = m.recall_pct >= kMinRecallPct && m.planar.median <= kMaxPlanarMedian &&
                    m.lateral.median <= kMaxLateralMedian && p.seconds <= kMaxPipelineSeconds;
  report(1, pass,
         fmt::format("path {:.0f} m, coverage {:.3f}, recall {:.2f}% (>= {}), planar median {:.3f} m "
                     "(<= {}), lateral median {:.3f} m (<= {}), pipeline {:.1f} s (<= {}); row {}",
                     p.world.path_length, p.world.curb_coverage(), m.recall_pct, kMinRecallPct,
                     m.planar.median, kMaxPlanarMedian, m.lateral.median, kMaxLateralMedian,
                     p.seconds, kMaxPipelineSeconds, format_table_row(m)));
}

void criterion_2(const Pipeline& p) {
  const LocalizationMap map(p.base, p.curbs);
  DriveNoise drive;
  drive.seed = kBridgingSeed;
  drive.visual_dropouts = {{250.0, 350.0}, {800.0, 900.0}, {1400.0, 1500.0}};
  const auto frames = simulate_drive(p.world, drive);
  std::vector<bool> masked;
  for (const auto& f : frames) masked.push_back(!f.visual_available);
  const auto truth = ground_truth(frames);

  LocalizerConfig with_curbs;
  const auto run = localize(frames, frames.front().gt_pose, map, with_curbs);
  LocalizerConfig visual_only;
  visual_only.curb_tracking = false;
  const auto baseline = localize(frames, frames.front().gt_pose, map, visual_only);

  const double bridged = masked_recall(to_trajectory(run), truth, masked);
  const double visual = masked_recall(to_trajectory(baseline), truth, masked);
  const RunMetrics overall = evaluate(to_trajectory(run), truth);
  report(2, bridged >= kMinBridgedRecallPct && visual < kMaxVisualOnlyRecallPct,
         fmt::format("masked recall with curbs {:.2f}% (>= {}), visual only {:.2f}% (< {}); "
                     "overall recall {:.2f}%",
                     bridged, kMinBridgedRecallPct, visual, kMaxVisualOnlyRecallPct,
                     overall.recall_pct));
}

void add_line(PointCloud3& c, const Point3& a, const Point3& b, double spacing) {
  const int n = static_cast<int>(std::floor((b - a).norm() / spacing + 1e-9));
  for (int i = 0; i <= n; ++i) c.push_back(a + (b - a) * (i * spacing / (b - a).norm()));
}

PointCloud3 jittered(const PointCloud3& c, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  PointCloud3 out(c.frame());
  for (const auto& q : c) out.push_back(q + Point3(n(rng), n(rng), n(rng)));
  return out;
}

void criterion_3() {
  constexpr double kLeg = 20.0, kHeight = 0.12;
  const TrackerConfig cfg;
  int recovered = 0;
  int rejected = 0;
  double worst_t = 0.0, worst_r = 0.0;
  for (int trial = 0; trial < kPerturbationTrials; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    // Corner of the street in the map frame; the vehicle sits on its diagonal.
    const Pose corner = Pose::FromXYZYaw(50 * u(rng), 50 * u(rng), 0.0, std::numbers::pi * u(rng),
                                         kMapFrame, kMapFrame);
    PointCloud3 legs(kMapFrame);
    add_line(legs, {0, 0, kHeight}, {kLeg, 0, kHeight}, 0.05);
    add_line(legs, {0, 0.05, kHeight}, {0, kLeg, kHeight}, 0.05);
    const PointCloud3 world = apply(corner, legs);
    const Pose truth = compose(corner, Pose::FromXYZYaw(6 + 2 * u(rng), 6 + 2 * u(rng), 0.0,
                                                        rad(30 * u(rng)), kMapFrame, kBodyFrame));

    BaseMap base;
    BaseMapVertex v;
    v.T_MB = truth;
    PointCloud3 map_sample(kMapFrame);
    for (std::size_t i = 0; i < world.size(); i += 2) map_sample.push_back(world[i]);
    v.curb_observation = apply(truth.inverse(), jittered(map_sample, 0.05, rng));
    base.add_vertex(v);
    CurbMap curbs = build_curb_map(base);
    parameterize_curb_map(curbs, {}, 1 + trial);
    const LocalizationMap map(base, curbs);

    PointCloud3 det_world(kMapFrame);
    for (std::size_t i = 1; i < world.size(); i += 3) det_world.push_back(world[i]);
    const PointCloud3 detection = apply(truth.inverse(), jittered(det_world, 0.05, rng));
    const Pose offset =
        Pose::FromXYZYaw(kMaxPerturbTranslation * u(rng), kMaxPerturbTranslation * u(rng), 0.0,
                         rad(kMaxPerturbYawDeg * u(rng)), kBodyFrame, kBodyFrame);
    const Pose prior = compose(truth, offset);

    const TrackOutcome out = track(prior, detection, map, cfg);
    if (out.accepted()) {
      const Pose err = compose(truth.inverse(), out.constraint->T_estimate);
      const double et = err.translation().norm();
      const double er = deg(err.rotation_angle());
      worst_t = std::max(worst_t, et);
      worst_r = std::max(worst_r, er);
      if (et <= kRecoveryTranslation && er <= kRecoveryRotationDeg) ++recovered;
    }

    std::bernoulli_distribution replace(kClutterReplaced);
    std::uniform_real_distribution<double> box(-10.0, 10.0);
    std::uniform_real_distribution<double> height(0.0, 2 * kHeight);
    PointCloud3 cluttered(kBodyFrame);
    for (const auto& q : detection) {
      cluttered.push_back(replace(rng) ? Point3(box(rng), box(rng), height(rng)) : q);
    }
    const TrackOutcome bad = track(prior, cluttered, map, cfg);
    if (bad.status == TrackStatus::kLowScore ||
        (bad.status != TrackStatus::kAccepted && bad.diagnostics.score <= cfg.p_min)) {
      ++rejected;
    }
  }
  const double rec = static_cast<double>(recovered) / kPerturbationTrials;
  const double rej = static_cast<double>(rejected) / kPerturbationTrials;
  report(3, rec >= kMinRecoveredFraction && rej >= kMinClutterRejectedFraction,
         fmt::format("recovered {}/{} within {} m / {} deg (>= {:.0f}%), worst accepted {:.3f} m "
                     "{:.2f} deg; clutter rejected {}/{} (>= {:.0f}%)",
                     recovered, kPerturbationTrials, kRecoveryTranslation, kRecoveryRotationDeg,
                     100 * kMinRecoveredFraction, worst_t, worst_r, rejected, kPerturbationTrials,
                     100 * kMinClutterRejectedFraction));
}

// Small street network: two crossing streets and a curved one.
WorldSpec network_spec() {
  WorldSpec spec;
  spec.seed = 3;
  spec.streets = {{{{0, 0}, {300, 0}}, 8.0}, {{{150, -100}, {150, 100}}, 8.0}};
  std::vector<Point2> bend;
  for (int i = 0; i <= 40; ++i) {
    const double a = -std::numbers::pi / 2 + std::numbers::pi / 2 * i / 40.0;
    bend.emplace_back(330 + 80 * std::cos(a), 80 + 80 * std::sin(a));
  }
  spec.streets.push_back({bend, 8.0});
  spec.intersections = {{{150, 0}, 6.0}};
  return spec;
}

void criterion_4() {
  const World w = generate_world(network_spec());
  const PointCloud3 raw = sample_world_curbs(w, kNetworkDensity, 0.05, 4);
  const ParameterizationConfig cfg;
  const auto result = parameterize(raw, cfg, 5);
  const double stored = static_cast<double>(result.stored_point_count()) / raw.size();

  std::size_t splines = 0, good = 0;
  double worst_rescore = 0.0;
  for (std::size_t k = 0; k < result.segments.size(); ++k) {
    const auto& seg = result.segments[k];
    if (!seg.is_spline()) continue;
    ++splines;
    if (seg.goodness >= kMinGoodness) ++good;
    PointCloud3 cluster(kMapFrame);
    for (const auto i : result.segment_members[k]) cluster.push_back(result.subsampled[i]);
    const double rescored =
        goodness_score(seg, cluster, cfg.inlier_distance, cfg.sampling_spacing);
    worst_rescore = std::max(worst_rescore, std::abs(rescored - seg.goodness));
  }
  const double good_fraction = splines ? static_cast<double>(good) / splines : 0.0;

  SegmentShape s40, s8, wide;
  s40.length = 40.0;
  s40.width = 0.1;
  s8.length = 8.0;
  s8.width = 0.1;
  wide.length = 30.0;
  wide.width = cfg.wide_width_threshold + 2.0;
  const int c40 = control_point_count(s40, cfg);
  const int c8 = control_point_count(s8, cfg);
  const int cw = control_point_count(wide, cfg);

  const bool pass = w.curb_length() >= kNetworkCurbLength && stored <= kMaxStoredFraction &&
                    good_fraction >= kMinGoodSplineFraction && worst_rescore <= kRescoreTolerance &&
                    c40 == 10 && c8 == 4 && cw == 20;
  report(4, pass,
         fmt::format("curbs {:.0f} m, {} raw points, stored {:.1f}% (<= {:.0f}%), {} splines of {} "
                     "segments, GS >= {} on {:.1f}% (>= {:.0f}%), worst rescore diff {:.4f} (<= {}), "
                     "budgets 40m->{} 8m->{} wide->{}",
                     w.curb_length(), raw.size(), 100 * stored, 100 * kMaxStoredFraction, splines,
                     result.segments.size(), kMinGoodness, 100 * good_fraction,
                     100 * kMinGoodSplineFraction, worst_rescore, kRescoreTolerance, c40, c8, cw));
}

Pose random_pose(std::mt19937_64& rng, const FrameId& parent, const FrameId& child) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
  q.normalize();
  return Pose(q, Eigen::Vector3d(10 * u(rng), 10 * u(rng), 10 * u(rng)), parent, child);
}

double max_rel_error(const Matrix6d& analytic, const Matrix6d& numeric) {
  return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1.0, numeric.cwiseAbs().maxCoeff());
}

Matrix6d central_difference(const Pose& x, const std::function<Vector6d(const Pose&)>& f) {
  const double h = 1e-6;
  Matrix6d J;
  for (int k = 0; k < 6; ++k) {
    Vector6d d = Vector6d::Zero();
    d(k) = h;
    J.col(k) = (f(retract(x, d)) - f(retract(x, -d))) / (2 * h);
  }
  return J;
}

void criterion_5() {
  std::mt19937_64 rng(55);
  double worst_jac = 0.0;
  for (int i = 0; i < kJacobianResiduals; ++i) {
    const Pose xi = random_pose(rng, kMapFrame, kBodyFrame);
    if (i % 2 == 0) {
      const Pose z = random_pose(rng, kMapFrame, kBodyFrame);
      Matrix6d J;
      absolute_residual(xi, z, &J);
      worst_jac = std::max(worst_jac, max_rel_error(J, central_difference(xi, [&](const Pose& x) {
                                                      return absolute_residual(x, z);
                                                    })));
    } else {
      const Pose xj = random_pose(rng, kMapFrame, kBodyFrame);
      const Pose z = random_pose(rng, kBodyFrame, kBodyFrame);
      Matrix6d Ji, Jj;
      odometry_residual(xi, xj, z, &Ji, &Jj);
      worst_jac = std::max(worst_jac, max_rel_error(Ji, central_difference(xi, [&](const Pose& x) {
                                                      return odometry_residual(x, xj, z);
                                                    })));
      worst_jac = std::max(worst_jac, max_rel_error(Jj, central_difference(xj, [&](const Pose& x) {
                                                      return odometry_residual(xi, x, z);
                                                    })));
    }
  }

  // Random drifting chains with noisy absolute constraints.
  std::normal_distribution<double> n(0.0, 1.0);
  int increases = 0, steps = 0;
  for (int g = 0; g < 50; ++g) {
    PoseGraph graph;
    graph.add_first_vertex(0, Pose::Identity(kMapFrame, kBodyFrame));
    for (VertexId v = 0; v < 60; ++v) {
      graph.add_odometry(v, v + 1,
                         Pose::FromXYZYaw(1 + 0.05 * n(rng), 0.05 * n(rng), 0.01 * n(rng),
                                          rad(2 * n(rng)), kBodyFrame, kBodyFrame));
      if (v % 5 == 4) {
        const Pose noisy = compose(graph.vertex(v + 1).estimate,
                                   Pose::FromXYZYaw(n(rng), n(rng), 0.1 * n(rng), rad(5 * n(rng)),
                                                    kBodyFrame, kBodyFrame));
        graph.add_constraint({v + 1, noisy, TrackerConfig::default_constraint_covariance(), 0.9});
        const auto r = graph.optimize();
        for (std::size_t k = 1; k < r.cost_history.size(); ++k) {
          ++steps;
          if (r.cost_history[k] > r.cost_history[k - 1]) ++increases;
        }
      }
    }
  }

  // Three vertices on a line: hand-solved 2x2 normal equations.
  const double s1 = 0.04, s2 = 0.01, sa = 0.0025, d = 1.1;
  auto cov_x = [](double var_x) {
    Vector6d diag = Vector6d::Constant(1e-4);
    diag(0) = var_x;
    return Matrix6d(diag.asDiagonal());
  };
  PoseGraph line;
  line.add_first_vertex(0, Pose::Identity(kMapFrame, kBodyFrame));
  line.add_odometry(0, 1, Pose::FromTranslation({d, 0, 0}, kBodyFrame, kBodyFrame), cov_x(s1));
  line.add_odometry(1, 2, Pose::FromTranslation({d, 0, 0}, kBodyFrame, kBodyFrame), cov_x(s2));
  line.add_constraint({2, Pose::FromTranslation({2, 0, 0}, kMapFrame, kBodyFrame),
                       Matrix6d(Vector6d::Constant(sa).asDiagonal()), 0.9});
  line.optimize();
  const double a11 = 1 / s1 + 1 / s2, a12 = -1 / s2, a22 = 1 / s2 + 1 / sa;
  const double b1 = d / s1 - d / s2, b2 = d / s2 + 2 / sa;
  const double det = a11 * a22 - a12 * a12;
  const double x1 = (b1 * a22 - a12 * b2) / det;
  const double x2 = (a11 * b2 - a12 * b1) / det;
  const double closed_err =
      std::max(std::abs(line.vertex(1).estimate.translation().x() - x1),
               std::abs(line.vertex(2).estimate.translation().x() - x2));

  report(5,
         worst_jac <= kJacobianRelTolerance && increases == 0 && closed_err <= kClosedFormTolerance,
         fmt::format("worst Jacobian rel error {:.2e} over {} residuals (<= {:.0e}), cost increases "
                     "{}/{} accepted steps, three-vertex error {:.2e} (<= {:.0e})",
                     worst_jac, kJacobianResiduals, kJacobianRelTolerance, increases, steps,
                     closed_err, kClosedFormTolerance));
}

void criterion_6(const Pipeline& p) {
  double sum = 0.0;
  std::size_t n = 0, largest = 0;
  for (std::size_t k = 0; k < p.run.size(); ++k) {
    if (!p.run[k].outcome) continue;
    const std::size_t pts = p.frames[k].detection.size();
    largest = std::max(largest, pts);
    if (pts > kMaxTrackingPoints) continue;
    sum += p.run[k].tracking_ms;
    ++n;
  }
  const double mean = n ? sum / n : INFINITY;

  const fs::path dir = fs::temp_directory_path() / fmt::format("curbloc_acceptance_{}", ::getpid());
  fs::create_directories(dir);
  save_base_map(dir / "base_map.json", p.base);
  save_curb_map(dir / "curb_map.json", p.curbs);
  const auto t0 = Clock::now();
  const BaseMap base = load_base_map(dir / "base_map.json", false);
  const CurbMap curbs = load_curb_map(dir / "curb_map.json");
  const LocalizationMap map(base, curbs);
  const auto ref = retrieve_reference(map, p.frames.front().gt_pose, TrackerConfig{});
  const double load_s = seconds_since(t0);
  fs::remove_all(dir);

  report(6, mean <= kMaxTrackingMeanMs && ref.has_value() && load_s <= kMaxLoadAndRetrieveSeconds,
         fmt::format("tracking mean {:.2f} ms over {} frames with <= {} points (<= {} ms, largest "
                     "frame {} points), map load + first retrieval {:.3f} s (<= {} s)",
                     mean, n, kMaxTrackingPoints, kMaxTrackingMeanMs, largest, load_s,
                     kMaxLoadAndRetrieveSeconds));
}

void criterion_7(const Pipeline& a, const Pipeline& b) {
  const bool same = a.world_hash == b.world_hash && a.drive_hash == b.drive_hash &&
                    a.base_hash == b.base_hash && a.curb_hash == b.curb_hash &&
                    a.run_hash == b.run_hash;
  report(7, same,
         fmt::format("world {:016x}/{:016x} drive {:016x}/{:016x} base map {:016x}/{:016x} curb map "
                     "{:016x}/{:016x} trajectory {:016x}/{:016x}",
                     a.world_hash, b.world_hash, a.drive_hash, b.drive_hash, a.base_hash,
                     b.base_hash, a.curb_hash, b.curb_hash, a.run_hash, b.run_hash));
}

}  // namespace

int main() {
  const Pipeline first = run_pipeline();
  criterion_1(first);
  criterion_2(first);
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6(first);
  const Pipeline second = run_pipeline();
  criterion_7(first, second);
  fmt::print("{} of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
