#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "curbloc/errors.hpp"
#include "curbloc/sim.hpp"

using namespace curbloc;

namespace {

double polyline_length(const std::vector<Point3>& line) {
  double l = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) l += (line[i] - line[i - 1]).norm();
  return l;
}

double distance_to_curbs(const World& w, const Point3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& curb : w.curbs) {
    for (std::size_t i = 0; i + 1 < curb.size(); ++i) {
      const Point3 a = curb[i], b = curb[i + 1];
      const double t = std::clamp((p - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
      best = std::min(best, (a + t * (b - a) - p).norm());
    }
  }
  return best;
}

WorldSpec crossing_spec() {
  WorldSpec spec;
  spec.seed = 5;
  spec.streets = {{{{-60, 0}, {60, 0}}, 8.0}, {{{0, -60}, {0, 60}}, 8.0}};
  spec.intersections = {{{0, 0}, 8.0}};
  spec.break_max_spacing = 0.0;
  spec.route = {{-50, 0}, {50, 0}};
  return spec;
}

DriveNoise quiet(std::uint64_t seed) {
  DriveNoise n;
  n.seed = seed;
  n.odometry_sigma = 0.0;
  n.detection_sigma = 0.0;
  n.dropout = 0.0;
  n.clutter_rate = 0.0;
  return n;
}

}  // namespace

TEST(GenerateWorld, StraightStreetHasTwoCurbs) {
  const World w = generate_world(straight_street_spec(1, 100.0));
  ASSERT_EQ(w.curbs.size(), 2u);
  for (const auto& c : w.curbs) EXPECT_NEAR(polyline_length(c), 100.0, 1e-9);
  EXPECT_NEAR(std::abs(w.curbs[0].front().y() - w.curbs[1].front().y()), 8.0, 1e-12);
  EXPECT_NEAR(w.path_length, 100.0, 1e-9);
  EXPECT_NEAR(w.curb_coverage(), 1.0, 1e-12);
}

TEST(GenerateWorld, FourWayIntersectionSplitsCurbs) {
  const WorldSpec spec = crossing_spec();
  const World w = generate_world(spec);
  // Four street arms, each flanked by two curbs.
  EXPECT_EQ(w.curbs.size(), 4u * 2u);
  for (const auto& c : w.curbs) {
    for (const auto& p : c) EXPECT_GE(p.head<2>().norm(), 8.0 - 1e-9);
  }
  // Each curb runs from the disc boundary to the street end.
  const double expected = 60.0 - std::sqrt(64.0 - 16.0);
  for (const auto& c : w.curbs) EXPECT_NEAR(polyline_length(c), expected, 1e-9);
}

TEST(GenerateWorld, Deterministic) {
  const World a = generate_world(loop_world_spec(7));
  const World b = generate_world(loop_world_spec(7));
  ASSERT_EQ(a.curbs.size(), b.curbs.size());
  for (std::size_t i = 0; i < a.curbs.size(); ++i) EXPECT_EQ(a.curbs[i], b.curbs[i]);
}

TEST(GenerateWorld, LoopWorldShape) {
  const World w = generate_world(loop_world_spec(7));
  EXPECT_NEAR(w.path_length, 2000.0, 20.0);
  EXPECT_GT(w.curb_coverage(), 0.85);
  EXPECT_LT(w.curb_coverage(), 0.93);
}

TEST(GenerateWorld, SelfIntersectingStreetThrows) {
  WorldSpec spec;
  spec.streets = {{{{0, 0}, {10, 10}, {10, 0}, {0, 10}}, 8.0}};
  EXPECT_THROW(generate_world(spec), InvalidArgumentError);
  spec.streets = {{{{0, 0}, {10, 0}}, -1.0}};
  EXPECT_THROW(generate_world(spec), InvalidArgumentError);
}

TEST(SimulateDrive, NoiselessDetectionsLieOnCurbs) {
  const World w = generate_world(crossing_spec());
  const auto frames = simulate_drive(w, quiet(3));
  ASSERT_GT(frames.size(), 10u);
  Pose dead = frames.front().gt_pose;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    if (k > 0) dead = compose(dead, f.odom_step);
    EXPECT_LT((dead.translation() - f.gt_pose.translation()).norm(), 1e-9);
    EXPECT_LT(compose(dead.inverse(), f.gt_pose).rotation_angle(), 1e-9);
    for (std::size_t i = 0; i < f.detection.size(); i += 7) {
      EXPECT_LT(distance_to_curbs(w, f.gt_pose.transform_point(f.detection[i])), 1e-9);
    }
  }
}

TEST(SimulateDrive, DetectionsWithinSensorRange) {
  const World w = generate_world(loop_world_spec(2));
  DriveNoise n = quiet(4);
  n.dropout = 0.2;
  const auto frames = simulate_drive(w, n);
  for (std::size_t k = 0; k < frames.size(); k += 13) {
    for (const auto& p : frames[k].detection) EXPECT_LE(p.norm(), n.sensor_range + 1e-9);
  }
}

TEST(SimulateDrive, TimestampsAtFixedRate) {
  const auto frames = simulate_drive(generate_world(straight_street_spec(1)), DriveNoise{});
  for (std::size_t k = 1; k < frames.size(); ++k) {
    EXPECT_EQ(frames[k].timestamp - frames[k - 1].timestamp, 100 * kNsPerMs);
  }
}

TEST(SimulateDrive, TotalDropoutGivesEmptyDetections) {
  DriveNoise n = quiet(5);
  n.dropout = 1.0;
  for (const auto& f : simulate_drive(generate_world(straight_street_spec(1)), n)) {
    EXPECT_TRUE(f.detection.empty());
  }
}

TEST(SimulateDrive, BitIdenticalForSameSeed) {
  const World w = generate_world(loop_world_spec(3, 200, 100));
  DriveNoise n;
  n.seed = 9;
  n.visual_dropouts = {{50, 80}};
  const auto a = simulate_drive(w, n);
  const auto b = simulate_drive(w, n);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a[k].detection.size(), b[k].detection.size());
    for (std::size_t i = 0; i < a[k].detection.size(); ++i) EXPECT_EQ(a[k].detection[i], b[k].detection[i]);
    EXPECT_EQ(a[k].odom_step.translation(), b[k].odom_step.translation());
    EXPECT_EQ(a[k].visual_available, b[k].visual_available);
    EXPECT_EQ(a[k].visual_available, !(a[k].distance >= 50 && a[k].distance < 80));
  }
}

TEST(SimulateDrive, OdometryDriftIsARandomWalk) {
  const double sigma = 0.02;
  const World w = generate_world(straight_street_spec(1, 500.0));
  const int seeds = 50;
  double sum_sq_half = 0.0;
  double sum_sq_end = 0.0;
  for (int s = 0; s < seeds; ++s) {
    DriveNoise n = quiet(100 + s);
    n.odometry_sigma = sigma;
    n.dropout = 1.0;
    const auto frames = simulate_drive(w, n);
    Pose dead = frames.front().gt_pose;
    for (std::size_t k = 1; k < frames.size(); ++k) {
      dead = compose(dead, frames[k].odom_step);
      if (frames[k].distance == 125.0) {
        sum_sq_half += (dead.translation() - frames[k].gt_pose.translation()).head<2>().squaredNorm();
      }
    }
    sum_sq_end += (dead.translation() - frames.back().gt_pose.translation()).head<2>().squaredNorm();
  }
  // Without heading noise each planar axis is a sum of independent steps with
  // variance sigma^2 * step, so the squared planar error has mean 2 sigma^2 D
  // and standard deviation 2 sigma^2 D (chi-squared with two dof).
  auto check = [&](double sum_sq, double distance) {
    const double expected = 2 * sigma * sigma * distance;
    const double se = expected / std::sqrt(seeds);
    EXPECT_NEAR(sum_sq / seeds, expected, 3 * se) << "at " << distance << " m";
  };
  check(sum_sq_half, 125.0);
  check(sum_sq_end, 500.0);
}

TEST(SimulateDrive, RejectsBadNoise) {
  const World w = generate_world(straight_street_spec(1));
  DriveNoise n;
  n.dropout = 1.5;
  EXPECT_THROW(simulate_drive(w, n), InvalidArgumentError);
  n = DriveNoise{};
  n.detection_sigma = -1;
  EXPECT_THROW(simulate_drive(w, n), InvalidArgumentError);
}

TEST(BaseMapFromDrive, KeyframesHoldDetections) {
  const auto frames = simulate_drive(generate_world(straight_street_spec(1)), quiet(1));
  const BaseMap bm = base_map_from_drive(frames, 3, 10, 5);
  ASSERT_EQ(bm.size(), frames.size());
  for (std::size_t i = 0; i < bm.size(); ++i) {
    const auto& v = bm.vertices()[i];
    EXPECT_EQ(v.id, static_cast<VertexId>(10 + i));
    EXPECT_EQ(v.session_id, 3);
    EXPECT_EQ(v.curb_observation.has_value(), i % 5 == 0);
  }
}
