#include <gtest/gtest.h>

#include <map>
#include <random>

#include "curbloc/curb_map.hpp"
#include "curbloc/errors.hpp"
#include "curbloc/tracker.hpp"
#include "support/scenes.hpp"

using namespace curbloc;
using curbloc::testing::add_line;
using curbloc::testing::deg;
using curbloc::testing::jitter;
using curbloc::testing::planar;

namespace {

constexpr double kCurbZ = 0.12;

// Map-frame curbs of a street corner: legs along +x and +y from (2, 3).
PointCloud3 corner_curbs(double spacing) {
  PointCloud3 c(kMapFrame);
  add_line(c, {2, 3, kCurbZ}, {32, 3, kCurbZ}, spacing);
  add_line(c, {2, 3 + spacing, kCurbZ}, {2, 33, kCurbZ}, spacing);
  return c;
}

struct Scene {
  BaseMap base;
  CurbMap curbs;
};

Scene corner_scene(const std::vector<Pose>& vertex_poses, double map_sigma = 0.02) {
  Scene s;
  const PointCloud3 world = map_sigma > 0 ? jitter(corner_curbs(0.1), map_sigma, 7) : corner_curbs(0.1);
  for (std::size_t i = 0; i < vertex_poses.size(); ++i) {
    BaseMapVertex v;
    v.id = static_cast<VertexId>(i);
    v.timestamp = static_cast<TimestampNs>(i) * kNsPerSecond;
    v.T_MB = vertex_poses[i];
    if (i == 0) v.curb_observation = apply(v.T_MB.inverse(), world);
    else v.has_curb_data = true;
    s.base.add_vertex(v);
  }
  s.curbs = build_curb_map(s.base);
  parameterize_curb_map(s.curbs, {}, 3);
  return s;
}

PointCloud3 detect(const Pose& truth, double sigma, std::uint64_t seed, double spacing = 0.1) {
  return apply(truth.inverse(), sigma > 0 ? jitter(corner_curbs(spacing), sigma, seed) : corner_curbs(spacing));
}

TrackerConfig cfg20() {
  TrackerConfig c;
  c.r_lookup = 20.0;
  return c;
}

}  // namespace

TEST(TrackerConfig, Validation) {
  EXPECT_NO_THROW(TrackerConfig{}.validate());
  TrackerConfig c;
  c.p_min = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
  c = TrackerConfig{};
  c.r_lookup = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
  c = TrackerConfig{};
  c.outlier_ratio = 0.5;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
  c = TrackerConfig{};
  c.constraint_covariance(2, 2) = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
}

TEST(RetrieveReference, ClosestVertexWithinRadius) {
  const Pose prior = planar(10, 10, 0, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({planar(10, 40, 0, kMapFrame, kBodyFrame), planar(13, 10, 0, kMapFrame, kBodyFrame)});
  const LocalizationMap map(s.base, s.curbs);
  const auto cfg = cfg20();
  // Distance-scan oracle.
  VertexId oracle = -1;
  double best = INFINITY;
  for (const auto& v : s.base.vertices()) {
    const double d = (v.T_MB.translation() - prior.translation()).norm();
    if (d <= cfg.r_lookup && d < best) {
      best = d;
      oracle = v.id;
    }
  }
  const auto r = retrieve_reference(map, prior, cfg);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->vertex_id, oracle);
  EXPECT_EQ(r->vertex_id, 1);
  EXPECT_NEAR(r->distance, 3.0, 1e-12);
}

TEST(RetrieveReference, YawGateExcludesOppositeHeading) {
  const Scene s = corner_scene({planar(10, 10, 170, kMapFrame, kBodyFrame)});
  const LocalizationMap map(s.base, s.curbs);
  EXPECT_FALSE(retrieve_reference(map, planar(11, 10, 0, kMapFrame, kBodyFrame), cfg20()).has_value());
  EXPECT_TRUE(retrieve_reference(map, planar(11, 10, 150, kMapFrame, kBodyFrame), cfg20()).has_value());
}

TEST(RetrieveReference, PriorAtVertex) {
  const Pose v = planar(10, 10, 30, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({v});
  const LocalizationMap map(s.base, s.curbs);
  const auto r = retrieve_reference(map, v, cfg20());
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->vertex_id, 0);
  EXPECT_EQ(r->distance, 0.0);
}

TEST(RetrieveReference, UnionOfSegmentsTouchingTheBall) {
  const Pose v = planar(25, 8, 0, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({v});
  const LocalizationMap map(s.base, s.curbs);
  TrackerConfig cfg = cfg20();
  cfg.r_lookup = 8.0;
  const auto r = retrieve_reference(map, v, cfg);
  ASSERT_TRUE(r.has_value());
  std::size_t expected = 0;
  std::size_t skipped = 0;
  for (const auto& seg : s.curbs.segments) {
    const Aabb box = seg.bounds;
    // Clamp-to-box distance oracle.
    const Point3 nearest = v.translation().cwiseMax(box.min).cwiseMin(box.max);
    if ((nearest - v.translation()).norm() <= cfg.r_lookup) expected += sample_spline(seg, 0.3).size();
    else ++skipped;
  }
  EXPECT_EQ(r->cloud.size(), expected);
  EXPECT_GT(skipped, 0u);
}

TEST(Track, ExactDetectionKeepsPrior) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  const TrackOutcome out = track(truth, detect(truth, 0.0, 0), map, TrackerConfig{}, 4);
  ASSERT_EQ(out.status, TrackStatus::kAccepted);
  ASSERT_TRUE(out.constraint.has_value());
  EXPECT_EQ(out.constraint->vertex_id, 4);
  const Pose err = compose(out.constraint->T_estimate, truth.inverse());
  EXPECT_LT(err.translation().norm(), 0.02);
  EXPECT_LT(deg(err.rotation_angle()), 0.2);
  EXPECT_GT(out.constraint->score, TrackerConfig{}.p_min);
  EXPECT_TRUE(out.constraint->covariance.isApprox(TrackerConfig{}.constraint_covariance));
}

TEST(Track, LateralOffsetIsCorrected) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  const Pose prior = compose(truth, Pose::FromTranslation({0, 0.5, 0}, kBodyFrame, kBodyFrame));
  const TrackOutcome out = track(prior, detect(truth, 0.05, 11), map, TrackerConfig{});
  ASSERT_EQ(out.status, TrackStatus::kAccepted);
  EXPECT_LT((out.constraint->T_estimate.translation() - truth.translation()).norm(), 0.05);
}

TEST(Track, CoarseRetryWidensTheBasin) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  TrackerConfig single;
  single.retry_schedule.clear();
  int single_ok = 0;
  int retry_ok = 0;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 30; ++i) {
    const Pose prior = compose(truth, planar(u(rng), u(rng), 10 * u(rng), kBodyFrame, kBodyFrame));
    const PointCloud3 det = detect(truth, 0.05, 300 + i);
    auto recovered = [&](const TrackOutcome& out) {
      return out.accepted() &&
             (out.constraint->T_estimate.translation() - truth.translation()).norm() < 0.05;
    };
    const TrackOutcome a = track(prior, det, map, single);
    const TrackOutcome b = track(prior, det, map, TrackerConfig{});
    EXPECT_FALSE(a.diagnostics.retried);
    if (a.accepted()) {
      EXPECT_FALSE(b.diagnostics.retried);
    }
    single_ok += recovered(a);
    retry_ok += recovered(b);
  }
  EXPECT_GE(retry_ok, single_ok);
  EXPECT_GE(retry_ok, 28);
}

TEST(Track, TooFewPoints) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  PointCloud3 few(kBodyFrame);
  const PointCloud3 full = detect(truth, 0.0, 0);
  for (std::size_t i = 0; i < 10; ++i) few.push_back(full[i * 30]);
  const TrackOutcome out = track(truth, few, map, TrackerConfig{});
  EXPECT_EQ(out.status, TrackStatus::kTooFewPoints);
  EXPECT_FALSE(out.constraint.has_value());
}

TEST(Track, NoReferenceFarFromMap) {
  const Scene s = corner_scene({planar(12, 9, 20, kMapFrame, kBodyFrame)});
  const LocalizationMap map(s.base, s.curbs);
  const Pose far = planar(500, 500, 0, kMapFrame, kBodyFrame);
  const TrackOutcome out = track(far, detect(far, 0.0, 0), map, TrackerConfig{});
  EXPECT_EQ(out.status, TrackStatus::kNoReference);
  EXPECT_EQ(out.diagnostics.retrieval_distance, -1.0);
}

TEST(Track, ClutterIsRejected) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(-10.0, 10.0);
    std::bernoulli_distribution replace(0.6);
    const PointCloud3 clean = detect(truth, 0.05, 1000 + seed);
    PointCloud3 cluttered(kBodyFrame);
    for (const auto& p : clean) cluttered.push_back(replace(rng) ? Point3(box(rng), box(rng), kCurbZ) : p);
    const TrackOutcome out = track(truth, cluttered, map, TrackerConfig{});
    if (out.status != TrackStatus::kAccepted) {
      ++rejected;
      if (out.status == TrackStatus::kLowScore) {
        EXPECT_LE(out.diagnostics.score, TrackerConfig{}.p_min);
      }
    }
  }
  EXPECT_GE(rejected, 45);
}

TEST(Track, InvariantsOverRandomPriors) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  const TrackerConfig cfg;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::map<TrackStatus, int> counts;
  const int calls = 60;
  for (int i = 0; i < calls; ++i) {
    const Pose offset = planar(3 * u(rng), 3 * u(rng), 20 * u(rng), kBodyFrame, kBodyFrame);
    const Pose prior = compose(truth, offset);
    const TrackOutcome out = track(prior, detect(truth, 0.05, 200 + i), map, cfg);
    ++counts[out.status];
    EXPECT_EQ(out.accepted(), out.constraint.has_value());
    if (out.constraint) {
      EXPECT_GT(out.constraint->score, cfg.p_min);
    }
  }
  int total = 0;
  for (const auto& [status, n] : counts) total += n;
  EXPECT_EQ(total, calls);
}

TEST(Track, NoiselessCompositionIsExact) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth}, 0.0);
  const LocalizationMap map(s.base, s.curbs);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    const Pose prior = compose(truth, planar(0.5 * u(rng), 0.5 * u(rng), 3 * u(rng), kBodyFrame, kBodyFrame));
    const TrackOutcome out = track(prior, detect(truth, 0.0, 0), map, TrackerConfig{});
    ASSERT_TRUE(out.accepted()) << to_string(out.status);
    const Pose err = compose(out.constraint->T_estimate, truth.inverse());
    EXPECT_LT(err.translation().norm(), 0.02);
    EXPECT_LT(deg(err.rotation_angle()), 0.2);
  }
}

TEST(Track, RejectsWrongFrames) {
  const Pose truth = planar(12, 9, 20, kMapFrame, kBodyFrame);
  const Scene s = corner_scene({truth});
  const LocalizationMap map(s.base, s.curbs);
  EXPECT_THROW(track(truth, PointCloud3({{0, 0, 0}}, kMapFrame), map, TrackerConfig{}), FrameMismatchError);
  EXPECT_THROW(track(truth.inverse(), detect(truth, 0, 0), map, TrackerConfig{}), FrameMismatchError);
}
