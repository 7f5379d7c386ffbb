#include "curbloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "curbloc/curb_map.hpp"
#include "curbloc/errors.hpp"
#include "curbloc/parameterization.hpp"

namespace curbloc {

namespace {

using Interval = std::pair<double, double>;

double cross2(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const Point2 r = b - a;
  const Point2 s = d - c;
  const double denom = cross2(r, s);
  const Point2 ac = c - a;
  if (std::abs(denom) < 1e-12) {
    if (std::abs(cross2(ac, r)) > 1e-9) return false;
    const double rr = r.squaredNorm();
    if (rr == 0.0) return false;
    const double t0 = ac.dot(r) / rr;
    const double t1 = (d - a).dot(r) / rr;
    return std::max(t0, t1) >= 0.0 && std::min(t0, t1) <= 1.0;
  }
  const double t = cross2(ac, s) / denom;
  const double u = cross2(ac, r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

void check_simple(const std::vector<Point2>& line, bool closed, const std::string& what) {
  const std::size_t n = line.size();
  const std::size_t segments = closed ? n : n - 1;
  for (std::size_t i = 0; i < segments; ++i) {
    for (std::size_t j = i + 2; j < segments; ++j) {
      if (closed && i == 0 && j == segments - 1) continue;
      if (segments_intersect(line[i], line[(i + 1) % n], line[j], line[(j + 1) % n])) {
        throw InvalidArgumentError(what + " polyline intersects itself");
      }
    }
  }
}

std::vector<Point2> offset_polyline(const std::vector<Point2>& line, double offset) {
  const std::size_t n = line.size();
  std::vector<Point2> out(n);
  auto normal = [&](std::size_t i) {
    const Point2 d = (line[i + 1] - line[i]).normalized();
    return Point2(-d.y(), d.x());
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out[i] = line[i] + offset * normal(0);
    } else if (i + 1 == n) {
      out[i] = line[i] + offset * normal(n - 2);
    } else {
      const Point2 n0 = normal(i - 1);
      const Point2 n1 = normal(i);
      const Point2 m = (n0 + n1).normalized();
      out[i] = line[i] + m * (offset / std::max(m.dot(n0), 0.2));
    }
  }
  return out;
}

std::vector<Interval> merge(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

// Parameter range [t0, t1] of segment a + t (b - a), t in [0, 1], inside the
// disc; false when the segment misses it.
bool clip_to_disc(const Point2& a, const Point2& b, const Point2& c, double r, double& t0,
                  double& t1) {
  const Point2 d = b - a;
  const Point2 f = a - c;
  const double A = d.squaredNorm();
  if (A == 0.0) return false;
  const double B = 2.0 * f.dot(d);
  const double C = f.squaredNorm() - r * r;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return false;
  const double sq = std::sqrt(disc);
  t0 = std::max(0.0, (-B - sq) / (2.0 * A));
  t1 = std::min(1.0, (-B + sq) / (2.0 * A));
  return t1 > t0;
}

std::vector<double> cumulative(const std::vector<Point2>& line) {
  std::vector<double> s(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) s[i] = s[i - 1] + (line[i] - line[i - 1]).norm();
  return s;
}

Point2 point_at(const std::vector<Point2>& line, const std::vector<double>& s, double at) {
  const auto it = std::upper_bound(s.begin(), s.end(), at);
  const std::size_t i = std::min<std::size_t>(
      it == s.begin() ? 0 : static_cast<std::size_t>(it - s.begin()) - 1, line.size() - 2);
  const double len = s[i + 1] - s[i];
  const double u = len > 0.0 ? std::clamp((at - s[i]) / len, 0.0, 1.0) : 0.0;
  return line[i] + u * (line[i + 1] - line[i]);
}

std::vector<Point2> sub_polyline(const std::vector<Point2>& line, const std::vector<double>& s,
                                 double from, double to) {
  std::vector<Point2> out{point_at(line, s, from)};
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (s[i] > from && s[i] < to) out.push_back(line[i]);
  }
  out.push_back(point_at(line, s, to));
  return out;
}

double wrap_pi(double a) { return std::atan2(std::sin(a), std::cos(a)); }

std::vector<PathPiece> build_path(const WorldSpec& spec) {
  const auto& pts = spec.route;
  const std::size_t n = pts.size();
  const bool closed = spec.route_closed;
  std::vector<PathPiece> path;
  if (n < 2) throw InvalidArgumentError("route needs at least two points");

  // Tangent points of the fillet at every corner.
  struct Corner {
    bool filleted = false;
    Point2 in, out, center;
    double start_angle = 0.0, sweep = 0.0;
  };
  std::vector<Corner> corners(n);
  for (std::size_t k = 0; k < n; ++k) {
    const bool interior = closed || (k > 0 && k + 1 < n);
    corners[k].in = corners[k].out = pts[k];
    if (!interior || spec.turn_radius <= 0.0) continue;
    const Point2 prev = pts[(k + n - 1) % n];
    const Point2 next = pts[(k + 1) % n];
    const Point2 d_in = (pts[k] - prev).normalized();
    const Point2 d_out = (next - pts[k]).normalized();
    const double phi = std::atan2(cross2(d_in, d_out), d_in.dot(d_out));
    if (std::abs(phi) < 1e-9) continue;
    const double L = spec.turn_radius * std::tan(std::abs(phi) / 2.0);
    if (L > 0.5 * (pts[k] - prev).norm() || L > 0.5 * (next - pts[k]).norm()) {
      throw InvalidArgumentError("route segment too short for the turn radius");
    }
    Corner& c = corners[k];
    c.filleted = true;
    c.in = pts[k] - d_in * L;
    c.out = pts[k] + d_out * L;
    const Point2 left(-d_in.y(), d_in.x());
    c.center = c.in + (phi > 0.0 ? 1.0 : -1.0) * spec.turn_radius * left;
    c.start_angle = std::atan2(c.in.y() - c.center.y(), c.in.x() - c.center.x());
    c.sweep = phi;
  }

  auto add_line = [&](const Point2& a, const Point2& b) {
    const double len = (b - a).norm();
    if (len <= 1e-12) return;
    PathPiece p;
    p.start = a;
    p.end = b;
    p.length = len;
    path.push_back(p);
  };
  auto add_arc = [&](const Corner& c) {
    if (!c.filleted) return;
    PathPiece p;
    p.arc = true;
    p.start = c.in;
    p.end = c.out;
    p.center = c.center;
    p.radius = spec.turn_radius;
    p.start_angle = c.start_angle;
    p.sweep = c.sweep;
    p.length = spec.turn_radius * std::abs(c.sweep);
    path.push_back(p);
  };
  if (closed) {
    for (std::size_t k = 0; k < n; ++k) {
      add_line(corners[k].out, corners[(k + 1) % n].in);
      add_arc(corners[(k + 1) % n]);
    }
  } else {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      add_line(corners[k].out, corners[k + 1].in);
      if (k + 2 < n) add_arc(corners[k + 1]);
    }
  }
  return path;
}

template <typename Rng>
std::size_t poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::size_t>(mean)(rng);
}

}  // namespace

Pose World::pose_at(double s) const {
  if (path.empty()) throw InvalidArgumentError("world has no path");
  double rest = std::clamp(s, 0.0, path_length);
  std::size_t i = 0;
  while (i + 1 < path.size() && rest > path[i].length) {
    rest -= path[i].length;
    ++i;
  }
  const PathPiece& p = path[i];
  Point2 pos;
  double heading = 0.0;
  if (p.arc) {
    const double dir = p.sweep > 0.0 ? 1.0 : -1.0;
    const double a = p.start_angle + dir * std::min(rest, p.length) / p.radius;
    pos = p.center + p.radius * Point2(std::cos(a), std::sin(a));
    heading = wrap_pi(a + dir * std::numbers::pi / 2.0);
  } else {
    const Point2 d = (p.end - p.start) / p.length;
    pos = p.start + d * std::min(rest, p.length);
    heading = std::atan2(d.y(), d.x());
  }
  return Pose::FromXYZYaw(pos.x(), pos.y(), 0.0, heading, kMapFrame, kBodyFrame);
}

double World::curb_length() const {
  double total = 0.0;
  for (const auto& c : curbs) {
    for (std::size_t i = 1; i < c.size(); ++i) total += (c[i] - c[i - 1]).norm();
  }
  return total;
}

double World::curb_coverage() const {
  double nominal = 0.0;
  for (const auto& s : spec.streets) {
    const auto cum = cumulative(s.centerline);
    nominal += 2.0 * cum.back();
  }
  return nominal > 0.0 ? curb_length() / nominal : 0.0;
}

World generate_world(const WorldSpec& spec) {
  if (!(spec.curb_density > 0.0)) throw InvalidArgumentError("curb density must be positive");
  if (!(spec.curb_height >= 0.0)) throw InvalidArgumentError("curb height must be non-negative");
  if (spec.break_max_spacing > 0.0 &&
      (!(spec.break_min_spacing > 0.0) || spec.break_max_spacing < spec.break_min_spacing ||
       spec.break_min_length < 0.0 || spec.break_max_length < spec.break_min_length)) {
    throw InvalidArgumentError("invalid driveway break parameters");
  }
  for (std::size_t k = 0; k < spec.streets.size(); ++k) {
    const auto& s = spec.streets[k];
    if (s.centerline.size() < 2) throw InvalidArgumentError("street needs at least two points");
    if (!(s.lane_width > 0.0)) throw InvalidArgumentError("lane width must be positive");
    for (std::size_t i = 1; i < s.centerline.size(); ++i) {
      if ((s.centerline[i] - s.centerline[i - 1]).norm() <= 1e-9) {
        throw InvalidArgumentError("street has repeated points");
      }
    }
    check_simple(s.centerline, false, "street " + std::to_string(k));
  }
  for (const auto& x : spec.intersections) {
    if (!(x.radius > 0.0)) throw InvalidArgumentError("intersection radius must be positive");
  }

  World world;
  world.spec = spec;
  for (std::size_t k = 0; k < spec.streets.size(); ++k) {
    const auto& street = spec.streets[k];
    for (int side = 0; side < 2; ++side) {
      const double offset = (side == 0 ? 0.5 : -0.5) * street.lane_width;
      const auto line = offset_polyline(street.centerline, offset);
      const auto cum = cumulative(line);
      const double total = cum.back();

      std::vector<Interval> removed;
      for (const auto& x : spec.intersections) {
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
          double t0 = 0.0;
          double t1 = 0.0;
          if (clip_to_disc(line[i], line[i + 1], x.position, x.radius, t0, t1)) {
            const double len = cum[i + 1] - cum[i];
            removed.emplace_back(cum[i] + t0 * len, cum[i] + t1 * len);
          }
        }
      }
      std::mt19937_64 rng(derive_seed(spec.seed, 2 * k + static_cast<std::uint64_t>(side)));
      if (spec.break_max_spacing > 0.0) {
        std::uniform_real_distribution<double> run(spec.break_min_spacing, spec.break_max_spacing);
        std::uniform_real_distribution<double> len(spec.break_min_length, spec.break_max_length);
        for (double s = run(rng); s < total; s += run(rng)) {
          const double l = len(rng);
          removed.emplace_back(s, s + l);
          s += l;
        }
      }
      removed = merge(std::move(removed));

      double from = 0.0;
      auto keep = [&](double a, double b) {
        if (b - a < 0.5) return;
        std::vector<Point3> curb;
        for (const auto& p : sub_polyline(line, cum, a, b)) {
          curb.emplace_back(p.x(), p.y(), spec.curb_height);
        }
        world.curbs.push_back(std::move(curb));
      };
      for (const auto& [a, b] : removed) {
        if (a > from) keep(from, std::min(a, total));
        from = std::max(from, b);
      }
      if (from < total) keep(from, total);
    }
  }

  if (!spec.route.empty()) {
    check_simple(spec.route, spec.route_closed, "route");
    world.path = build_path(spec);
    for (const auto& p : world.path) world.path_length += p.length;
  }
  return world;
}

WorldSpec loop_world_spec(std::uint64_t seed, double width, double height) {
  constexpr double kOverhang = 60.0;
  WorldSpec spec;
  spec.seed = seed;
  spec.streets = {
      {{{-kOverhang, 0.0}, {width + kOverhang, 0.0}}, 8.0},
      {{{-kOverhang, height}, {width + kOverhang, height}}, 8.0},
      {{{0.0, -kOverhang}, {0.0, height + kOverhang}}, 8.0},
      {{{width, -kOverhang}, {width, height + kOverhang}}, 8.0},
  };
  for (const Point2& c : {Point2(0.0, 0.0), Point2(width, 0.0), Point2(width, height),
                         Point2(0.0, height)}) {
    spec.intersections.push_back({c, 6.0});
  }
  spec.route = {{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}};
  spec.route_closed = true;
  return spec;
}

WorldSpec straight_street_spec(std::uint64_t seed, double length) {
  WorldSpec spec;
  spec.seed = seed;
  spec.streets = {{{{0.0, 0.0}, {length, 0.0}}, 8.0}};
  spec.break_max_spacing = 0.0;
  spec.route = {{0.0, 0.0}, {length, 0.0}};
  return spec;
}

std::vector<DriveFrame> simulate_drive(const World& world, const DriveNoise& noise) {
  if (world.path.empty()) throw InvalidArgumentError("world has no route to drive");
  if (!(noise.frame_rate_hz > 0.0) || !(noise.speed > 0.0)) {
    throw InvalidArgumentError("frame rate and speed must be positive");
  }
  if (noise.dropout < 0.0 || noise.dropout > 1.0) {
    throw InvalidArgumentError("dropout must lie in [0, 1]");
  }
  if (noise.odometry_sigma < 0.0 || noise.odometry_yaw_sigma < 0.0 ||
      noise.detection_sigma < 0.0 || noise.clutter_rate < 0.0 || noise.clutter_range < 0.0 ||
      !(noise.sensor_range > 0.0)) {
    throw InvalidArgumentError("noise parameters must be non-negative");
  }
  const double step = noise.speed / noise.frame_rate_hz;
  const auto count = static_cast<std::size_t>(std::floor(world.path_length / step + 1e-9)) + 1;
  const auto dt_ns = static_cast<TimestampNs>(std::llround(1e9 / noise.frame_rate_hz));
  const double h = world.spec.curb_height;
  const double clip_radius = std::sqrt(std::max(0.0, noise.sensor_range * noise.sensor_range - h * h));

  std::mt19937_64 odo_rng(derive_seed(noise.seed, 0x6f646f6dULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<DriveFrame> frames;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    DriveFrame f;
    f.timestamp = static_cast<TimestampNs>(k) * dt_ns;
    f.distance = static_cast<double>(k) * step;
    f.gt_pose = world.pose_at(f.distance);
    if (k > 0) {
      const Pose rel = compose(frames.back().gt_pose.inverse(), f.gt_pose);
      const double d = rel.translation().norm();
      const double st = noise.odometry_sigma * std::sqrt(d);
      const double sy = noise.odometry_yaw_sigma * std::sqrt(d);
      Eigen::Vector3d dt(st * gauss(odo_rng), st * gauss(odo_rng), st * gauss(odo_rng));
      const double dyaw = sy * gauss(odo_rng);
      f.odom_step = Pose(rel.rotation() * so3::exp(Eigen::Vector3d(0.0, 0.0, dyaw)),
                         rel.translation() + dt, kBodyFrame, kBodyFrame);
    }
    f.visual_available = noise.visual_enabled;
    for (const auto& [a, b] : noise.visual_dropouts) {
      if (f.distance >= a && f.distance < b) f.visual_available = false;
    }

    std::mt19937_64 rng(derive_seed(noise.seed, 1 + k));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Pose to_body = f.gt_pose.inverse();
    const Point2 here = f.gt_pose.translation().head<2>();
    for (const auto& curb : world.curbs) {
      for (std::size_t i = 0; i + 1 < curb.size(); ++i) {
        const Point2 a = curb[i].head<2>();
        const Point2 b = curb[i + 1].head<2>();
        double t0 = 0.0;
        double t1 = 0.0;
        if (!clip_to_disc(a, b, here, clip_radius, t0, t1)) continue;
        const double len = (t1 - t0) * (b - a).norm();
        const std::size_t n = poisson(rng, world.spec.curb_density * len);
        for (std::size_t j = 0; j < n; ++j) {
          const double t = t0 + (t1 - t0) * unit(rng);
          const bool dropped = unit(rng) < noise.dropout;
          const Eigen::Vector3d e(gauss(rng), gauss(rng), gauss(rng));
          if (dropped) continue;
          const Point2 q = a + t * (b - a);
          const Point3 body = to_body.transform_point(Point3(q.x(), q.y(), h));
          f.detection.push_back(body + noise.detection_sigma * e);
        }
      }
    }
    const double area = std::numbers::pi * noise.clutter_range * noise.clutter_range;
    const std::size_t clutter = poisson(rng, noise.clutter_rate * area);
    for (std::size_t j = 0; j < clutter; ++j) {
      const double r = noise.clutter_range * std::sqrt(unit(rng));
      const double th = 2.0 * std::numbers::pi * unit(rng);
      f.detection.push_back(Point3(r * std::cos(th), r * std::sin(th), 2.0 * h * unit(rng)));
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

PointCloud3 sample_world_curbs(const World& world, double density, double sigma,
                               std::uint64_t seed) {
  if (!(density > 0.0)) throw InvalidArgumentError("density must be positive");
  std::mt19937_64 rng(derive_seed(seed, 0x63757262ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  PointCloud3 out(kMapFrame);
  for (const auto& curb : world.curbs) {
    for (std::size_t i = 0; i + 1 < curb.size(); ++i) {
      const Point3 d = curb[i + 1] - curb[i];
      const auto n = static_cast<std::size_t>(std::max(1.0, std::round(d.norm() * density)));
      for (std::size_t j = 0; j < n; ++j) {
        const Point3 p = curb[i] + d * ((static_cast<double>(j) + 0.5) / static_cast<double>(n));
        out.push_back(p + sigma * Point3(gauss(rng), gauss(rng), gauss(rng)));
      }
    }
  }
  return out;
}

BaseMap base_map_from_drive(const std::vector<DriveFrame>& frames, SessionId session,
                            VertexId first_id, std::size_t keyframe_stride) {
  if (keyframe_stride == 0) throw InvalidArgumentError("keyframe stride must be positive");
  BaseMap map;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    BaseMapVertex v;
    v.id = first_id + static_cast<VertexId>(k);
    v.timestamp = frames[k].timestamp;
    v.T_MB = frames[k].gt_pose;
    v.session_id = session;
    map.add_vertex(std::move(v));
  }
  for (std::size_t k = 0; k < frames.size(); k += keyframe_stride) {
    if (frames[k].detection.empty()) continue;
    associate_observation(map, frames[k].detection, frames[k].timestamp);
  }
  return map;
}

}  // namespace curbloc
