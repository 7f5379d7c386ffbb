#include "curbloc/io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "curbloc/cloud_io.hpp"
#include "curbloc/errors.hpp"

namespace curbloc {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::ordered_json;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

void check_header(const json& j, const std::string& format, const fs::path& path) {
  if (!j.is_object() || j.value("format", std::string{}) != format) {
    throw FormatError(path.string() + " is not a " + format + " file");
  }
  if (j.value("version", 0) != kFileFormatVersion) {
    throw FormatError(path.string() + ": unsupported version");
  }
}

json point_json(const Point3& p) { return {p.x(), p.y(), p.z()}; }

Point3 point_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json pose_json(const Pose& p) {
  const auto& q = p.rotation();
  return {{"q_wxyz", {q.w(), q.x(), q.y(), q.z()}}, {"t_xyz", point_json(p.translation())}};
}

Pose pose_from(const json& j, const FrameId& parent, const FrameId& child) {
  const auto& q = j.at("q_wxyz");
  Eigen::Quaterniond r(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                       q.at(3).get<double>());
  if (!(r.norm() > 0.0)) throw FormatError("zero quaternion");
  return Pose(r.normalized(), point_from(j.at("t_xyz")), parent, child);
}

template <typename F>
auto parse_guard(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const InvalidArgumentError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_cloud_file(const fs::path& path, const PointCloud3& cloud) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_cloud_csv(out, cloud);
}

PointCloud3 read_cloud_file(const fs::path& path, const FrameId& frame) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_cloud_csv(in, frame);
}

const char* kind_name(SegmentKind k) { return k == SegmentKind::kSpline ? "spline" : "raw"; }

SegmentKind kind_from(const std::string& s) {
  if (s == "spline") return SegmentKind::kSpline;
  if (s == "raw") return SegmentKind::kRaw;
  throw FormatError("unknown segment kind " + s);
}

constexpr std::array<std::pair<FallbackReason, const char*>, 5> kFallbackNames{{
    {FallbackReason::kNone, "none"},
    {FallbackReason::kTooFewPoints, "too_few_points"},
    {FallbackReason::kLowRatio, "low_ratio"},
    {FallbackReason::kSingular, "singular"},
    {FallbackReason::kLowGoodness, "low_goodness"},
}};

const char* fallback_name(FallbackReason r) {
  for (const auto& [v, n] : kFallbackNames) {
    if (v == r) return n;
  }
  return "none";
}

FallbackReason fallback_from(const std::string& s) {
  for (const auto& [v, n] : kFallbackNames) {
    if (s == n) return v;
  }
  throw FormatError("unknown fallback reason " + s);
}

}  // namespace

void save_base_map(const fs::path& path, const BaseMap& map) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const std::string stem = path.stem().string();
  json vertices = json::array();
  for (const auto& v : map.vertices()) {
    json jv = {{"id", v.id}, {"timestamp_ns", v.timestamp}, {"session", v.session_id}};
    jv.update(pose_json(v.T_MB));
    if (v.curb_observation) {
      const fs::path rel = fs::path(stem + "_clouds") / fmt::format("{}.csv", v.id);
      write_cloud_file(dir / rel, *v.curb_observation);
      jv["curb_cloud"] = rel.generic_string();
    } else if (v.has_curb_data) {
      throw InvalidArgumentError(
          fmt::format("vertex {} claims curb data but its cloud is not loaded", v.id));
    }
    vertices.push_back(std::move(jv));
  }
  write_json(path, {{"format", "curbloc-base-map"},
                    {"version", kFileFormatVersion},
                    {"vertices", std::move(vertices)}});
}

BaseMap load_base_map(const fs::path& path, bool load_clouds) {
  const json j = read_json(path);
  check_header(j, "curbloc-base-map", path);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_guard(path, [&] {
    BaseMap map;
    for (const auto& jv : j.at("vertices")) {
      BaseMapVertex v;
      v.id = jv.at("id");
      v.timestamp = jv.at("timestamp_ns");
      v.session_id = jv.at("session");
      v.T_MB = pose_from(jv, kMapFrame, kBodyFrame);
      if (jv.contains("curb_cloud")) {
        v.has_curb_data = true;
        if (load_clouds) {
          v.curb_observation =
              read_cloud_file(dir / jv.at("curb_cloud").get<std::string>(), kBodyFrame);
        }
      }
      map.add_vertex(std::move(v));
    }
    return map;
  });
}

void save_curb_map(const fs::path& path, const CurbMap& map) {
  json segments = json::array();
  for (const auto& s : map.segments) {
    json js = {{"kind", kind_name(s.kind)},
               {"goodness", s.goodness},
               {"fallback", fallback_name(s.fallback)},
               {"bounds", {{"min", point_json(s.bounds.min)}, {"max", point_json(s.bounds.max)}}}};
    json pts = json::array();
    if (s.is_spline()) {
      for (const auto& p : s.control_points) pts.push_back(point_json(p));
      js["control_points"] = std::move(pts);
      js["knots"] = s.knots;
    } else {
      for (const auto& p : s.raw_points) pts.push_back(point_json(p));
      js["raw_points"] = std::move(pts);
    }
    segments.push_back(std::move(js));
  }
  write_json(path, {{"format", "curbloc-curb-map"},
                    {"version", kFileFormatVersion},
                    {"sessions", map.sessions},
                    {"total_raw_points", map.total_raw_points},
                    {"segments", std::move(segments)}});
}

CurbMap load_curb_map(const fs::path& path) {
  const json j = read_json(path);
  check_header(j, "curbloc-curb-map", path);
  return parse_guard(path, [&] {
    CurbMap map;
    map.sessions = j.at("sessions").get<std::vector<SessionId>>();
    map.total_raw_points = j.at("total_raw_points");
    for (const auto& js : j.at("segments")) {
      CurbSegment s;
      s.kind = kind_from(js.at("kind"));
      s.goodness = js.at("goodness");
      s.fallback = fallback_from(js.at("fallback"));
      s.bounds.min = point_from(js.at("bounds").at("min"));
      s.bounds.max = point_from(js.at("bounds").at("max"));
      if (s.is_spline()) {
        for (const auto& p : js.at("control_points")) s.control_points.push_back(point_from(p));
        s.knots = js.at("knots").get<std::vector<double>>();
        (void)s.spline();  // validates the knot vector
      } else {
        for (const auto& p : js.at("raw_points")) s.raw_points.push_back(point_from(p));
      }
      map.segments.push_back(std::move(s));
    }
    return map;
  });
}

void save_dataset(const fs::path& dir, const std::vector<DriveFrame>& frames) {
  json jf = json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const std::string rel = fmt::format("frames/{:06d}.csv", k);
    write_cloud_file(dir / rel, f.detection);
    jf.push_back({{"timestamp_ns", f.timestamp},
                  {"distance", f.distance},
                  {"gt_pose", pose_json(f.gt_pose)},
                  {"odom_step", pose_json(f.odom_step)},
                  {"visual_available", f.visual_available},
                  {"detection", rel}});
  }
  write_json(dir / "manifest.json", {{"format", "curbloc-dataset"},
                                     {"version", kFileFormatVersion},
                                     {"frames", std::move(jf)}});
}

std::vector<DriveFrame> load_dataset(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  const json j = read_json(manifest);
  check_header(j, "curbloc-dataset", manifest);
  return parse_guard(manifest, [&] {
    std::vector<DriveFrame> frames;
    for (const auto& jf : j.at("frames")) {
      DriveFrame f;
      f.timestamp = jf.at("timestamp_ns");
      f.distance = jf.at("distance");
      f.gt_pose = pose_from(jf.at("gt_pose"), kMapFrame, kBodyFrame);
      f.odom_step = pose_from(jf.at("odom_step"), kBodyFrame, kBodyFrame);
      f.visual_available = jf.at("visual_available");
      f.detection = read_cloud_file(dir / jf.at("detection").get<std::string>(), kBodyFrame);
      frames.push_back(std::move(f));
    }
    return frames;
  });
}

void write_trajectory_csv(const fs::path& path, const std::vector<TrajectorySample>& samples) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "timestamp,x,y,z,qw,qx,qy,qz,localized\n";
  for (const auto& s : samples) {
    const auto& t = s.pose.translation();
    const auto& q = s.pose.rotation();
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", s.timestamp, t.x(), t.y(), t.z(), q.w(),
                       q.x(), q.y(), q.z(), s.localized ? 1 : 0);
  }
}

std::vector<TrajectorySample> read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("timestamp,", 0) != 0) {
    throw FormatError(path.string() + ": missing trajectory header");
  }
  std::vector<TrajectorySample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) {
      throw FormatError(fmt::format("{}:{}: expected 9 columns", path.string(), lineno));
    }
    try {
      double v[7];
      for (int i = 0; i < 7; ++i) v[i] = std::stod(cells[i + 1]);
      Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
      TrajectorySample s;
      s.timestamp = std::stoll(cells[0]);
      s.pose = Pose(q.normalized(), Eigen::Vector3d(v[0], v[1], v[2]), kMapFrame, kBodyFrame);
      s.localized = std::stoi(cells[8]) != 0;
      out.push_back(std::move(s));
    } catch (const std::logic_error&) {
      throw FormatError(fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
  }
  return out;
}

void write_diagnostics_jsonl(const fs::path& path, const std::vector<FrameRecord>& run) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& f : run) {
    json j = {{"timestamp_ns", f.timestamp},
              {"localized", f.localized},
              {"visual_available", f.visual_available},
              {"graph_ms", f.graph_ms}};
    if (f.outcome) {
      const auto& d = f.outcome->diagnostics;
      j["tracking_ms"] = f.tracking_ms;
      j["status"] = to_string(f.outcome->status);
      j["score"] = d.score;
      j["detection_points"] = d.detection_points;
      j["reference_points"] = d.reference_points;
      j["retrieval_distance"] = d.retrieval_distance;
      j["reference_vertex"] = d.reference_vertex;
      j["iterations"] = d.iterations;
      j["converged"] = d.converged;
      j["retried"] = d.retried;
      j["condition_number"] = std::isfinite(d.condition_number) ? json(d.condition_number) : json();
      j["registration_ms"] = d.runtime_ms;
    }
    out << j.dump() << "\n";
  }
}

RuntimeReport runtime_from_diagnostics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  RuntimeReport r;
  double graph = 0.0;
  std::size_t frames = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ++frames;
      graph += j.at("graph_ms").get<double>();
      if (j.contains("tracking_ms")) {
        ++r.tracked_frames;
        r.curb_tracking_ms += j.at("tracking_ms").get<double>();
      }
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  if (r.tracked_frames > 0) r.curb_tracking_ms /= static_cast<double>(r.tracked_frames);
  if (frames > 0) r.graph_update_ms = graph / static_cast<double>(frames);
  return r;
}

std::string metrics_csv_header() {
  return "dataset_id,map_sessions,recall_pct,distance_m,frames,localized_frames,"
         "planar_median_m,planar_p90_m,lateral_median_m,lateral_p90_m,"
         "orientation_median_deg,orientation_p90_deg,vertical_median_m,vertical_p90_m,"
         "curb_tracking_ms,graph_update_ms";
}

std::string metrics_csv_line(const MetricsRow& row) {
  const auto& m = row.metrics;
  const auto num = [](double v) { return fmt::format("{:.4f}", v); };
  const std::string tracking = row.runtime.empty() ? "-" : num(row.runtime.curb_tracking_ms);
  const std::string graph = num(row.runtime.graph_update_ms);
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", row.dataset_id,
                     row.map_sessions, num(m.recall_pct), num(m.distance), m.frames,
                     m.localized_frames, num(m.planar.median), num(m.planar.p90),
                     num(m.lateral.median), num(m.lateral.p90), num(m.orientation.median),
                     num(m.orientation.p90), num(m.vertical.median), num(m.vertical.p90),
                     tracking, graph);
}

void append_metrics_csv(const fs::path& path, const MetricsRow& row) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot write " + path.string());
  if (fresh) out << metrics_csv_header() << "\n";
  out << metrics_csv_line(row) << "\n";
}

}  // namespace curbloc
