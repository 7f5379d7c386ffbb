#include "curbloc/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

using json = nlohmann::ordered_json;

constexpr double kDeg = std::numbers::pi / 180.0;

json sigma_json(const Eigen::Matrix<double, 6, 1>& s, double scale) {
  return {{"x", s(0) * scale}, {"y", s(1) * scale}, {"z", s(2) * scale},
          {"roll_deg", s(3) * scale / kDeg}, {"pitch_deg", s(4) * scale / kDeg},
          {"yaw_deg", s(5) * scale / kDeg}};
}

Eigen::Matrix<double, 6, 1> sigma_from(const json& j) {
  Eigen::Matrix<double, 6, 1> s;
  s << j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>(),
      j.at("roll_deg").get<double>() * kDeg, j.at("pitch_deg").get<double>() * kDeg,
      j.at("yaw_deg").get<double>() * kDeg;
  return s;
}

json to_json(const AppConfig& c) {
  const auto& p = c.parameterization;
  const auto& t = c.localizer.tracker;
  const auto& n = t.ndt;
  const auto& g = c.localizer.graph;
  const auto& w = c.world;
  const auto& d = c.drive;
  const Eigen::Matrix<double, 6, 1> constraint_sigma = t.constraint_covariance.diagonal().cwiseSqrt();
  json dropouts = json::array();
  for (const auto& [a, b] : d.visual_dropouts) dropouts.push_back({a, b});
  const double lane = w.streets.empty() ? 8.0 : w.streets.front().lane_width;
  const double radius = w.intersections.empty() ? 6.0 : w.intersections.front().radius;
  return {
      {"format", "curbloc-config"},
      {"version", 1},
      {"parameterization",
       {{"voxel_leaf", p.voxel_leaf},
        {"cluster_tolerance", p.cluster_tolerance},
        {"max_segment_extent", p.max_segment_extent},
        {"ratio_threshold", p.ratio_threshold},
        {"wide_width_threshold", p.wide_width_threshold},
        {"control_points_per_meter", p.control_points_per_meter},
        {"min_control_points", p.min_control_points},
        {"wide_control_points", p.wide_control_points},
        {"ransac_iterations", p.ransac_iterations},
        {"sample_fraction", p.sample_fraction},
        {"min_goodness", p.min_goodness},
        {"min_fit_points", p.min_fit_points},
        {"inlier_distance", p.inlier_distance},
        {"sampling_spacing", p.sampling_spacing},
        {"refinement_passes", p.refinement_passes}}},
      {"tracker",
       {{"r_lookup", t.r_lookup},
        {"yaw_max_deg", t.yaw_max_deg},
        {"min_points", t.min_points},
        {"outlier_ratio", t.outlier_ratio},
        {"p_min", t.p_min},
        {"sampling_spacing", t.sampling_spacing},
        {"retry_schedule", t.retry_schedule},
        {"constraint_sigma", sigma_json(constraint_sigma, 1.0)},
        {"ndt",
         {{"cell_size", n.cell_size},
          {"min_cell_points", n.min_cell_points},
          {"eps_reg", n.eps_reg},
          {"min_variance", n.min_variance},
          {"min_major_variance", n.min_major_variance},
          {"max_iters", n.max_iters},
          {"conv_tol", n.conv_tol},
          {"max_condition", n.max_condition},
          {"initial_lambda", n.initial_lambda},
          {"smoothing_schedule", n.smoothing_schedule}}}}},
      {"graph",
       {{"window", g.window},
        {"max_iterations", g.max_iterations},
        {"update_tolerance", g.update_tolerance},
        {"odometry_sigma_per_meter", sigma_json(g.odometry_sigma_per_meter, 1.0)},
        {"min_odometry_distance", g.min_odometry_distance}}},
      {"localizer", {{"curb_tracking", c.localizer.curb_tracking}}},
      {"map",
       {{"max_time_gap_ms", static_cast<double>(c.max_time_gap) / static_cast<double>(kNsPerMs)},
        {"keyframe_stride", c.keyframe_stride}}},
      {"world",
       {{"width", c.world_width},
        {"height", c.world_height},
        {"lane_width", lane},
        {"intersection_radius", radius},
        {"curb_density", w.curb_density},
        {"curb_height", w.curb_height},
        {"break_min_spacing", w.break_min_spacing},
        {"break_max_spacing", w.break_max_spacing},
        {"break_min_length", w.break_min_length},
        {"break_max_length", w.break_max_length},
        {"turn_radius", w.turn_radius}}},
      {"drive",
       {{"odometry_sigma", d.odometry_sigma},
        {"odometry_yaw_sigma_deg", d.odometry_yaw_sigma / kDeg},
        {"detection_sigma", d.detection_sigma},
        {"dropout", d.dropout},
        {"clutter_rate", d.clutter_rate},
        {"clutter_range", d.clutter_range},
        {"sensor_range", d.sensor_range},
        {"frame_rate_hz", d.frame_rate_hz},
        {"speed", d.speed},
        {"visual_enabled", d.visual_enabled},
        {"visual_dropouts", dropouts}}},
  };
}

AppConfig from_json(const json& j) {
  AppConfig c;
  const auto& jp = j.at("parameterization");
  auto& p = c.parameterization;
  p.voxel_leaf = jp.at("voxel_leaf");
  p.cluster_tolerance = jp.at("cluster_tolerance");
  p.max_segment_extent = jp.at("max_segment_extent");
  p.ratio_threshold = jp.at("ratio_threshold");
  p.wide_width_threshold = jp.at("wide_width_threshold");
  p.control_points_per_meter = jp.at("control_points_per_meter");
  p.min_control_points = jp.at("min_control_points");
  p.wide_control_points = jp.at("wide_control_points");
  p.ransac_iterations = jp.at("ransac_iterations");
  p.sample_fraction = jp.at("sample_fraction");
  p.min_goodness = jp.at("min_goodness");
  p.min_fit_points = jp.at("min_fit_points");
  p.inlier_distance = jp.at("inlier_distance");
  p.sampling_spacing = jp.at("sampling_spacing");
  p.refinement_passes = jp.at("refinement_passes");

  const auto& jt = j.at("tracker");
  auto& t = c.localizer.tracker;
  t.r_lookup = jt.at("r_lookup");
  t.yaw_max_deg = jt.at("yaw_max_deg");
  t.min_points = jt.at("min_points");
  t.outlier_ratio = jt.at("outlier_ratio");
  t.p_min = jt.at("p_min");
  t.sampling_spacing = jt.at("sampling_spacing");
  t.retry_schedule = jt.at("retry_schedule").get<std::vector<double>>();
  t.constraint_covariance = sigma_from(jt.at("constraint_sigma")).cwiseAbs2().asDiagonal();
  const auto& jn = jt.at("ndt");
  auto& n = t.ndt;
  n.cell_size = jn.at("cell_size");
  n.min_cell_points = jn.at("min_cell_points");
  n.eps_reg = jn.at("eps_reg");
  n.min_variance = jn.at("min_variance");
  n.min_major_variance = jn.at("min_major_variance");
  n.max_iters = jn.at("max_iters");
  n.conv_tol = jn.at("conv_tol");
  n.max_condition = jn.at("max_condition");
  n.initial_lambda = jn.at("initial_lambda");
  n.smoothing_schedule = jn.at("smoothing_schedule").get<std::vector<double>>();

  const auto& jg = j.at("graph");
  auto& g = c.localizer.graph;
  g.window = jg.at("window");
  g.max_iterations = jg.at("max_iterations");
  g.update_tolerance = jg.at("update_tolerance");
  g.odometry_sigma_per_meter = sigma_from(jg.at("odometry_sigma_per_meter"));
  g.min_odometry_distance = jg.at("min_odometry_distance");

  c.localizer.curb_tracking = j.at("localizer").at("curb_tracking");
  const auto& jm = j.at("map");
  c.max_time_gap = static_cast<TimestampNs>(
      std::llround(jm.at("max_time_gap_ms").get<double>() * static_cast<double>(kNsPerMs)));
  c.keyframe_stride = jm.at("keyframe_stride");

  const auto& jw = j.at("world");
  c.world_width = jw.at("width");
  c.world_height = jw.at("height");
  c.world = loop_world_spec(0, c.world_width, c.world_height);
  for (auto& s : c.world.streets) s.lane_width = jw.at("lane_width");
  for (auto& x : c.world.intersections) x.radius = jw.at("intersection_radius");
  c.world.curb_density = jw.at("curb_density");
  c.world.curb_height = jw.at("curb_height");
  c.world.break_min_spacing = jw.at("break_min_spacing");
  c.world.break_max_spacing = jw.at("break_max_spacing");
  c.world.break_min_length = jw.at("break_min_length");
  c.world.break_max_length = jw.at("break_max_length");
  c.world.turn_radius = jw.at("turn_radius");

  const auto& jd = j.at("drive");
  auto& d = c.drive;
  d.odometry_sigma = jd.at("odometry_sigma");
  d.odometry_yaw_sigma = jd.at("odometry_yaw_sigma_deg").get<double>() * kDeg;
  d.detection_sigma = jd.at("detection_sigma");
  d.dropout = jd.at("dropout");
  d.clutter_rate = jd.at("clutter_rate");
  d.clutter_range = jd.at("clutter_range");
  d.sensor_range = jd.at("sensor_range");
  d.frame_rate_hz = jd.at("frame_rate_hz");
  d.speed = jd.at("speed");
  d.visual_enabled = jd.at("visual_enabled");
  d.visual_dropouts.clear();
  for (const auto& iv : jd.at("visual_dropouts")) {
    d.visual_dropouts.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
  }
  return c;
}

void check_known(const json& defaults, const json& given, const std::string& where) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const auto d = defaults.find(it.key());
    if (d == defaults.end()) throw FormatError("unknown config key " + where + it.key());
    if (d->is_object()) {
      if (!it->is_object()) throw FormatError("config key " + where + it.key() + " must be an object");
      check_known(*d, *it, where + it.key() + ".");
    }
  }
}

}  // namespace

std::string config_to_json(const AppConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

AppConfig config_from_json(const std::string& text) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!given.is_object()) throw FormatError("config must be a JSON object");
  json merged = to_json(AppConfig{});
  check_known(merged, given, "");
  if (given.contains("format") && given["format"] != "curbloc-config") {
    throw FormatError("not a curbloc config file");
  }
  if (given.contains("version") && given["version"] != 1) {
    throw FormatError("unsupported config version");
  }
  merged.merge_patch(given);
  try {
    AppConfig c = from_json(merged);
    c.localizer.tracker.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad config value: ") + e.what());
  } catch (const InvalidArgumentError& e) {
    throw FormatError(std::string("bad config value: ") + e.what());
  }
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::filesystem::path& path, const AppConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write config " + path.string());
  out << config_to_json(cfg);
}

}  // namespace curbloc
