#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "curbloc/config.hpp"
#include "curbloc/errors.hpp"
#include "curbloc/io.hpp"

namespace fs = std::filesystem;
using namespace curbloc;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "JSON config; missing keys keep their defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
}

AppConfig config_of(const Common& c) {
  return c.config.empty() ? AppConfig{} : load_config(c.config);
}

std::vector<std::pair<double, double>> parse_intervals(const std::vector<std::string>& specs) {
  std::vector<std::pair<double, double>> out;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw InvalidArgumentError("interval must be START:END, got " + s);
    const double a = std::stod(s.substr(0, colon));
    const double b = std::stod(s.substr(colon + 1));
    if (!(b > a)) throw InvalidArgumentError("interval end must exceed its start: " + s);
    out.emplace_back(a, b);
  }
  return out;
}

int run_simulate(const Common& c, std::uint64_t world_seed, bool mapping, bool no_visual,
                 const std::vector<std::string>& dropouts) {
  AppConfig cfg = config_of(c);
  cfg.world.seed = world_seed;
  const World world = generate_world(cfg.world);
  DriveNoise noise = cfg.drive;
  noise.seed = c.seed;
  if (mapping) noise.clutter_rate = 0.0;
  if (no_visual) noise.visual_enabled = false;
  const auto extra = parse_intervals(dropouts);
  noise.visual_dropouts.insert(noise.visual_dropouts.end(), extra.begin(), extra.end());
  const auto frames = simulate_drive(world, noise);
  save_dataset(c.out, frames);
  spdlog::info("{} frames over {:.1f} m, curb coverage {:.3f}, written to {}", frames.size(),
               world.path_length, world.curb_coverage(), c.out);
  return 0;
}

int run_build_map(const Common& c, const std::string& dataset, SessionId session,
                  const std::string& append) {
  const AppConfig cfg = config_of(c);
  const auto frames = load_dataset(dataset);
  BaseMap merged;
  VertexId first_id = 0;
  if (!append.empty()) {
    merged = load_base_map(fs::path(append) / "base_map.json");
    const auto& s = merged.sessions();
    if (std::find(s.begin(), s.end(), session) != s.end()) {
      throw SessionCollisionError(fmt::format("session {} already in {}", session, append));
    }
    for (const auto& v : merged.vertices()) first_id = std::max(first_id, v.id + 1);
  }
  const BaseMap fresh = base_map_from_drive(frames, session, first_id, cfg.keyframe_stride);
  for (const auto& v : fresh.vertices()) merged.add_vertex(v);
  fs::create_directories(c.out);
  save_base_map(fs::path(c.out) / "base_map.json", merged);
  spdlog::info("base map with {} vertices in {} session(s) written to {}", merged.size(),
               merged.sessions().size(), c.out);
  return 0;
}

int run_parameterize(const Common& c, const std::string& map_dir) {
  const AppConfig cfg = config_of(c);
  const fs::path dir = map_dir;
  CurbMap curbs = build_curb_map(load_base_map(dir / "base_map.json"));
  parameterize_curb_map(curbs, cfg.parameterization, c.seed);
  const fs::path out = c.out.empty() ? dir : fs::path(c.out);
  fs::create_directories(out);
  save_curb_map(out / "curb_map.json", curbs);
  const auto splines = std::count_if(curbs.segments.begin(), curbs.segments.end(),
                                     [](const CurbSegment& s) { return s.is_spline(); });
  spdlog::info("{} segments ({} splines), {} stored of {} raw points", curbs.segments.size(),
               splines, curbs.stored_point_count(), curbs.total_raw_points);
  return 0;
}

int run_localize(const Common& c, const std::string& map_dir, const std::string& dataset,
                 bool no_curbs) {
  AppConfig cfg = config_of(c);
  if (no_curbs) cfg.localizer.curb_tracking = false;
  const fs::path dir = map_dir;
  const BaseMap base = load_base_map(dir / "base_map.json", false);
  const CurbMap curbs = load_curb_map(dir / "curb_map.json");
  const LocalizationMap map(base, curbs, cfg.localizer.tracker.sampling_spacing);
  const auto frames = load_dataset(dataset);
  if (frames.empty()) throw InvalidArgumentError("dataset has no frames");
  const auto run = localize(frames, frames.front().gt_pose, map, cfg.localizer);
  const fs::path out = c.out;
  write_trajectory_csv(out / "trajectory.csv", to_trajectory(run));
  write_diagnostics_jsonl(out / "diagnostics.jsonl", run);
  const auto localized = std::count_if(run.begin(), run.end(), [](const FrameRecord& f) { return f.localized; });
  spdlog::info("{} of {} frames localized; trajectory and diagnostics in {}", localized,
               run.size(), c.out);
  return 0;
}

int run_evaluate(const Common& c, const std::string& dataset, const std::string& trajectory,
                 const std::string& diagnostics, const std::string& dataset_id,
                 const std::string& map_sessions) {
  const auto truth = ground_truth(load_dataset(dataset));
  const auto estimates = read_trajectory_csv(trajectory);
  MetricsRow row;
  row.dataset_id = dataset_id.empty() ? fs::path(dataset).filename().string() : dataset_id;
  row.map_sessions = map_sessions;
  row.metrics = evaluate(estimates, truth);
  if (!diagnostics.empty()) row.runtime = runtime_from_diagnostics(diagnostics);
  if (!c.out.empty()) append_metrics_csv(fs::path(c.out) / "metrics.csv", row);
  std::cout << format_table_row(row.metrics) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curb map building and curb-based localization"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  Common sim_c, build_c, param_c, loc_c, eval_c;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic drive dataset");
  add_common(sim, sim_c, true);
  std::uint64_t world_seed = 1;
  bool mapping = false, no_visual = false;
  std::vector<std::string> dropouts;
  sim->add_option("--world-seed", world_seed, "Seed of the synthetic world")->capture_default_str();
  sim->add_flag("--mapping", mapping, "Mapping drive: no clutter");
  sim->add_flag("--no-visual", no_visual, "Visual localization unavailable on every frame");
  sim->add_option("--visual-dropout", dropouts, "Distance interval START:END (m) without visual localization");

  auto* build = app.add_subcommand("build-map", "Base map with curb observations from a dataset");
  add_common(build, build_c, true);
  std::string build_dataset, append;
  SessionId session = 0;
  build->add_option("--dataset", build_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  build->add_option("--session", session, "Session id of the new vertices")->capture_default_str();
  build->add_option("--append", append, "Existing map directory to extend")->check(CLI::ExistingDirectory);

  auto* param = app.add_subcommand("parameterize", "Compress the curb map of a map directory");
  add_common(param, param_c, false);
  std::string param_map;
  param->add_option("--map", param_map, "Map directory")->required()->check(CLI::ExistingDirectory);

  auto* loc = app.add_subcommand("localize", "Localize a dataset against a curb map");
  add_common(loc, loc_c, true);
  std::string loc_map, loc_dataset;
  bool no_curbs = false;
  loc->add_option("--map", loc_map, "Map directory")->required()->check(CLI::ExistingDirectory);
  loc->add_option("--dataset", loc_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  loc->add_flag("--no-curb-tracking", no_curbs, "Visual-only baseline");

  auto* eval = app.add_subcommand("evaluate", "Metrics of a trajectory against dataset truth");
  add_common(eval, eval_c, false);
  std::string eval_dataset, trajectory, diagnostics, dataset_id, map_sessions;
  eval->add_option("--dataset", eval_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--trajectory", trajectory, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--diagnostics", diagnostics, "Per-frame diagnostics log")->check(CLI::ExistingFile);
  eval->add_option("--dataset-id", dataset_id, "Dataset id column (default: dataset directory name)");
  eval->add_option("--map-sessions", map_sessions, "Map sessions column");

  auto* defaults = app.add_subcommand("default-config", "Print or write the default config");
  std::string defaults_out;
  defaults->add_option("--out", defaults_out, "Config file to write");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*sim) return run_simulate(sim_c, world_seed, mapping, no_visual, dropouts);
    if (*build) return run_build_map(build_c, build_dataset, session, append);
    if (*param) return run_parameterize(param_c, param_map);
    if (*loc) return run_localize(loc_c, loc_map, loc_dataset, no_curbs);
    if (*eval) {
      return run_evaluate(eval_c, eval_dataset, trajectory, diagnostics, dataset_id, map_sessions);
    }
    if (*defaults) {
      if (defaults_out.empty()) {
        std::cout << config_to_json(AppConfig{});
      } else {
        save_config(defaults_out, AppConfig{});
      }
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
