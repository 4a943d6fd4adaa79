// mlio: simulate datasets, run the odometry, evaluate trajectories.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mlio/config.hpp"
#include "mlio/dataset_io.hpp"
#include "mlio/eval.hpp"
#include "mlio/odometry.hpp"
#include "mlio/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

mlio::sim::Scenario preset(const std::string& name) {
  namespace sim = mlio::sim;
  if (name == "corridor" || name == "corridor3") return sim::corridor(3);
  if (name == "corridor1") return sim::corridor(1);
  if (name == "corridor2") return sim::corridor(2);
  if (name == "corridor-clean") return sim::corridor(3, true);
  if (name == "tunnel") return sim::tunnel(true);
  if (name == "tunnel-open") return sim::tunnel(false);
  if (name == "stationary") return sim::stationary(true);
  if (name == "stationary-noisy") return sim::stationary(false);
  throw std::runtime_error("unknown preset '" + name + "'");
}

json metrics_json(const mlio::Trajectory& est, const mlio::Trajectory& truth, double delta) {
  const mlio::AteResult a = mlio::ate(est, truth);
  const mlio::RteResult r = mlio::rte(est, truth, delta);
  return {{"ATE_t", a.trans}, {"ATE_r", a.rot},          {"RTE_t", r.trans},       {"RTE_r", r.rot},
          {"matches", a.matches}, {"rte_segments", r.segments}, {"rte_delta", delta}};
}

struct SimulateArgs {
  std::string config;
  std::string preset = "corridor";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
};

int cmd_simulate(const SimulateArgs& a) {
  mlio::sim::Scenario s = a.config.empty() ? preset(a.preset) : mlio::sim::scenario_from_json(read_file(a.config));
  if (a.seed) s.seed = *a.seed;
  const mlio::Dataset data = mlio::sim::simulate(s);
  const auto format = a.format == "bin" ? mlio::PointFormat::Binary : mlio::PointFormat::Csv;
  mlio::write_dataset(a.out, data, format);
  write_file(fs::path(a.out) / "scenario.json", mlio::sim::scenario_to_json(s));
  std::size_t points = 0;
  for (const auto& scans : data.scans)
    for (const auto& scan : scans) points += scan.points.size();
  spdlog::info("wrote {} IMU samples, {} LiDAR points, {} truth poses to {}", data.imu.size(), points,
               data.truth.size(), a.out);
  return 0;
}

struct RunArgs {
  std::string dataset;
  std::string config;
  std::string mode;
  std::string out;
};

int cmd_run(const RunArgs& a) {
  mlio::RunConfig cfg;
  if (!a.config.empty()) cfg = mlio::config_from_json(read_file(a.config));
  cfg = mlio::apply_env_overrides(cfg);
  if (!a.mode.empty()) cfg.mode = mlio::mode_from_string(a.mode);
  mlio::validate(cfg);

  const mlio::Dataset data = mlio::read_dataset(a.dataset);
  spdlog::info("running {} on {} ({} LiDARs)", mlio::to_string(cfg.mode), a.dataset, data.lidars.size());
  const mlio::RunResult res = mlio::run_odometry(data, cfg);
  if (res.trajectory.empty()) throw std::runtime_error("no frame was processed");

  const fs::path out(a.out);
  fs::create_directories(out);
  mlio::write_tum(out / "est.tum", res.trajectory);
  res.map.write_ply(out / "map.ply");
  write_file(out / "timing.json", mlio::frames_to_json(res.frames));
  write_file(out / "effective_config.json", mlio::config_to_json(cfg));

  json metrics = {{"mode", mlio::to_string(cfg.mode)}, {"frames", res.frames.size()}, {"map_points", res.map.size()}};
  double total = 0.0;
  for (const auto& f : res.frames) total += f.total_ms;
  metrics["mean_frame_ms"] = total / static_cast<double>(res.frames.size());
  if (!data.truth.empty()) metrics.update(metrics_json(res.trajectory, data.truth, cfg.rte_delta));
  write_file(out / "metrics.json", metrics.dump(2));
  std::cout << metrics.dump(2) << '\n';
  return 0;
}

struct EvalArgs {
  std::string est;
  std::string truth;
  std::string out;
  double delta = 5.0;
};

int cmd_eval(const EvalArgs& a) {
  const json m = metrics_json(mlio::read_tum(a.est), mlio::read_tum(a.truth), a.delta);
  if (!a.out.empty()) write_file(a.out, m.dump(2));
  std::cout << m.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous multi-LiDAR inertial odometry"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->add_option("--config", sim_args.config, "Scenario JSON")->check(CLI::ExistingFile);
  sim->add_option("--preset", sim_args.preset,
                  "corridor, corridor1, corridor2, corridor-clean, tunnel, tunnel-open, stationary, stationary-noisy")
      ->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "Override the scenario seed");
  sim->add_option("--out", sim_args.out, "Output directory")->required();
  sim->add_option("--format", sim_args.format, "Point stream format")
      ->check(CLI::IsMember({"csv", "bin"}))
      ->capture_default_str();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run the odometry on a dataset directory");
  run->add_option("dataset", run_args.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--config", run_args.config, "Run config JSON (MLIO_<KEY> env vars override it)")
      ->check(CLI::ExistingFile);
  run->add_option("--mode", run_args.mode, "RAW, CNT, F-UNC, UNC or FULL");
  run->add_option("--out", run_args.out, "Output directory")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "ATE and RTE of an estimate against ground truth");
  eval->add_option("est", eval_args.est, "Estimated trajectory (TUM)")->required();
  eval->add_option("truth", eval_args.truth, "Ground truth (TUM)")->required();
  eval->add_option("--out", eval_args.out, "Write the metrics JSON here as well");
  eval->add_option("--delta", eval_args.delta, "RTE segment length, m")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("mlio"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*sim) return cmd_simulate(sim_args);
    if (*run) return cmd_run(run_args);
    if (*eval) return cmd_eval(eval_args);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
