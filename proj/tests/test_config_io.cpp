#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mlio/config.hpp"
#include "mlio/dataset_io.hpp"
#include "mlio/odometry.hpp"
#include "mlio/sim.hpp"

using namespace mlio;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(const std::string& args) {
  const std::string cmd = std::string(MLIO_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

sim::Scenario short_scenario() {
  sim::Scenario s = sim::corridor(2, false, 21);
  s.duration = 3.0;
  return s;
}

}  // namespace

TEST_CASE("config JSON round trip") {
  RunConfig c;
  c.fic.tau = 2.5;
  c.mode = Mode::Raw;
  c.z_diag = Vec3(0.01, 0.02, 0.03);
  c.map_capacity = 4;
  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(back == c);
  CHECK(config_from_json("{}") == RunConfig{});
  CHECK(config_from_json(R"({"tau": 0.5})").fic.tau == 0.5);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config_from_json(R"({"no_such_key": 1})"), std::runtime_error);
  CHECK_THROWS_AS(config_from_json("{not json"), std::runtime_error);
  CHECK_THROWS_AS(config_from_json(R"({"mode": "FAST"})"), std::runtime_error);
  RunConfig c;
  c.fic.tau = -1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.max_plane_residual = 0.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  CHECK_NOTHROW(validate(RunConfig{}));
}

TEST_CASE("environment variables override the config") {
  setenv("MLIO_TAU", "3.5", 1);
  setenv("MLIO_MODE", "UNC", 1);
  setenv("MLIO_Z_DIAG", "0.1,0.2,0.3", 1);
  const RunConfig c = apply_env_overrides(RunConfig{});
  CHECK(c.fic.tau == 3.5);
  CHECK(c.mode == Mode::Unc);
  CHECK((c.z_diag - Vec3(0.1, 0.2, 0.3)).norm() == 0.0);
  setenv("MLIO_TAU", "abc", 1);
  CHECK_THROWS_AS(apply_env_overrides(RunConfig{}), std::runtime_error);
  unsetenv("MLIO_TAU");
  unsetenv("MLIO_MODE");
  unsetenv("MLIO_Z_DIAG");
}

TEST_CASE("datasets survive a write and read in both point formats") {
  const Dataset data = sim::simulate(short_scenario());
  for (const PointFormat format : {PointFormat::Csv, PointFormat::Binary}) {
    TempDir dir(format == PointFormat::Csv ? "mlio_ds_csv" : "mlio_ds_bin");
    write_dataset(dir.path, data, format);
    const Dataset back = read_dataset(dir.path);
    REQUIRE(back.imu.size() == data.imu.size());
    CHECK(back.imu_rate == data.imu_rate);
    for (std::size_t i = 0; i < data.imu.size(); i += 37) {
      CHECK(back.imu[i].t == doctest::Approx(data.imu[i].t).epsilon(1e-12));
      CHECK((back.imu[i].acc - data.imu[i].acc).norm() < 1e-9);
    }
    REQUIRE(back.lidars.size() == data.lidars.size());
    for (std::size_t l = 0; l < data.lidars.size(); ++l) {
      CHECK(back.lidars[l].id == data.lidars[l].id);
      CHECK((back.lidars[l].extrinsic.matrix() - data.lidars[l].extrinsic.matrix()).norm() < 1e-9);
      REQUIRE(back.scans[l].size() == data.scans[l].size());
      std::size_t before = 0, after = 0;
      for (const auto& s : data.scans[l]) before += s.points.size();
      for (const auto& s : back.scans[l]) after += s.points.size();
      CHECK(before == after);
      const TimedPoint& a = data.scans[l][3].points[5];
      const TimedPoint& b = back.scans[l][3].points[5];
      const double tol = format == PointFormat::Binary ? 0.0 : 1e-9;
      CHECK((a.xyz - b.xyz).norm() <= tol);
      CHECK(std::abs(a.t - b.t) <= tol);
    }
    CHECK(back.truth.size() == data.truth.size());
  }
  CHECK_THROWS_AS(read_dataset(fs::temp_directory_path() / "mlio_missing_dataset"), std::runtime_error);
}

TEST_CASE("scans split on period boundaries") {
  std::vector<TimedPoint> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({Vec3(i, 0, 0), 0.01 * i + 0.005, 3});
  const auto scans = split_scans(pts, 0.1, 0.0, 3);
  REQUIRE(scans.size() == 10);
  for (const auto& s : scans) {
    CHECK(s.points.size() == 10);
    CHECK(s.lidar_id == 3);
  }
}

TEST_CASE("command line") {
  TempDir dir("mlio_cli_test");
  const fs::path scenario = dir.path / "scenario.json";
  {
    std::ofstream out(scenario);
    out << sim::scenario_to_json(short_scenario());
  }

  SUBCASE("simulate writes a dataset, reproducibly per seed") {
    const fs::path a = dir.path / "a", b = dir.path / "b", c = dir.path / "c";
    REQUIRE(cli("simulate --config " + scenario.string() + " --seed 5 --out " + a.string()) == 0);
    REQUIRE(cli("simulate --config " + scenario.string() + " --seed 5 --out " + b.string()) == 0);
    REQUIRE(cli("simulate --config " + scenario.string() + " --seed 6 --out " + c.string()) == 0);
    for (const char* f : {"imu.csv", "lidar_0.csv", "lidar_1.csv", "truth.tum", "manifest.json"}) {
      CHECK(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(slurp(a / "imu.csv") != slurp(c / "imu.csv"));
    CHECK(cli("simulate --preset nowhere --out " + (dir.path / "d").string()) != 0);
  }

  SUBCASE("run writes trajectory, map, timing and metrics") {
    const fs::path data = dir.path / "data", out = dir.path / "out";
    REQUIRE(cli("simulate --config " + scenario.string() + " --out " + data.string() + " --format bin") == 0);
    REQUIRE(cli("run " + data.string() + " --mode FULL --out " + out.string()) == 0);
    for (const char* f : {"est.tum", "map.ply", "timing.json", "metrics.json", "effective_config.json"})
      CHECK(fs::exists(out / f));
    const auto timing = nlohmann::json::parse(slurp(out / "timing.json"));
    const std::string text = timing.dump();
    for (const char* stage : kStageNames) CHECK(text.find(stage) != std::string::npos);
    const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(metrics.at("mode") == "FULL");
    CHECK(metrics.at("ATE_t").get<double>() < 0.5);
    CHECK(cli("run " + data.string() + " --mode SLOW --out " + out.string()) != 0);
  }

  SUBCASE("eval") {
    Trajectory t;
    for (int i = 0; i < 100; ++i) t.push_back({0.1 * i, Pose3(Rot3(), Vec3(0.1 * i, 0.0, 0.0))});
    const fs::path same = dir.path / "same.tum", late = dir.path / "late.tum", json = dir.path / "m.json";
    write_tum(same, t);
    for (auto& p : t) p.t += 1000.0;
    write_tum(late, t);
    REQUIRE(cli("eval " + same.string() + " " + same.string() + " --out " + json.string()) == 0);
    const auto m = nlohmann::json::parse(slurp(json));
    CHECK(m.at("ATE_t").get<double>() < 1e-12);
    CHECK(m.at("RTE_t").get<double>() < 1e-9);
    CHECK(cli("eval " + same.string() + " " + late.string()) != 0);
    CHECK(cli("eval " + same.string()) != 0);
  }
}
