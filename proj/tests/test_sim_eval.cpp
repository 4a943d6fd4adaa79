#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <fstream>
#include <optional>

#include "mlio/eval.hpp"
#include "mlio/odometry.hpp"
#include "mlio/sim.hpp"
#include "support.hpp"

using namespace mlio;
using namespace mlio::test;

namespace {

sim::Scenario exact_imu(sim::Scenario s) {
  s.imu.add_noise = false;
  s.imu.bias_gyro.setZero();
  s.imu.bias_acc.setZero();
  return s;
}

sim::Scenario single_wall(double speed) {
  sim::Scenario s;
  s.duration = 2.0;
  s.trajectory.t_still = 0.0;
  s.trajectory.ramp = 0.2;
  s.trajectory.speed = speed;
  s.world.kind = "none";
  sim::Rect wall;
  wall.center = Vec3(15.0, 0.0, 1.0);
  wall.u = Vec3::UnitY();
  wall.v = Vec3::UnitZ();
  wall.half_u = 30.0;
  wall.half_v = 10.0;
  s.world.extra.push_back(wall);
  s.lidars.push_back(sim::spinning_lidar(0, Pose3(Rot3(), Vec3(0.0, 0.0, 0.3)), 0.0));
  s.lidars[0].range_noise = 0.0;
  return s;
}

double flatness(const LidarScan& scan) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : scan.points) mean += p.xyz;
  mean /= static_cast<double>(scan.points.size());
  Mat3 c = Mat3::Zero();
  for (const auto& p : scan.points) c += (p.xyz - mean) * (p.xyz - mean).transpose();
  return std::sqrt(std::max(0.0, Eigen::SelfAdjointEigenSolver<Mat3>(c).eigenvalues()(0)) /
                   static_cast<double>(scan.points.size()));
}

Trajectory straight_line(int n, double dt) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.push_back({i * dt, Pose3(Rot3(), Vec3(i * dt, 0.0, 1.0))});
  return t;
}

}  // namespace

TEST_CASE("a stationary IMU measures only gravity") {
  sim::Scenario s = exact_imu(sim::stationary(true));
  s.duration = 1.0;
  s.trajectory.start_yaw = 0.7;
  for (const ImuSample& u : sim::synth_imu(s)) {
    CHECK(u.gyro.norm() < 1e-12);
    const Pose3 p = sim::AnalyticTrajectory(s.trajectory).pose(u.t);
    CHECK((u.acc - p.rotation.inverse() * (-s.gravity)).norm() < 1e-12);
    CHECK(u.acc.norm() == doctest::Approx(9.81).epsilon(1e-12));
  }
}

TEST_CASE("a circle gives constant rate and centripetal specific force") {
  sim::Scenario s = exact_imu(sim::stationary(true));
  s.trajectory.kind = "circle";
  s.trajectory.radius = 3.0;
  s.trajectory.yaw_rate = 0.5;
  s.duration = 4.0;
  const double w = 0.5, r = 3.0;
  const sim::AnalyticTrajectory traj(s.trajectory);
  std::optional<Vec3> first_center;
  for (const ImuSample& u : sim::synth_imu(s)) {
    CHECK((u.gyro - Vec3(0, 0, w)).norm() < 1e-9);
    CHECK(u.acc.z() == doctest::Approx(9.81).epsilon(1e-12));
    CHECK(u.acc.head<2>().norm() == doctest::Approx(r * w * w).epsilon(1e-9));
    // The centre sits a radius away along the horizontal specific force and never moves.
    const Pose3 p = traj.pose(u.t);
    const Vec3 center = p.translation + r * (p.rotation * Vec3(u.acc.x(), u.acc.y(), 0.0).normalized());
    if (!first_center) first_center = center;
    CHECK((center - *first_center).norm() < 1e-9);
    CHECK(std::abs(traj.at(u.t).velocity.norm() - r * w) < 1e-9);
  }
}

TEST_CASE("simulation is deterministic in the seed") {
  sim::Scenario s = sim::corridor(2, false, 5);
  s.duration = 1.5;
  const Dataset a = sim::simulate(s), b = sim::simulate(s);
  REQUIRE(a.imu.size() == b.imu.size());
  for (std::size_t i = 0; i < a.imu.size(); ++i) CHECK((a.imu[i].acc - b.imu[i].acc).norm() == 0.0);
  REQUIRE(a.scans.size() == b.scans.size());
  for (std::size_t l = 0; l < a.scans.size(); ++l) {
    REQUIRE(a.scans[l].size() == b.scans[l].size());
    for (std::size_t j = 0; j < a.scans[l].size(); ++j) {
      REQUIRE(a.scans[l][j].points.size() == b.scans[l][j].points.size());
      for (std::size_t k = 0; k < a.scans[l][j].points.size(); ++k)
        CHECK((a.scans[l][j].points[k].xyz - b.scans[l][j].points[k].xyz).norm() == 0.0);
    }
  }
  s.seed = 6;
  const Dataset c = sim::simulate(s);
  CHECK((c.imu[10].acc - a.imu[10].acc).norm() > 0.0);
}

TEST_CASE("noiseless points land on the wall they hit") {
  const sim::Scenario s = single_wall(2.0);
  const sim::AnalyticTrajectory traj(s.trajectory);
  const auto scans = sim::synth_scans(s);
  const sim::Rect& wall = s.world.extra.front();
  std::size_t n = 0;
  for (const LidarScan& scan : scans[0])
    for (const auto& p : scan.points) {
      const Vec3 w = traj.pose(p.t) * (s.lidars[0].extrinsic * p.xyz);
      CHECK(std::abs(wall.normal().dot(w - wall.center)) < 1e-9);
      ++n;
    }
  CHECK(n > 1000);
}

TEST_CASE("motion distortion grows with speed") {
  double slow = 0.0, fast = 0.0;
  for (const auto& [speed, out] : {std::pair{1.0, &slow}, std::pair{4.0, &fast}}) {
    const auto scans = sim::synth_scans(single_wall(speed));
    const LidarScan& s = scans[0][10];
    REQUIRE(s.points.size() > 100);
    *out = flatness(s);
  }
  CHECK(fast > 2.0 * slow);
}

TEST_CASE("the corridor raster units look in disjoint directions") {
  sim::Scenario s = sim::corridor(3, true);
  s.duration = 1.0;
  const auto scans = sim::synth_scans(s);
  const Vec3 axis1 = s.lidars[1].extrinsic.rotation * Vec3::UnitX();
  const Vec3 axis2 = s.lidars[2].extrinsic.rotation * Vec3::UnitX();
  const double half_fov = 0.5 * s.lidars[1].fov_deg * M_PI / 180.0;
  std::size_t n = 0;
  for (std::size_t l : {1u, 2u}) {
    const Vec3& other = l == 1 ? axis2 : axis1;
    for (const LidarScan& scan : scans[l])
      for (const auto& p : scan.points) {
        const Vec3 dir = s.lidars[l].extrinsic.rotation * p.xyz.normalized();
        CHECK(std::acos(std::clamp(dir.dot(other), -1.0, 1.0)) > half_fov);
        ++n;
      }
  }
  CHECK(n > 1000);
}

TEST_CASE("ate and rte") {
  const Trajectory truth = straight_line(100, 0.1);

  SUBCASE("identical trajectories have no error") {
    const AteResult a = ate(truth, truth);
    CHECK(a.trans < 1e-12);
    CHECK(a.rot < 1e-6);
    CHECK(a.matches == 100);
  }
  SUBCASE("a rigid motion of the estimate is aligned away") {
    Rng rng(131);
    const Pose3 g = random_pose(rng);
    // Give the track some extent in all directions so the alignment is unique.
    Trajectory wavy = truth, wavy_est;
    for (std::size_t i = 0; i < wavy.size(); ++i) {
      wavy[i].pose.translation += Vec3(0.0, std::sin(0.3 * i), std::cos(0.2 * i));
      wavy_est.push_back({wavy[i].t, g * wavy[i].pose});
    }
    const AteResult a = ate(wavy_est, wavy);
    CHECK(a.trans < 1e-9);
    CHECK(a.rot < 1e-6);
    CHECK((a.alignment * g).matrix().isApprox(Mat4::Identity(), 1e-9));
  }
  SUBCASE("alternating vertical offsets around a circle") {
    // The offsets average out and are uncorrelated with the track, so no rigid motion
    // reduces them and the error is the offset itself.
    Trajectory ring, est;
    for (int i = 0; i < 8; ++i) {
      const double a = M_PI / 4.0 * i;
      ring.push_back({static_cast<double>(i), Pose3(Rot3(), Vec3(std::cos(a), std::sin(a), 0.0))});
      est.push_back({static_cast<double>(i), Pose3(Rot3(), ring.back().pose.translation + Vec3(0, 0, i % 2 ? -0.1 : 0.1))});
    }
    const AteResult a = ate(est, ring);
    CHECK(a.trans == doctest::Approx(0.1).epsilon(1e-9));
  }
  SUBCASE("a one percent stretch is a one percent drift") {
    Trajectory est = truth;
    for (auto& p : est) p.pose.translation.x() *= 1.01;
    const RteResult r = rte(est, truth, 5.0);
    CHECK(r.segments > 0);
    CHECK(r.trans == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.rot < 1e-6);
    CHECK(rte(est, truth, 50.0).segments == 0);
  }
  SUBCASE("disjoint time ranges do not associate") {
    Trajectory late = truth;
    for (auto& p : late) p.t += 100.0;
    CHECK_THROWS_AS(ate(late, truth), std::runtime_error);
  }
}

TEST_CASE("TUM files round trip") {
  Rng rng(132);
  Trajectory traj;
  for (int i = 0; i < 50; ++i) traj.push_back({1e9 + 0.05 * i, random_pose(rng)});
  const auto path = std::filesystem::temp_directory_path() / "mlio_tum_test.txt";
  write_tum(path, traj);
  const Trajectory back = read_tum(path);
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].t == doctest::Approx(traj[i].t).epsilon(1e-15));
    CHECK((back[i].pose.matrix() - traj[i].pose.matrix()).norm() < 1e-9);
  }
  {
    std::ofstream bad(path);
    bad << "# header\n0 1 2 3 0 0 0 1\n0.5 1 2 oops\n";
  }
  CHECK_THROWS_AS(read_tum(path), std::runtime_error);
  {
    std::ofstream bad(path);
    bad << "1 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n";
  }
  CHECK_THROWS_AS(read_tum(path), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_tum(path), std::runtime_error);
}

TEST_CASE("odometry initialization recovers gravity") {
  sim::Scenario s = sim::corridor(1, false, 9);
  s.duration = 2.0;
  const Dataset data = sim::simulate(s);
  const RunResult run = run_odometry(data, RunConfig{});
  REQUIRE_FALSE(run.trajectory.empty());
  Odometry odo(RunConfig{}, data.lidars);
  for (const ImuSample& u : data.imu) odo.add_imu(u);
  for (const LidarScan& scan : data.scans[0]) {
    odo.add_scan(scan);
    odo.process_ready();
  }
  REQUIRE(odo.initialized());
  CHECK(odo.state().gravity.norm() == doctest::Approx(9.81).epsilon(0.01));
  CHECK(odo.state().gravity.normalized().dot(Vec3(0, 0, -1)) > std::cos(2.0 * M_PI / 180.0));
}

TEST_CASE("a stationary noiseless platform stays at the origin") {
  const Dataset data = sim::simulate(sim::stationary(true));
  for (const Mode mode : {Mode::Raw, Mode::Full}) {
    RunConfig cfg;
    cfg.mode = mode;
    const RunResult run = run_odometry(data, cfg);
    REQUIRE_FALSE(run.trajectory.empty());
    double drift = 0.0;
    for (const StampedPose& p : run.trajectory)
      drift = std::max(drift, (p.pose.translation - run.trajectory.front().pose.translation).norm());
    MESSAGE(to_string(mode) << " stationary drift " << drift << " m");
    CHECK(drift < 1e-6);
  }
}
