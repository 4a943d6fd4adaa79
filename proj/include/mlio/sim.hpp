#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlio/dataset_io.hpp"

namespace mlio::sim {

/// Bounded planar rectangle center + a*u + b*v with |a| <= half_u, |b| <= half_v.
struct Rect {
  Vec3 center = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;

  Vec3 normal() const { return u.cross(v).normalized(); }
};

/// Analytic body trajectory. Kinds:
///   stationary: fixed pose (start_position, start_yaw)
///   circle:     radius, yaw_rate about the z axis, heading along the tangent
///   path:       p(u) = start + (u, a1 sin(k1 u) + a2 sin(k2 u), az sin(kz u)) with
///               progress u(t) still until t_still, then a quintic speed ramp to `speed`
///               over `ramp` seconds; heading along the tangent, small roll/pitch swings
///               that fade in with the same ramp.
struct TrajectorySpec {
  std::string kind = "path";
  Vec3 start_position = Vec3(0.0, 0.0, 1.0);
  double start_yaw = 0.0;
  double t_still = 1.0;
  double ramp = 1.5;
  double speed = 1.5;
  double lateral_amp = 2.0, lateral_wavelength = 24.0;
  double lateral_amp2 = 0.0, lateral_wavelength2 = 9.0;
  double vertical_amp = 0.1, vertical_wavelength = 15.0;
  double roll_amp = 0.03, roll_freq = 0.4;
  double pitch_amp = 0.02, pitch_freq = 0.3;
  double radius = 3.0, yaw_rate = 0.5;
};

struct MotionSample {
  Pose3 pose;
  Vec3 velocity = Vec3::Zero();      // world
  Vec3 acceleration = Vec3::Zero();  // world
  Vec3 body_rate = Vec3::Zero();     // body frame
};

/// Closed-form pose and derivatives of a TrajectorySpec.
class AnalyticTrajectory {
public:
  explicit AnalyticTrajectory(TrajectorySpec spec) : spec_(std::move(spec)) {}
  MotionSample at(double t) const;
  Pose3 pose(double t) const { return at(t).pose; }
  /// Path progress (m) at time t; the circle's arc length, 0 when stationary.
  double progress(double t) const;
  const TrajectorySpec& spec() const { return spec_; }

private:
  TrajectorySpec spec_;
};

/// Procedural worlds built along the path. Kinds: corridor, tunnel, box, none (planes only).
struct WorldSpec {
  std::string kind = "corridor";
  double half_width = 2.5;
  double height = 3.0;
  double segment = 1.0;       // wall tessellation along the path, m
  double fin_spacing = 4.0;   // protruding fins on alternating walls (0 disables)
  double fin_depth = 0.5;
  double begin = -6.0, end = 30.0;  // path progress range covered by the corridor
  // tunnel: straight walls along x without ceiling between tunnel_begin and tunnel_end,
  // scattered boxes outside; `degenerate` false adds fins inside the tunnel.
  double tunnel_begin = 10.0, tunnel_end = 40.0;
  bool degenerate = true;
  std::vector<Rect> extra;
};

struct LidarSpec {
  int id = 0;
  Pose3 extrinsic;                  // T_IL
  std::string pattern = "spinning";  // spinning | raster
  double rate = 10.0;               // scans per second
  double phase = 0.0;               // s
  double range_noise = 0.02;        // m, 1 sigma
  double min_range = 0.5, max_range = 40.0;
  // spinning: beams spread evenly over +-vfov/2, one firing per azimuth step
  int beams = 16;
  double vfov_deg = 30.0;
  double azimuth_step_deg = 2.0;
  // raster: rosette over a cone of full angle fov_deg around the sensor x axis
  double fov_deg = 70.0;
  int points_per_scan = 2400;
};

struct ImuSpec {
  double rate = 200.0;
  NoiseParams noise;
  Vec3 bias_gyro = Vec3(0.002, -0.003, 0.0015);
  Vec3 bias_acc = Vec3(0.03, -0.02, 0.04);
  bool add_noise = true;  // false: exact measurements plus the constant initial biases
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration = 10.0;
  TrajectorySpec trajectory;
  WorldSpec world;
  std::vector<LidarSpec> lidars;
  ImuSpec imu;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double truth_rate = 100.0;
};

/// Throws std::runtime_error on malformed JSON or invalid values.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);

/// World rectangles of the scenario.
std::vector<Rect> build_world(const Scenario& s);

/// Nearest hit distance along a unit ray, nullopt when it misses everything in range.
std::optional<double> ray_cast(const std::vector<Rect>& world, const Vec3& origin, const Vec3& dir, double min_range,
                               double max_range);

std::vector<ImuSample> synth_imu(const Scenario& s);
/// One point stream per LiDAR, scans already split; points in the sensor frame.
std::vector<std::vector<LidarScan>> synth_scans(const Scenario& s);
Trajectory synth_truth(const Scenario& s);

/// Everything above bundled with the manifest data.
Dataset simulate(const Scenario& s);

// Presets.
LidarSpec spinning_lidar(int id, const Pose3& extrinsic, double phase);
LidarSpec raster_lidar(int id, const Pose3& extrinsic, double phase);

/// Corridor with turns: one roof spinning unit plus forward-left and backward-right raster
/// units, asynchronous phases. `num_lidars` keeps the first 1..3 of them.
Scenario corridor(int num_lidars = 3, bool zero_noise = false, std::uint64_t seed = 7);
/// Straight drive through a walled tunnel (wall normals parallel, floor only otherwise).
Scenario tunnel(bool degenerate = true, std::uint64_t seed = 11);
/// Stationary platform inside a closed room.
Scenario stationary(bool zero_noise = true, std::uint64_t seed = 3);

}  // namespace mlio::sim
