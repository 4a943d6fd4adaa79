#pragma once

#include <string>

#include "mlio/imu_model.hpp"
#include "mlio/plane_measurement.hpp"
#include "mlio/trajectory_buffer.hpp"

namespace mlio {

enum class Mode { Raw, Cnt, FUnc, Unc, Full };

/// "RAW", "CNT", "F-UNC", "UNC", "FULL".
std::string to_string(Mode m);
/// Throws std::invalid_argument on an unknown name.
Mode mode_from_string(const std::string& s);

enum class PointUncertainty {
  None,       // uniform residual weights
  EndOfScan,  // one covariance (the frame's) for every point
  PerPoint,   // acquisition-time covariance of each point
};

struct ModeSwitches {
  Interpolation interpolation;
  bool fic_weights;  // FIC-rescaled residuals and the localization weight
  PointUncertainty uncertainty;
};

ModeSwitches switches(Mode m);

struct RunConfig {
  FicParams fic;
  NoiseParams noise;
  Vec3 z_diag = Vec3::Constant(0.05);  // LiDAR point noise Z (diagonal)
  double epsilon = 1e-3;
  int max_iter = 5;
  double voxel = 0.4;       // map resolution, m
  double scan_voxel = 0.4;  // per-frame downsampling, m
  std::size_t map_capacity = 1;
  double rebalance_alpha = 0.7;
  int knn = 5;
  double d_plane = 0.1;             // m, planarity of the k neighbors
  // Query point to fitted plane, m at 1 m range; the gate grows with sqrt(range). The coarse
  // gate applies to a first pass at the prior, the fine one after re-association.
  double coarse_plane_residual = 0.1;
  double max_plane_residual = 0.025;
  double max_neighbor_dist = 1.0;  // m, farthest of the k neighbors
  std::size_t queue_capacity = 8;
  Mode mode = Mode::Full;

  // Initial standard deviations of the filter state.
  double init_rot_sigma = 0.01;       // rad
  double init_pos_sigma = 0.01;       // m
  double init_vel_sigma = 0.05;       // m/s
  double init_bias_gyro_sigma = 0.01; // rad/s
  double init_bias_acc_sigma = 0.1;   // m/s^2
  double init_gravity_sigma = 0.05;   // m/s^2
  double init_ext_rot_sigma = 0.002;  // rad
  double init_ext_pos_sigma = 0.005;  // m

  double rte_delta = 5.0;  // m

  bool operator==(const RunConfig&) const = default;
};

/// Flat JSON object with one key per field; unknown keys are rejected.
std::string config_to_json(const RunConfig& c);
/// Missing keys keep their defaults. Throws std::runtime_error on malformed input.
RunConfig config_from_json(const std::string& text, RunConfig base = {});

/// Applies MLIO_<KEY> environment variables (key upper-cased, e.g. MLIO_TAU, MLIO_MODE,
/// MLIO_Z_DIAG="0.05,0.05,0.05"). Throws std::runtime_error on unparsable values.
RunConfig apply_env_overrides(RunConfig c);

/// Throws std::invalid_argument when parameters are out of range.
void validate(const RunConfig& c);

}  // namespace mlio
