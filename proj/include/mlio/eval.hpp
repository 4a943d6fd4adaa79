#pragma once

#include <filesystem>
#include <vector>

#include "mlio/lie.hpp"

namespace mlio {

struct StampedPose {
  double t = 0.0;
  Pose3 pose;
};

using Trajectory = std::vector<StampedPose>;

/// TUM format: `t x y z qx qy qz qw` per line, '#' comments allowed.
/// Throws std::runtime_error on unreadable files, malformed lines or non-increasing times.
Trajectory read_tum(const std::filesystem::path& path);
void write_tum(const std::filesystem::path& path, const Trajectory& traj);

/// Pairs (est index, truth index) matched by nearest timestamp within half the median gap
/// of the estimate. Throws std::runtime_error when fewer than two pairs match.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est, const Trajectory& truth);

struct AteResult {
  double trans = 0.0;  // RMSE, m
  double rot = 0.0;    // RMSE, deg
  std::size_t matches = 0;
  Pose3 alignment;  // applied to the estimate
};

/// Absolute trajectory error after closed-form rigid alignment (no scale).
AteResult ate(const Trajectory& est, const Trajectory& truth);

struct RteResult {
  double trans = 0.0;  // RMSE of translational drift, percent of distance travelled
  double rot = 0.0;    // RMSE of rotational drift, deg/m
  std::size_t segments = 0;
};

/// Relative error over segments whose ground-truth arc length first reaches delta (m).
/// Zero segments when the trajectory is shorter than delta.
RteResult rte(const Trajectory& est, const Trajectory& truth, double delta);

}  // namespace mlio
