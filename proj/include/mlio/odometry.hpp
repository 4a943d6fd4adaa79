#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlio/config.hpp"
#include "mlio/dataset_io.hpp"
#include "mlio/ieskf.hpp"
#include "mlio/uncertain_map.hpp"

namespace mlio {

inline constexpr std::array<const char*, 6> kStageNames = {"Pre-process", "Pre-integration", "B-spline",
                                                           "Uncertainty", "Kalman Filter",   "Mapping"};

struct FrameStats {
  double t = 0.0;  // reference time of the merged frame
  int reference_lidar = 0;
  std::size_t raw_points = 0;
  std::size_t used_points = 0;  // after downsampling
  std::size_t residuals = 0;
  double normal_spread = 0.0;
  double w_l = 1.0;
  int iterations = 0;
  bool converged = false;
  bool updated = false;  // false for the map-seeding frame or a frame without correspondences
  std::vector<double> objective;
  double cov_min_eigenvalue = 0.0;  // of the posterior covariance
  std::map<std::string, double> stage_ms;
  double total_ms = 0.0;
  std::size_t map_size = 0;
};

/// Streaming multi-LiDAR inertial odometry. Feed IMU samples and scans in time order;
/// call process_ready() to run every frame whose data is complete.
class Odometry {
public:
  Odometry(const RunConfig& config, std::vector<LidarInfo> lidars);

  void add_imu(const ImuSample& u);
  /// The scan's lidar_id must be one of the ids declared by the LidarInfo list.
  void add_scan(LidarScan scan);

  /// Reference time of the frame the queued scans would form next, if any.
  std::optional<double> next_frame_time() const;
  /// Processes queued frames whose IMU coverage is complete; returns how many ran.
  int process_ready();

  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<FrameStats>& frames() const { return frames_; }
  const UncertainMap& map() const { return map_; }
  const ImuTrajectory& imu_trajectory() const { return traj_; }
  bool initialized() const { return traj_.initialized(); }
  /// State and covariance of the latest update.
  const FilterState& state() const { return state_; }
  const StateCov& covariance() const { return cov_; }

private:
  void initialize_filter();
  void process_frame(std::vector<LidarScan> scans, std::size_t reference);

  RunConfig config_;
  ModeSwitches sw_;
  std::vector<LidarInfo> lidars_;
  std::map<int, std::size_t> lidar_index_;
  ScanQueues queues_;
  ImuTrajectory traj_;
  UncertainMap map_;
  std::vector<ImuSample> init_samples_;
  double imu_dt_ = 0.005;
  double preint_ms_ = 0.0;
  long frame_count_ = 0;
  FilterState state_;
  StateCov cov_;
  Trajectory trajectory_;
  std::vector<FrameStats> frames_;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<FrameStats> frames;
  UncertainMap map;
};

/// Replays a dataset in time order through Odometry.
RunResult run_odometry(const Dataset& data, const RunConfig& config);

/// Per-frame timing and filter diagnostics as JSON.
std::string frames_to_json(const std::vector<FrameStats>& frames);

}  // namespace mlio
