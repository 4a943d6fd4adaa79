#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlio/eval.hpp"
#include "mlio/imu_model.hpp"
#include "mlio/scan_pipeline.hpp"

namespace mlio {

struct LidarInfo {
  int id = 0;
  Pose3 extrinsic;  // initial guess of T_IL
  std::string pattern = "spinning";
  double fov_h_deg = 360.0;
  double fov_v_deg = 30.0;
  double scan_period = 0.1;  // s
  double phase = 0.0;        // scan j covers [phase + j period, phase + (j+1) period)
};

struct Dataset {
  std::vector<ImuSample> imu;
  double imu_rate = 200.0;
  std::optional<NoiseParams> imu_noise;
  std::vector<LidarInfo> lidars;
  std::vector<std::vector<LidarScan>> scans;  // per LiDAR, time ordered
  Trajectory truth;                           // empty when unknown
};

enum class PointFormat { Csv, Binary };

/// Splits a time-ordered point stream into scans by floor((t - phase) / period).
std::vector<LidarScan> split_scans(std::span<const TimedPoint> points, double period, double phase, int lidar_id);

/// Writes imu.csv, one lidar_<id>.csv (or .bin, little-endian f64 t,x,y,z records) per
/// LiDAR, truth.tum when available, and manifest.json. Throws std::runtime_error on I/O failure.
void write_dataset(const std::filesystem::path& dir, const Dataset& data, PointFormat format = PointFormat::Csv);

/// Reads a directory written by write_dataset (or by hand following the same layout).
/// Throws std::runtime_error on a missing or malformed manifest or stream.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace mlio
