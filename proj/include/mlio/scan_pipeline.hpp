#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mlio/lie.hpp"
#include "mlio/trajectory_buffer.hpp"

namespace mlio {

struct TimedPoint {
  Vec3 xyz = Vec3::Zero();  // sensor frame, m
  double t = 0.0;
  int lidar_id = 0;

  double range() const { return xyz.norm(); }
};

/// A time-ordered batch from one LiDAR; it arrives with its last point.
struct LidarScan {
  int lidar_id = 0;
  std::vector<TimedPoint> points;

  double start_time() const { return points.front().t; }
  double arrival() const { return points.back().t; }
};

/// Body pose in the world frame at a given time.
using PoseQuery = std::function<Pose3(double)>;

/// Where each scan of a merged frame came from.
struct SourceScan {
  int lidar_id = 0;
  double arrival = 0.0;
  /// T(t_ref)^-1 T(arrival): IMU frame at the scan's arrival expressed in the IMU frame at t_ref.
  Pose3 rel_to_ref;
};

struct MergedPoint {
  Vec3 xyz = Vec3::Zero();          // reference LiDAR frame at t_ref
  Vec3 undistorted = Vec3::Zero();  // source LiDAR frame at the source scan's arrival
  Vec3 original = Vec3::Zero();     // as measured
  double t = 0.0;
  int lidar_id = 0;
  int source = 0;  // index into MergedFrame::sources
};

struct MergedFrame {
  int reference_id = 0;
  double t_ref = 0.0;
  std::vector<SourceScan> sources;
  std::vector<MergedPoint> points;
};

/// Result of choosing one scan per LiDAR.
struct ScanSelection {
  std::vector<std::size_t> index;  // per LiDAR queue
  std::size_t reference = 0;       // LiDAR with the latest arrival
  double cost = 0.0;               // sum of pairwise arrival differences
};

/// Picks the combination minimizing the summed pairwise |arrival differences|.
/// Returns nullopt while any queue is empty.
std::optional<ScanSelection> select_scan_set(std::span<const std::deque<LidarScan>> queues);

/// Per-LiDAR bounded queues feeding select_scan_set.
class ScanQueues {
public:
  explicit ScanQueues(std::size_t num_lidars, std::size_t capacity = 8) : queues_(num_lidars), capacity_(capacity) {}

  /// Oldest scan is dropped (with a warning) when a queue overflows.
  void push(LidarScan scan);
  /// Removes and returns the selected scans, ordered by LiDAR id. Older scans of the same
  /// LiDAR are discarded along with the selection; they could only form frames that go
  /// back in time.
  std::optional<std::pair<std::vector<LidarScan>, std::size_t>> pop_selection();

  std::size_t dropped() const { return dropped_; }
  const std::vector<std::deque<LidarScan>>& queues() const { return queues_; }

private:
  std::vector<std::deque<LidarScan>> queues_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
};

/// Re-expresses every point in the scan's own frame at its arrival time:
///   p_u = T_IS^-1 T(t_l)^-1 T(t_j) T_IS p.
LidarScan undistort(const LidarScan& scan, const PoseQuery& body_pose, const Pose3& extrinsic);
LidarScan undistort(const LidarScan& scan, const ImuTrajectory& traj, Interpolation method, const Pose3& extrinsic);

/// Moves undistorted scans into the frame of scans[reference] at its arrival time:
///   p = T_IP^-1 T(t_i)^-1 T(t_l) T_IS p_u.
/// `originals` carries the raw scans so per-point acquisition data survives the merge.
MergedFrame merge(std::span<const LidarScan> undistorted, std::span<const LidarScan> originals, std::size_t reference,
                  const PoseQuery& body_pose, std::span<const Pose3> extrinsics);

/// Keeps, per voxel, the point nearest to the voxel center.
std::vector<std::size_t> voxel_downsample(std::span<const Vec3> points, double voxel);

}  // namespace mlio
