#include "mlio/scan_pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace mlio {

std::optional<ScanSelection> select_scan_set(std::span<const std::deque<LidarScan>> queues) {
  if (queues.empty()) return std::nullopt;
  for (const auto& q : queues) {
    if (q.empty()) return std::nullopt;
  }
  const std::size_t n = queues.size();
  std::vector<std::size_t> cur(n, 0);
  ScanSelection best;
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<double> arrivals(n);
  // Odometer-style enumeration of the full product.
  while (true) {
    for (std::size_t i = 0; i < n; ++i) arrivals[i] = queues[i][cur[i]].arrival();
    double cost = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) cost += std::abs(arrivals[a] - arrivals[b]);
    }
    if (cost < best.cost) {
      best.cost = cost;
      best.index = cur;
    }
    std::size_t d = 0;
    while (d < n && ++cur[d] == queues[d].size()) cur[d++] = 0;
    if (d == n) break;
  }
  best.reference = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (queues[i][best.index[i]].arrival() > queues[best.reference][best.index[best.reference]].arrival()) {
      best.reference = i;
    }
  }
  return best;
}

void ScanQueues::push(LidarScan scan) {
  if (scan.points.empty()) return;
  const auto id = static_cast<std::size_t>(scan.lidar_id);
  if (id >= queues_.size()) throw std::out_of_range("ScanQueues::push: unknown lidar id");
  auto& q = queues_[id];
  q.push_back(std::move(scan));
  if (q.size() > capacity_) {
    spdlog::warn("scan queue of lidar {} full, dropping scan arriving at {:.6f}", id, q.front().arrival());
    q.pop_front();
    ++dropped_;
  }
}

std::optional<std::pair<std::vector<LidarScan>, std::size_t>> ScanQueues::pop_selection() {
  const auto sel = select_scan_set(queues_);
  if (!sel) return std::nullopt;
  std::vector<LidarScan> out;
  out.reserve(queues_.size());
  for (std::size_t i = 0; i < queues_.size(); ++i) {
    auto& q = queues_[i];
    out.push_back(std::move(q[sel->index[i]]));
    q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(sel->index[i]) + 1);
  }
  return std::make_pair(std::move(out), sel->reference);
}

LidarScan undistort(const LidarScan& scan, const PoseQuery& body_pose, const Pose3& extrinsic) {
  LidarScan out = scan;
  if (scan.points.empty()) return out;
  const Pose3 end_inv = body_pose(scan.arrival()).inverse();
  const Pose3 ext_inv = extrinsic.inverse();
  double cached_t = std::numeric_limits<double>::quiet_NaN();
  Pose3 m;
  for (TimedPoint& p : out.points) {
    if (p.t != cached_t) {
      cached_t = p.t;
      m = ext_inv * (end_inv * body_pose(p.t)) * extrinsic;
    }
    p.xyz = m * p.xyz;
  }
  return out;
}

LidarScan undistort(const LidarScan& scan, const ImuTrajectory& traj, Interpolation method, const Pose3& extrinsic) {
  return undistort(scan, [&](double t) { return traj.pose_at(t, method); }, extrinsic);
}

MergedFrame merge(std::span<const LidarScan> undistorted, std::span<const LidarScan> originals, std::size_t reference,
                  const PoseQuery& body_pose, std::span<const Pose3> extrinsics) {
  if (undistorted.size() != originals.size() || reference >= undistorted.size()) {
    throw std::invalid_argument("merge: inconsistent scan sets");
  }
  MergedFrame frame;
  const LidarScan& ref = undistorted[reference];
  frame.reference_id = ref.lidar_id;
  frame.t_ref = ref.arrival();
  const Pose3 ref_inv = body_pose(frame.t_ref).inverse();
  const Pose3 ref_ext_inv = extrinsics[static_cast<std::size_t>(ref.lidar_id)].inverse();

  std::size_t total = 0;
  for (const auto& s : undistorted) total += s.points.size();
  frame.points.reserve(total);

  for (std::size_t si = 0; si < undistorted.size(); ++si) {
    const LidarScan& scan = undistorted[si];
    const LidarScan& raw = originals[si];
    if (scan.points.size() != raw.points.size()) throw std::invalid_argument("merge: undistorted/raw size mismatch");
    SourceScan src;
    src.lidar_id = scan.lidar_id;
    src.arrival = scan.arrival();
    const bool is_ref = si == reference;
    src.rel_to_ref = is_ref ? Pose3::identity() : ref_inv * body_pose(src.arrival);
    const Pose3 to_ref = ref_ext_inv * src.rel_to_ref * extrinsics[static_cast<std::size_t>(scan.lidar_id)];
    const int source_index = static_cast<int>(frame.sources.size());
    frame.sources.push_back(src);
    for (std::size_t j = 0; j < scan.points.size(); ++j) {
      MergedPoint mp;
      mp.undistorted = scan.points[j].xyz;
      mp.xyz = is_ref ? mp.undistorted : Vec3(to_ref * mp.undistorted);
      mp.original = raw.points[j].xyz;
      mp.t = raw.points[j].t;
      mp.lidar_id = scan.lidar_id;
      mp.source = source_index;
      frame.points.push_back(mp);
    }
  }
  return frame;
}

namespace {

struct VoxelKey {
  long x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelHash {
  std::size_t operator()(const VoxelKey& k) const {
    return static_cast<std::size_t>(k.x * 73856093L ^ k.y * 19349669L ^ k.z * 83492791L);
  }
};

}  // namespace

std::vector<std::size_t> voxel_downsample(std::span<const Vec3> points, double voxel) {
  std::vector<std::size_t> keep;
  if (!(voxel > 0.0)) {
    keep.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) keep[i] = i;
    return keep;
  }
  std::unordered_map<VoxelKey, std::pair<std::size_t, double>, VoxelHash> best;
  best.reserve(points.size());
  std::vector<VoxelKey> order;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 s = points[i] / voxel;
    const VoxelKey key{static_cast<long>(std::floor(s.x())), static_cast<long>(std::floor(s.y())),
                       static_cast<long>(std::floor(s.z()))};
    const Vec3 center = (Vec3(key.x, key.y, key.z) + Vec3::Constant(0.5)) * voxel;
    const double d = (points[i] - center).squaredNorm();
    auto [it, inserted] = best.try_emplace(key, i, d);
    if (inserted) {
      order.push_back(key);
    } else if (d < it->second.second) {
      it->second = {i, d};
    }
  }
  keep.reserve(order.size());
  for (const auto& k : order) keep.push_back(best[k].first);
  return keep;
}

}  // namespace mlio
