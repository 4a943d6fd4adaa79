#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "mlio/state.hpp"

namespace mlio {

struct MapPoint {
  Vec3 xyz = Vec3::Zero();  // world, m
  Mat3 cov = Mat3::Zero();  // world, m^2
  long frame = 0;
  std::uint64_t id = 0;  // insertion order, assigned by the map

  double trace() const { return cov.trace(); }
};

/// Point in the reference LiDAR frame, moved to the world with the optimized state:
///   p = T_GI * rel_to_ref * T_IL(src) * p_u,
/// with its covariance (expressed in the reference LiDAR frame) rotated by R_GI R_IL(ref).
MapPoint to_world(const FilterState& x, const Pose3& rel_to_ref, std::size_t src_lidar, std::size_t ref_lidar,
                  const Vec3& undistorted, const Mat3& cov_in_ref);

struct Neighbor {
  std::uint32_t index = 0;  // slot in the owning container
  double dist2 = 0.0;
};

/// kd-tree over externally stored points with lazy deletion and scapegoat-style rebuilds:
/// a subtree whose larger child holds more than alpha of its nodes is rebuilt around medians.
class KdTree {
public:
  explicit KdTree(double alpha = 0.7, bool auto_rebalance = true) : alpha_(alpha), auto_rebalance_(auto_rebalance) {}

  /// Index i refers to the i-th point ever added; indices are never reused.
  void add(const Vec3& p);
  void remove(std::uint32_t index);
  bool alive(std::uint32_t index) const { return nodes_[index].alive; }

  /// Exact k nearest alive points ordered by (distance, index).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const;

  /// Rebuilds every subtree violating the balance condition, dropping removed points.
  void maybe_rebalance();

  std::size_t size() const { return alive_; }
  std::size_t depth() const;
  const Vec3& point(std::uint32_t index) const { return nodes_[index].p; }

private:
  static constexpr std::uint32_t kNone = 0xffffffffu;
  struct Node {
    Vec3 p;
    std::uint32_t left = kNone, right = kNone;
    std::uint32_t size = 1;  // nodes in the subtree, removed ones included
    int axis = 0;
    bool alive = true;
  };

  std::uint32_t subtree_size(std::uint32_t n) const { return n == kNone ? 0 : nodes_[n].size; }
  bool unbalanced(std::uint32_t n) const;
  std::uint32_t rebuild(std::uint32_t n);
  std::uint32_t build(std::vector<std::uint32_t>& ids, std::size_t lo, std::size_t hi);
  void collect_alive(std::uint32_t n, std::vector<std::uint32_t>& out) const;
  std::uint32_t rebalance_from(std::uint32_t n);

  double alpha_;
  bool auto_rebalance_;
  std::vector<Node> nodes_;
  std::uint32_t root_ = kNone;
  std::size_t alive_ = 0;
};

struct MapParams {
  double voxel = 0.4;
  std::size_t capacity = 1;
  double tau = 1.0;
  /// Per-axis half-widths of the box around a voxel center where points are preferred (diag Z).
  Vec3 center_box = Vec3::Constant(0.05);
  double alpha = 0.7;
};

enum class InsertOutcome {
  Accepted,   // voxel had room
  Gated,      // tr(Sigma) >= tau
  Displaced,  // replaced a worse incumbent
  Dropped,    // voxel full and the incumbents rank better
};

struct KnnResult {
  std::vector<const MapPoint*> points;  // nearest first
  std::vector<double> dist2;
  bool complete = false;  // k points were available
};

/// World map with tau-gating and uncertainty-aware voxel downsampling.
class UncertainMap {
public:
  explicit UncertainMap(MapParams params = {}) : params_(params), tree_(params.alpha) {}

  InsertOutcome insert(MapPoint p);
  KnnResult knn(const Vec3& q, std::size_t k = 5) const;
  void maybe_rebalance() { tree_.maybe_rebalance(); }

  std::size_t size() const { return tree_.size(); }
  std::size_t depth() const { return tree_.depth(); }
  const MapParams& params() const { return params_; }

  /// Stored points in insertion order.
  std::vector<const MapPoint*> points() const;

  /// ASCII PLY with per-vertex x y z trace.
  void write_ply(const std::filesystem::path& path) const;

private:
  struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
  };
  struct VoxelHash {
    std::size_t operator()(const VoxelKey& k) const noexcept;
  };

  VoxelKey key_of(const Vec3& p) const;
  bool center_eligible(const Vec3& p, const VoxelKey& key) const;

  MapParams params_;
  KdTree tree_;
  std::vector<MapPoint> store_;  // parallel to the tree's indices
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelHash> voxels_;
};

}  // namespace mlio
