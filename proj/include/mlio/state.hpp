#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "mlio/lie.hpp"

namespace mlio {

using TangentVec = Eigen::VectorXd;
using StateCov = Eigen::MatrixXd;

/// Offsets of each block inside the error-state vector.
namespace idx {
inline constexpr int kRot = 0;
inline constexpr int kPos = 3;
inline constexpr int kVel = 6;
inline constexpr int kBiasGyro = 9;
inline constexpr int kBiasAcc = 12;
inline constexpr int kGravity = 15;
inline constexpr int kCore = 18;
/// Rotation block of the i-th LiDAR extrinsic; the translation block follows it.
inline constexpr int extrinsic_rot(std::size_t i) { return kCore + 6 * static_cast<int>(i); }
inline constexpr int extrinsic_pos(std::size_t i) { return extrinsic_rot(i) + 3; }
}  // namespace idx

/// Body pose in the world frame, velocity, IMU biases, gravity and one IMU-from-LiDAR
/// extrinsic per sensor. Rotations are perturbed on the right, vectors additively.
struct FilterState {
  Rot3 rot;
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_acc = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  std::vector<Pose3> extrinsics;

  FilterState() = default;
  explicit FilterState(std::size_t num_lidars) : extrinsics(num_lidars) {}

  std::size_t num_lidars() const { return extrinsics.size(); }
  int dim() const { return idx::kCore + 6 * static_cast<int>(extrinsics.size()); }
  Pose3 pose() const { return Pose3(rot, pos); }
  void set_pose(const Pose3& p) {
    rot = p.rotation;
    pos = p.translation;
  }
};

inline int state_dim(std::size_t num_lidars) { return idx::kCore + 6 * static_cast<int>(num_lidars); }

/// x [+] delta. Throws std::invalid_argument on a dimension mismatch.
FilterState boxplus(const FilterState& x, const TangentVec& delta);
/// a [-] b, the exact inverse of boxplus: boxplus(b, boxminus(a, b)) == a.
TangentVec boxminus(const FilterState& a, const FilterState& b);

}  // namespace mlio
