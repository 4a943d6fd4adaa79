#include "mlio/state.hpp"

#include <stdexcept>

namespace mlio {

FilterState boxplus(const FilterState& x, const TangentVec& delta) {
  if (delta.size() != x.dim()) throw std::invalid_argument("boxplus: tangent dimension does not match state");
  FilterState out = x;
  out.rot = x.rot * so3_exp(delta.segment<3>(idx::kRot));
  out.pos += delta.segment<3>(idx::kPos);
  out.vel += delta.segment<3>(idx::kVel);
  out.bias_gyro += delta.segment<3>(idx::kBiasGyro);
  out.bias_acc += delta.segment<3>(idx::kBiasAcc);
  out.gravity += delta.segment<3>(idx::kGravity);
  for (std::size_t i = 0; i < x.extrinsics.size(); ++i) {
    Pose3& e = out.extrinsics[i];
    e.rotation = e.rotation * so3_exp(delta.segment<3>(idx::extrinsic_rot(i)));
    e.translation += delta.segment<3>(idx::extrinsic_pos(i));
  }
  return out;
}

TangentVec boxminus(const FilterState& a, const FilterState& b) {
  if (a.num_lidars() != b.num_lidars()) throw std::invalid_argument("boxminus: states have different LiDAR counts");
  TangentVec d(a.dim());
  d.segment<3>(idx::kRot) = so3_log(b.rot.inverse() * a.rot);
  d.segment<3>(idx::kPos) = a.pos - b.pos;
  d.segment<3>(idx::kVel) = a.vel - b.vel;
  d.segment<3>(idx::kBiasGyro) = a.bias_gyro - b.bias_gyro;
  d.segment<3>(idx::kBiasAcc) = a.bias_acc - b.bias_acc;
  d.segment<3>(idx::kGravity) = a.gravity - b.gravity;
  for (std::size_t i = 0; i < a.extrinsics.size(); ++i) {
    d.segment<3>(idx::extrinsic_rot(i)) = so3_log(b.extrinsics[i].rotation.inverse() * a.extrinsics[i].rotation);
    d.segment<3>(idx::extrinsic_pos(i)) = a.extrinsics[i].translation - b.extrinsics[i].translation;
  }
  return d;
}

}  // namespace mlio
