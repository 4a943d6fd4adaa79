#include "mlio/imu_model.hpp"

#include <stdexcept>

namespace mlio {

TangentVec kinematics_f(const FilterState& x, const ImuSample& u, double dt, const Vec12& noise) {
  TangentVec f = TangentVec::Zero(x.dim());
  const Vec3 acc_world = x.rot * (u.acc - x.bias_acc - noise.segment<3>(3)) + x.gravity;
  f.segment<3>(idx::kRot) = u.gyro - x.bias_gyro - noise.segment<3>(0);
  f.segment<3>(idx::kPos) = x.vel + 0.5 * acc_world * dt;
  f.segment<3>(idx::kVel) = acc_world;
  f.segment<3>(idx::kBiasGyro) = noise.segment<3>(6);
  f.segment<3>(idx::kBiasAcc) = noise.segment<3>(9);
  return f;
}

FilterState propagate_mean(const FilterState& x, const ImuSample& u, double dt) {
  return boxplus(x, dt * kinematics_f(x, u, dt));
}

PropagationJacobians propagation_jacobians(const FilterState& x, const ImuSample& u, double dt) {
  const int n = x.dim();
  PropagationJacobians j;
  j.fx = Eigen::MatrixXd::Identity(n, n);
  j.fw = Eigen::MatrixXd::Zero(n, 12);

  const Vec3 rate_dt = (u.gyro - x.bias_gyro) * dt;
  const Mat3 jr = so3_right_jacobian(rate_dt);
  const Mat3& r = x.rot.matrix();
  const Mat3 r_acc_skew = r * skew(u.acc - x.bias_acc);
  const double h = 0.5 * dt * dt;

  j.fx.block<3, 3>(idx::kRot, idx::kRot) = so3_exp(rate_dt).matrix().transpose();
  j.fx.block<3, 3>(idx::kRot, idx::kBiasGyro) = -jr * dt;

  j.fx.block<3, 3>(idx::kPos, idx::kRot) = -h * r_acc_skew;
  j.fx.block<3, 3>(idx::kPos, idx::kVel) = dt * Mat3::Identity();
  j.fx.block<3, 3>(idx::kPos, idx::kBiasAcc) = -h * r;
  j.fx.block<3, 3>(idx::kPos, idx::kGravity) = h * Mat3::Identity();

  j.fx.block<3, 3>(idx::kVel, idx::kRot) = -dt * r_acc_skew;
  j.fx.block<3, 3>(idx::kVel, idx::kBiasAcc) = -dt * r;
  j.fx.block<3, 3>(idx::kVel, idx::kGravity) = dt * Mat3::Identity();

  j.fw.block<3, 3>(idx::kRot, 0) = -jr * dt;
  j.fw.block<3, 3>(idx::kPos, 3) = -h * r;
  j.fw.block<3, 3>(idx::kVel, 3) = -dt * r;
  j.fw.block<3, 3>(idx::kBiasGyro, 6) = dt * Mat3::Identity();
  j.fw.block<3, 3>(idx::kBiasAcc, 9) = dt * Mat3::Identity();
  return j;
}

Mat12 process_noise(const NoiseParams& noise, double dt) {
  Vec12 d;
  d << Vec3::Constant(noise.gyro * noise.gyro), Vec3::Constant(noise.acc * noise.acc),
      Vec3::Constant(noise.gyro_bias_walk * noise.gyro_bias_walk), Vec3::Constant(noise.acc_bias_walk * noise.acc_bias_walk);
  return (d / dt).asDiagonal();
}

Propagated propagate(const FilterState& x, const StateCov& cov, const ImuSample& u, double dt, const NoiseParams& noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate: non-increasing timestamps");
  if (cov.rows() != x.dim() || cov.cols() != x.dim()) throw std::invalid_argument("propagate: covariance dimension mismatch");
  const PropagationJacobians j = propagation_jacobians(x, u, dt);
  Propagated out;
  out.state = propagate_mean(x, u, dt);
  // Only the 18 core rows/cols of F differ from identity; extrinsic blocks pass through.
  out.cov = j.fx * cov * j.fx.transpose() + j.fw * process_noise(noise, dt) * j.fw.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

std::vector<PoseWithCov> recalc_pose_buffer(std::span<const PoseWithCov> buffer, const Pose3& pre_update,
                                            const FilterState& optimized) {
  if (buffer.empty()) throw std::invalid_argument("recalc_pose_buffer: empty buffer");
  const Pose3 correction = optimized.pose() * pre_update.inverse();
  const Mat6 ad = adjoint(correction);
  std::vector<PoseWithCov> out;
  out.reserve(buffer.size());
  for (const PoseWithCov& p : buffer) {
    out.push_back({correction * p.pose, symmetrized(ad * p.cov * ad.transpose())});
  }
  return out;
}

}  // namespace mlio
