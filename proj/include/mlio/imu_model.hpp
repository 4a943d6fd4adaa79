#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "mlio/pose_with_cov.hpp"
#include "mlio/state.hpp"

namespace mlio {

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();  // rad/s
  Vec3 acc = Vec3::Zero();   // m/s^2, specific force
};

/// Continuous-time noise densities of the four channels of w.
struct NoiseParams {
  double gyro = 0.01;             // rad/s/sqrt(Hz)
  double acc = 0.1;               // m/s^2/sqrt(Hz)
  double gyro_bias_walk = 1e-4;   // rad/s^2/sqrt(Hz)
  double acc_bias_walk = 1e-3;    // m/s^3/sqrt(Hz)

  bool valid() const { return gyro >= 0.0 && acc >= 0.0 && gyro_bias_walk >= 0.0 && acc_bias_walk >= 0.0; }
  bool operator==(const NoiseParams&) const = default;
};

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

/// Rows of the discrete kinematic model f(x, u, w) for one step of length dt:
/// [w_m - b_w - n_w; v + (R(a_m - b_a - n_a) + g) dt/2; R(a_m - b_a - n_a) + g; n_bw; n_ba; 0; 0...].
TangentVec kinematics_f(const FilterState& x, const ImuSample& u, double dt, const Vec12& noise = Vec12::Zero());

/// Mean-only step x [+] dt * f(x, u, 0).
FilterState propagate_mean(const FilterState& x, const ImuSample& u, double dt);

struct PropagationJacobians {
  Eigen::MatrixXd fx;  // d(error_{k+1}) / d(error_k)
  Eigen::MatrixXd fw;  // d(error_{k+1}) / d(w), dim x 12
};

PropagationJacobians propagation_jacobians(const FilterState& x, const ImuSample& u, double dt);

/// Discrete covariance of w over one step: the continuous densities squared divided by dt.
Mat12 process_noise(const NoiseParams& noise, double dt);

struct Propagated {
  FilterState state;
  StateCov cov;
};

/// One filter prediction step. Throws std::invalid_argument unless dt > 0.
Propagated propagate(const FilterState& x, const StateCov& cov, const ImuSample& u, double dt, const NoiseParams& noise);

/// Rigidly re-anchors a buffered pose chain so that the pose which used to coincide with
/// `pre_update` now coincides with the optimized pose of `optimized`. Consecutive relative
/// transforms are untouched. Throws std::invalid_argument on an empty buffer.
std::vector<PoseWithCov> recalc_pose_buffer(std::span<const PoseWithCov> buffer, const Pose3& pre_update,
                                            const FilterState& optimized);

}  // namespace mlio
