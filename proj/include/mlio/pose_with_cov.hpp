#pragma once

#include "mlio/lie.hpp"

namespace mlio {

/// A pose and the covariance of a left perturbation, T = exp(xi^) * pose, with xi
/// ordered (rotation; translation).
struct PoseWithCov {
  Pose3 pose;
  Mat6 cov = Mat6::Zero();
};

/// Maps a (right rotation, additive world translation) pose error, the convention of
/// FilterState, onto the left twist perturbation used by PoseWithCov.
inline Mat6 state_to_left_jacobian(const Pose3& t) {
  Mat6 m = Mat6::Zero();
  const Mat3& r = t.rotation.matrix();
  m.topLeftCorner<3, 3>() = r;
  m.bottomLeftCorner<3, 3>() = skew(t.translation) * r;
  m.bottomRightCorner<3, 3>() = Mat3::Identity();
  return m;
}

inline Mat6 symmetrized(const Mat6& m) { return 0.5 * (m + m.transpose()); }

}  // namespace mlio
