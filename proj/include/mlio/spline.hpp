#pragma once

#include <array>
#include <stdexcept>

#include "mlio/pose_with_cov.hpp"

namespace mlio {

/// Raised when a trajectory query falls outside the interval a window or buffer covers.
class OutOfWindow : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// Four consecutive control poses T^{k-1}..T^{k+2} on a uniform knot grid.
/// The interpolation interval is [t_k, t_k + dt).
struct ControlWindow {
  std::array<PoseWithCov, 4> control;
  double t_k = 0.0;
  double dt = 0.0;
  long k = 0;

  double knot_time(int i) const { return t_k + (i - 1) * dt; }
  double phase(double t) const { return (t - t_k) / dt; }
};

/// Cumulative cubic basis weights (B1, B2, B3) at phase s.
std::array<double, 3> cumulative_basis(double s);

/// Omega = log(T_a^-1 T_b). Throws std::domain_error near a half turn.
Twist6 incremental_pose(const Pose3& a, const Pose3& b);

/// Pose at t in [t_k, t_k + dt):
///   T^{k-1} exp(B1 Omega_k) exp(B2 Omega_{k+1}) exp(B3 Omega_{k+2}).
/// The covariance is the one carried by T^{k+1}, held constant over the interval.
/// Throws OutOfWindow for t outside the interval.
PoseWithCov interpolate(const ControlWindow& window, double t);

/// Same as interpolate() without the covariance.
Pose3 interpolate_pose(const ControlWindow& window, double t);

/// T(t_a)^-1 T(t_b) with each pose taken from its own window.
Pose3 relative_pose(const ControlWindow& window_a, double t_a, const ControlWindow& window_b, double t_b);

}  // namespace mlio
