#include "mlio/spline.hpp"

#include <string>

#include "mlio/lie.hpp"

namespace mlio {

std::array<double, 3> cumulative_basis(double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return {(5.0 + 3.0 * s - 3.0 * s2 + s3) / 6.0, (1.0 + 3.0 * s + 3.0 * s2 - 2.0 * s3) / 6.0, s3 / 6.0};
}

Twist6 incremental_pose(const Pose3& a, const Pose3& b) { return se3_log(a.inverse() * b); }

namespace {

double checked_phase(const ControlWindow& w, double t) {
  const double s = w.phase(t);
  if (!(w.dt > 0.0) || s < 0.0 || s >= 1.0) {
    throw OutOfWindow("spline query t=" + std::to_string(t) + " outside [" + std::to_string(w.t_k) + ", " +
                      std::to_string(w.t_k + w.dt) + ")");
  }
  return s;
}

}  // namespace

Pose3 interpolate_pose(const ControlWindow& window, double t) {
  const double s = checked_phase(window, t);
  const auto b = cumulative_basis(s);
  Pose3 out = window.control[0].pose;
  for (int n = 0; n < 3; ++n) {
    const Twist6 omega = incremental_pose(window.control[n].pose, window.control[n + 1].pose);
    out = out * se3_exp(b[n] * omega);
  }
  return out;
}

PoseWithCov interpolate(const ControlWindow& window, double t) {
  return {interpolate_pose(window, t), window.control[2].cov};
}

Pose3 relative_pose(const ControlWindow& window_a, double t_a, const ControlWindow& window_b, double t_b) {
  return interpolate_pose(window_a, t_a).inverse() * interpolate_pose(window_b, t_b);
}

}  // namespace mlio
