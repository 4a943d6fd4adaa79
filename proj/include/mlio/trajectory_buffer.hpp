#pragma once

#include <array>
#include <deque>
#include <optional>

#include "mlio/imu_model.hpp"
#include "mlio/spline.hpp"

namespace mlio {

enum class Interpolation {
  Discrete,  // hold the IMU sample of the enclosing knot and integrate the discrete model
  Spline,    // cumulative cubic B-spline over the propagated knot poses
};

/// IMU-rate propagation buffer. Knots sit on the IMU timestamps; knots after the
/// current anchor are propagated from it, knots before it are history that has been
/// rigidly re-anchored after each update.
class ImuTrajectory {
public:
  struct Knot {
    double t = 0.0;
    FilterState state;
    StateCov cov;
    /// Running sum of the PSD part of the per-step growth of the pose covariance block,
    /// in the filter's (body rotation, world translation) convention.
    Mat6 noise_accum = Mat6::Zero();
    /// IMU sample at t, applied over [t, next knot).
    ImuSample input;
  };

  explicit ImuTrajectory(NoiseParams noise) : noise_(noise) {}

  /// Starts the buffer with a first IMU sample and the state/covariance at its time.
  void initialize(const ImuSample& first, const FilterState& state, const StateCov& cov);
  bool initialized() const { return !knots_.empty(); }

  /// Appends a knot propagated from the previous one (or from the anchor when it lies
  /// in between). Throws std::invalid_argument on non-increasing timestamps.
  void add_imu(const ImuSample& u);

  double front_time() const { return knots_.front().t; }
  double back_time() const { return knots_.back().t; }
  double anchor_time() const { return anchor_t_; }
  const std::deque<Knot>& knots() const { return knots_; }

  /// Window T^{k-1}..T^{k+2} around t; throws OutOfWindow when a knot is missing.
  ControlWindow window(double t) const;
  /// Knot k with t_k <= t < t_{k+1}; throws OutOfWindow.
  std::size_t interval_index(double t) const;

  /// Latest time a query with the given method can be answered for.
  bool covers(double t_begin, double t_end, Interpolation method) const;

  Pose3 pose_at(double t, Interpolation method) const;
  /// Full mean state at t by the discrete model (the pose is replaced by the spline pose
  /// when method is Spline).
  FilterState state_at(double t, Interpolation method) const;
  /// Covariance assigned to the interval containing t: the one of its right knot.
  const StateCov& assigned_cov(double t) const;
  /// Accumulated pose-covariance growth between the intervals containing t_a and t_b.
  Mat6 accumulated_growth(double t_a, double t_b) const;

  /// Installs an optimized state at time t. Knots at or before t are moved by the rigid
  /// correction optimized.pose() * prior_pose^-1, knots after t are re-propagated.
  void reanchor(double t, const Pose3& prior_pose, const FilterState& optimized, const StateCov& cov);

  /// Drops knots older than t while keeping at least one knot before it.
  void prune_before(double t);

private:
  Knot propagate_knot(const FilterState& base_state, const StateCov& base_cov, double base_t, const Mat6& base_accum,
                      const ImuSample& input, const ImuSample& next) const;

  // Control poses and twists of the last spline interval queried; queries arrive in time
  // order, so most hit the same interval. Not thread-safe.
  struct SplineCache {
    std::size_t k = 0;
    bool valid = false;
    Pose3 base;
    std::array<Twist6, 3> omega;
  };

  NoiseParams noise_;
  mutable SplineCache cache_;
  std::deque<Knot> knots_;
  double anchor_t_ = 0.0;
  FilterState anchor_state_;
  StateCov anchor_cov_;
};

}  // namespace mlio
