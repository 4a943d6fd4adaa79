#include "mlio/trajectory_buffer.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mlio {

namespace {

Mat6 psd_part(const Mat6& m) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(symmetrized(m));
  const Vec6 ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Mat6 pose_block(const StateCov& cov) { return cov.topLeftCorner<6, 6>(); }

}  // namespace

void ImuTrajectory::initialize(const ImuSample& first, const FilterState& state, const StateCov& cov) {
  knots_.clear();
  cache_.valid = false;
  Knot k;
  k.t = first.t;
  k.state = state;
  k.cov = cov;
  k.input = first;
  knots_.push_back(std::move(k));
  anchor_t_ = first.t;
  anchor_state_ = state;
  anchor_cov_ = cov;
}

ImuTrajectory::Knot ImuTrajectory::propagate_knot(const FilterState& base_state, const StateCov& base_cov, double base_t,
                                                  const Mat6& base_accum, const ImuSample& input,
                                                  const ImuSample& next) const {
  Knot k;
  k.t = next.t;
  k.input = next;
  const double dt = next.t - base_t;
  if (dt > 1e-12) {
    Propagated p = propagate(base_state, base_cov, input, dt, noise_);
    k.state = std::move(p.state);
    k.cov = std::move(p.cov);
  } else {
    k.state = base_state;
    k.cov = base_cov;
  }
  k.noise_accum = base_accum + psd_part(pose_block(k.cov) - pose_block(base_cov));
  return k;
}

void ImuTrajectory::add_imu(const ImuSample& u) {
  if (knots_.empty()) throw std::logic_error("ImuTrajectory::add_imu before initialize");
  const Knot& last = knots_.back();
  if (!(u.t > last.t)) throw std::invalid_argument("ImuTrajectory::add_imu: non-increasing timestamps");
  if (anchor_t_ > last.t) {
    knots_.push_back(propagate_knot(anchor_state_, anchor_cov_, anchor_t_, last.noise_accum, last.input, u));
  } else {
    knots_.push_back(propagate_knot(last.state, last.cov, last.t, last.noise_accum, last.input, u));
  }
}

std::size_t ImuTrajectory::interval_index(double t) const {
  if (knots_.size() < 2 || t < knots_.front().t || !(t < knots_.back().t)) {
    throw OutOfWindow("trajectory query t=" + std::to_string(t) + " outside buffered knots");
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t, [](double v, const Knot& k) { return v < k.t; });
  return static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1;
}

ControlWindow ImuTrajectory::window(double t) const {
  const std::size_t k = interval_index(t);
  if (k < 1 || k + 2 >= knots_.size()) {
    throw OutOfWindow("spline window for t=" + std::to_string(t) + " lacks control points");
  }
  ControlWindow w;
  w.k = static_cast<long>(k);
  w.t_k = knots_[k].t;
  w.dt = knots_[k + 1].t - knots_[k].t;
  for (int i = 0; i < 4; ++i) {
    const Knot& knot = knots_[k - 1 + i];
    if (i > 0) {
      const double spacing = knot.t - knots_[k - 2 + i].t;
      if (std::abs(spacing - w.dt) > 1e-9 * w.dt) throw std::runtime_error("spline window: non-uniform knot spacing");
    }
    const Pose3 pose = knot.state.pose();
    const Mat6 m = state_to_left_jacobian(pose);
    w.control[i] = PoseWithCov{pose, symmetrized(m * pose_block(knot.cov) * m.transpose())};
  }
  return w;
}

bool ImuTrajectory::covers(double t_begin, double t_end, Interpolation method) const {
  if (knots_.size() < 4 || t_begin > t_end) return false;
  if (method == Interpolation::Spline) {
    return t_begin >= knots_[1].t && t_end < knots_[knots_.size() - 3].t;
  }
  return t_begin >= knots_.front().t && t_end < knots_.back().t;
}

FilterState ImuTrajectory::state_at(double t, Interpolation method) const {
  const std::size_t k = interval_index(t);
  const Knot& knot = knots_[k];
  const bool from_anchor = anchor_t_ >= knot.t && anchor_t_ <= t;
  const FilterState& base = from_anchor ? anchor_state_ : knot.state;
  const double tau = t - (from_anchor ? anchor_t_ : knot.t);
  FilterState out = tau > 0.0 ? propagate_mean(base, knot.input, tau) : base;
  if (method == Interpolation::Spline) out.set_pose(interpolate_pose(window(t), t));
  return out;
}

Pose3 ImuTrajectory::pose_at(double t, Interpolation method) const {
  if (method != Interpolation::Spline) return state_at(t, Interpolation::Discrete).pose();
  const std::size_t k = interval_index(t);
  if (!cache_.valid || cache_.k != k) {
    const ControlWindow w = window(t);
    cache_.base = w.control[0].pose;
    for (int n = 0; n < 3; ++n) cache_.omega[n] = incremental_pose(w.control[n].pose, w.control[n + 1].pose);
    cache_.k = k;
    cache_.valid = true;
  }
  const auto b = cumulative_basis((t - knots_[k].t) / (knots_[k + 1].t - knots_[k].t));
  Pose3 out = cache_.base;
  for (int n = 0; n < 3; ++n) out = out * se3_exp(b[n] * cache_.omega[n]);
  return out;
}

const StateCov& ImuTrajectory::assigned_cov(double t) const { return knots_[interval_index(t) + 1].cov; }

Mat6 ImuTrajectory::accumulated_growth(double t_a, double t_b) const {
  const std::size_t ka = interval_index(t_a) + 1;
  const std::size_t kb = interval_index(t_b) + 1;
  const Mat6 d = ka <= kb ? Mat6(knots_[kb].noise_accum - knots_[ka].noise_accum)
                          : Mat6(knots_[ka].noise_accum - knots_[kb].noise_accum);
  return symmetrized(d);
}

void ImuTrajectory::reanchor(double t, const Pose3& prior_pose, const FilterState& optimized, const StateCov& cov) {
  cache_.valid = false;
  if (knots_.empty() || t < knots_.front().t) throw OutOfWindow("reanchor time precedes the buffer");
  const Pose3 correction = optimized.pose() * prior_pose.inverse();
  const Mat3& rc = correction.rotation.matrix();

  const int n = optimized.dim();
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  g.block<3, 3>(idx::kPos, idx::kPos) = rc;
  g.block<3, 3>(idx::kVel, idx::kVel) = rc;
  Mat6 b = Mat6::Identity();
  b.bottomRightCorner<3, 3>() = rc;

  std::size_t first_after = 0;
  for (Knot& k : knots_) {
    if (k.t > t) break;
    k.state.set_pose(correction * k.state.pose());
    k.state.vel = rc * k.state.vel;
    if (k.cov.rows() == n) k.cov = g * k.cov * g.transpose();
    k.noise_accum = symmetrized(b * k.noise_accum * b.transpose());
    ++first_after;
  }

  anchor_t_ = t;
  anchor_state_ = optimized;
  anchor_cov_ = cov;

  for (std::size_t i = first_after; i < knots_.size(); ++i) {
    const Knot& prev = knots_[i - 1];
    const ImuSample next = knots_[i].input;
    if (i == first_after) {
      knots_[i] = propagate_knot(anchor_state_, anchor_cov_, anchor_t_, prev.noise_accum, prev.input, next);
    } else {
      knots_[i] = propagate_knot(prev.state, prev.cov, prev.t, prev.noise_accum, prev.input, next);
    }
  }
}

void ImuTrajectory::prune_before(double t) {
  cache_.valid = false;
  while (knots_.size() > 4 && knots_[1].t < t && knots_[1].t < anchor_t_) knots_.pop_front();
}

}  // namespace mlio
