#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <random>

#include "mlio/lie.hpp"
#include "mlio/state.hpp"

namespace mlio::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double gauss(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline Eigen::VectorXd gauss_vec(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = gauss(rng);
  return v;
}

inline Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Vec3 random_vec(Rng& rng, double scale) { return scale * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)); }

// Rotation from an angle-axis with Eigen, independent of so3_exp.
inline Rot3 random_rotation(Rng& rng, double max_angle = 3.0) {
  return Rot3(Eigen::AngleAxisd(uniform(rng, 0.0, max_angle), random_unit(rng)).toRotationMatrix());
}

inline Pose3 random_pose(Rng& rng, double max_angle = 3.0, double max_t = 5.0) {
  return Pose3(random_rotation(rng, max_angle), random_vec(rng, max_t));
}

inline FilterState random_state(Rng& rng, std::size_t num_lidars) {
  FilterState x(num_lidars);
  x.rot = random_rotation(rng);
  x.pos = random_vec(rng, 10.0);
  x.vel = random_vec(rng, 3.0);
  x.bias_gyro = random_vec(rng, 0.01);
  x.bias_acc = random_vec(rng, 0.1);
  x.gravity = Vec3(0.0, 0.0, -9.81) + random_vec(rng, 0.2);
  for (Pose3& e : x.extrinsics) e = random_pose(rng, 3.0, 0.5);
  return x;
}

inline Eigen::MatrixXd random_spd(Rng& rng, int n, double scale) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
  return scale * scale * (a * a.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n));
}

/// Central finite-difference Jacobian of f at x0.
inline Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x0, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x0);
  Eigen::MatrixXd j(f0.size(), x0.size());
  for (int i = 0; i < x0.size(); ++i) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// ||a - b||_F / max(||b||_F, floor).
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1.0) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Unbiased sample covariance of the columns of samples.
inline Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& samples) {
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::MatrixXd c = samples.colwise() - mean;
  return c * c.transpose() / static_cast<double>(samples.cols() - 1);
}

/// Matrix exponential by its power series.
inline Eigen::MatrixXd expm_series(const Eigen::MatrixXd& a, int terms = 50) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd term = out;
  for (int k = 1; k < terms; ++k) {
    term = term * a / static_cast<double>(k);
    out += term;
  }
  return out;
}

/// Hat operator of a (rotation; translation) twist as a 4x4 matrix.
inline Mat4 twist_hat(const Vec6& xi) {
  Mat4 m = Mat4::Zero();
  m(0, 1) = -xi(2);
  m(0, 2) = xi(1);
  m(1, 0) = xi(2);
  m(1, 2) = -xi(0);
  m(2, 0) = -xi(1);
  m(2, 1) = xi(0);
  m.topRightCorner<3, 1>() = xi.tail<3>();
  return m;
}

/// Pose from the series exponential of a twist; independent of se3_exp.
inline Pose3 exp_oracle(const Vec6& xi) { return Pose3::from_matrix(expm_series(twist_hat(xi), 40)); }

}  // namespace mlio::test
