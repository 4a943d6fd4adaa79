#include "mlio/lie.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlio {

double Rot3::angle() const { return so3_log(*this).norm(); }

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Rot3 so3_exp(const Vec3& omega) {
  if (!omega.allFinite()) throw std::domain_error("so3_exp: non-finite rotation vector");
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < kSmallAngle) return Rot3(Mat3::Identity() + w + 0.5 * w * w);
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Rot3(Mat3::Identity() + a * w + b * w * w);
}

Vec3 so3_log(const Rot3& r) {
  Eigen::Quaterniond q(r.matrix());
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < kSmallAngle) {
    // theta/sin(theta/2) ~ 2/w for tiny angles
    return (2.0 / q.w()) * v;
  }
  const double theta = 2.0 * std::atan2(n, q.w());
  return (theta / n) * v;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  if (theta < kSmallAngle) return Mat3::Identity() + 0.5 * w + w * w / 6.0;
  const double t2 = theta * theta;
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * w + (theta - std::sin(theta)) / (t2 * theta) * w * w;
}

Mat3 so3_left_jacobian_inv(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  if (theta < kSmallAngle) return Mat3::Identity() - 0.5 * w + w * w / 12.0;
  const double c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * w + c * w * w;
}

Mat3 so3_right_jacobian(const Vec3& phi) { return so3_left_jacobian(-phi); }
Mat3 so3_right_jacobian_inv(const Vec3& phi) { return so3_left_jacobian_inv(-phi); }

Pose3 se3_exp(const Twist6& xi) {
  if (!xi.allFinite()) throw std::domain_error("se3_exp: non-finite twist");
  const Vec3 phi = xi.head<3>();
  return Pose3(so3_exp(phi), so3_left_jacobian(phi) * xi.tail<3>());
}

Twist6 se3_log(const Pose3& t) {
  const Vec3 phi = so3_log(t.rotation);
  if (phi.norm() > std::numbers::pi - 1e-6) throw std::domain_error("se3_log: rotation angle too close to pi");
  Twist6 xi;
  xi << phi, so3_left_jacobian_inv(phi) * t.translation;
  return xi;
}

Mat6 adjoint(const Pose3& t) {
  Mat6 ad = Mat6::Zero();
  const Mat3& r = t.rotation.matrix();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = skew(t.translation) * r;
  return ad;
}

Mat46 point_circdot(const Vec4& q) {
  Mat46 m = Mat46::Zero();
  m.topLeftCorner<3, 3>() = q.w() * Mat3::Identity();
  m.topRightCorner<3, 3>() = -skew(q.head<3>());
  return m;
}

Mat6 swap_blocks(const Mat6& m) {
  Mat6 out;
  out.topLeftCorner<3, 3>() = m.bottomRightCorner<3, 3>();
  out.bottomRightCorner<3, 3>() = m.topLeftCorner<3, 3>();
  out.topRightCorner<3, 3>() = m.bottomLeftCorner<3, 3>();
  out.bottomLeftCorner<3, 3>() = m.topRightCorner<3, 3>();
  return out;
}

}  // namespace mlio
