#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mlio {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat46 = Eigen::Matrix<double, 4, 6>;

/// Below this angle exp/log/Jacobians switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

/// SO(3) element stored as an orthonormal 3x3 matrix.
class Rot3 {
public:
  Rot3() : m_(Mat3::Identity()) {}
  /// No re-orthonormalization happens here; callers pass valid rotations.
  explicit Rot3(const Mat3& m) : m_(m) {}

  static Rot3 identity() { return Rot3(); }
  static Rot3 from_quaternion(const Eigen::Quaterniond& q) { return Rot3(q.normalized().toRotationMatrix()); }

  const Mat3& matrix() const { return m_; }
  Eigen::Quaterniond to_quaternion() const { return Eigen::Quaterniond(m_).normalized(); }

  Rot3 inverse() const { return Rot3(m_.transpose()); }
  Rot3 operator*(const Rot3& other) const { return Rot3(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Rotation angle in [0, pi].
  double angle() const;

private:
  Mat3 m_;
};

/// Rigid transform acting as x -> R x + t.
struct Pose3 {
  Rot3 rotation;
  Vec3 translation = Vec3::Zero();

  Pose3() = default;
  Pose3(const Rot3& r, const Vec3& t) : rotation(r), translation(t) {}

  static Pose3 identity() { return Pose3(); }
  static Pose3 from_matrix(const Mat4& m) { return Pose3(Rot3(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>()); }

  Pose3 inverse() const {
    const Rot3 rt = rotation.inverse();
    return Pose3(rt, -(rt * translation));
  }
  Pose3 operator*(const Pose3& o) const { return Pose3(rotation * o.rotation, rotation * o.translation + translation); }
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// se(3) tangent element ordered (rotation; translation).
using Twist6 = Vec6;

Mat3 skew(const Vec3& v);

/// Throws std::domain_error for non-finite input.
Rot3 so3_exp(const Vec3& omega);
Vec3 so3_log(const Rot3& r);

/// Left Jacobian of SO(3); doubles as the V matrix of the SE(3) exponential.
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inv(const Vec3& phi);
/// Right Jacobian, Jr(phi) = Jl(-phi).
Mat3 so3_right_jacobian(const Vec3& phi);
Mat3 so3_right_jacobian_inv(const Vec3& phi);

/// Throws std::domain_error for non-finite input.
Pose3 se3_exp(const Twist6& xi);
/// Throws std::domain_error when the rotation angle is within 1e-6 of pi.
Twist6 se3_log(const Pose3& t);

/// Ad(T) with T exp(xi^) T^-1 = exp((Ad(T) xi)^), twist ordering (rotation; translation).
Mat6 adjoint(const Pose3& t);

/// The (.)^circledot operator on a homogeneous point q = (eps; eta):
///   [ eta*I  -eps^ ]
///   [  0^T    0^T  ]
/// Its columns act on a perturbation ordered (translation; rotation), so
/// exp(xi^) q ~= q + q^circledot * swap_halves(xi) for an (rotation; translation) twist.
Mat46 point_circdot(const Vec4& q);

/// Exchanges the two 3-blocks of a twist.
inline Vec6 swap_halves(const Vec6& v) {
  Vec6 out;
  out << v.tail<3>(), v.head<3>();
  return out;
}

/// Re-orders a 6x6 covariance between (rotation; translation) and (translation; rotation).
Mat6 swap_blocks(const Mat6& m);

}  // namespace mlio
