#include "mlio/uncertainty.hpp"

namespace mlio {

namespace {

// <<A>> = -tr(A) 1 + A
Mat3 dbl(const Mat3& a) { return -a.trace() * Mat3::Identity() + a; }

// <<A, B>> = <<A>><<B>> + <<BA>>
Mat3 dbl(const Mat3& a, const Mat3& b) { return dbl(a) * dbl(b) + dbl(b * a); }

// <<Sigma>> for a covariance ordered (translation; rotation).
Mat6 dbl(const Mat6& s) {
  Mat6 out = Mat6::Zero();
  const Mat3 rr = dbl(Mat3(s.bottomRightCorner<3, 3>()));
  out.topLeftCorner<3, 3>() = rr;
  out.bottomRightCorner<3, 3>() = rr;
  out.topRightCorner<3, 3>() = dbl(Mat3(s.topRightCorner<3, 3>() + s.topRightCorner<3, 3>().transpose()));
  return out;
}

}  // namespace

PoseWithCov invert_with_cov(const PoseWithCov& p) {
  const Pose3 inv = p.pose.inverse();
  const Mat6 ad = adjoint(inv);
  return {inv, symmetrized(ad * p.cov * ad.transpose())};
}

PoseWithCov compound(const PoseWithCov& a, const PoseWithCov& b) {
  const Mat6 ad = adjoint(a.pose);
  // The quartic terms are written for (translation; rotation) ordering.
  const Mat6 s1 = swap_blocks(a.cov);
  const Mat6 s2 = swap_blocks(Mat6(ad * b.cov * ad.transpose()));

  const Mat3 s1_tt = s1.topLeftCorner<3, 3>(), s1_tr = s1.topRightCorner<3, 3>(), s1_rr = s1.bottomRightCorner<3, 3>();
  const Mat3 s2_tt = s2.topLeftCorner<3, 3>(), s2_tr = s2.topRightCorner<3, 3>(), s2_rr = s2.bottomRightCorner<3, 3>();

  const Mat3 b_tt = dbl(s1_rr, s2_tt) + dbl(Mat3(s1_tr.transpose()), s2_tr) + dbl(s1_tr, Mat3(s2_tr.transpose())) +
                    dbl(s1_tt, s2_rr);
  const Mat3 b_tr = dbl(s1_rr, Mat3(s2_tr.transpose())) + dbl(Mat3(s1_tr.transpose()), s2_rr);
  const Mat3 b_rr = dbl(s1_rr, s2_rr);
  Mat6 bq;
  bq << b_tt, b_tr, b_tr.transpose(), b_rr;

  const Mat6 a1 = dbl(s1);
  const Mat6 a2 = dbl(s2);
  Mat6 sigma = s1 + s2 + 0.25 * bq + (a1 * s2 + s2 * a1.transpose() + a2 * s1 + s1 * a2.transpose()) / 12.0;
  return {a.pose * b.pose, symmetrized(swap_blocks(sigma))};
}

PoseWithCov extrinsic_with_cov(const FilterState& x, const StateCov& cov, std::size_t lidar) {
  const Pose3& e = x.extrinsics.at(lidar);
  const int o = idx::extrinsic_rot(lidar);
  const Mat6 m = state_to_left_jacobian(e);
  return {e, symmetrized(m * cov.block<6, 6>(o, o) * m.transpose())};
}

PoseWithCov relative_with_cov(const Pose3& body_i, const Pose3& body_j, const Mat6& growth) {
  const Pose3 rel = body_i.inverse() * body_j;
  Mat6 b = Mat6::Zero();
  b.topLeftCorner<3, 3>() = rel.rotation.matrix();
  b.bottomRightCorner<3, 3>() = body_i.rotation.matrix().transpose();
  return {rel, symmetrized(b * growth * b.transpose())};
}

PoseWithCov acquisition_uncertainty(const PoseWithCov& extrinsic_ref, const PoseWithCov& rel,
                                    const PoseWithCov& extrinsic_src) {
  return compound(compound(invert_with_cov(extrinsic_ref), rel), extrinsic_src);
}

PointWithCov point_covariance(const PoseWithCov& t, const Vec3& p, const Mat3& z) {
  const Vec3 q = t.pose * p;
  Eigen::Matrix<double, 4, 9> big_q = Eigen::Matrix<double, 4, 9>::Zero();
  big_q.leftCols<6>() = point_circdot(q.homogeneous());
  big_q.block<3, 3>(0, 6) = t.pose.rotation.matrix();  // T D with D = [I; 0^T]
  Eigen::Matrix<double, 9, 9> xi = Eigen::Matrix<double, 9, 9>::Zero();
  xi.topLeftCorner<6, 6>() = swap_blocks(t.cov);  // circledot columns are (translation; rotation)
  xi.bottomRightCorner<3, 3>() = z;
  const Eigen::Matrix4d full = big_q * xi * big_q.transpose();
  PointWithCov out;
  out.xyz = q;
  out.cov = 0.5 * (full.topLeftCorner<3, 3>() + full.topLeftCorner<3, 3>().transpose());
  return out;
}

}  // namespace mlio
