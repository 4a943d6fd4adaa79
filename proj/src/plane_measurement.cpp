#include "mlio/plane_measurement.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace mlio {

double fic(double v, double v_min, double v_max, double i_max, double i_min) {
  if (v_max == v_min) return 0.5 * (i_max + i_min);
  return (i_max - i_min) * (v - v_min) / (v_max - v_min) + i_min;
}

PlaneCovariance plane_covariance(std::span<const Mat3> neighbor_covs, double tau) {
  PlaneCovariance out;
  double total = 0.0;
  for (const Mat3& c : neighbor_covs) {
    const double margin = tau - c.trace();
    if (!(margin > 0.0)) throw std::domain_error("plane_covariance: neighbor trace reaches tau; map gating violated");
    out.weights.push_back(margin);
    total += margin;
  }
  for (std::size_t i = 0; i < neighbor_covs.size(); ++i) {
    out.weights[i] /= total;
    out.cov += out.weights[i] * out.weights[i] * neighbor_covs[i];
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

std::optional<PlaneFit> fit_plane(std::span<const Vec3> neighbors, double d_plane) {
  if (neighbors.size() < 3) return std::nullopt;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : neighbors) centroid += p;
  centroid /= static_cast<double>(neighbors.size());
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : neighbors) scatter += (p - centroid) * (p - centroid).transpose();

  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 ev = es.eigenvalues();  // ascending
  // A plane needs two well-spread in-plane directions.
  if (!(ev(1) > 1e-10 * std::max(1.0, ev(2)))) return std::nullopt;

  PlaneFit fit;
  fit.normal = es.eigenvectors().col(0).normalized();
  fit.anchor = centroid;
  fit.neighbors.assign(neighbors.begin(), neighbors.end());
  for (const Vec3& p : neighbors) fit.max_distance = std::max(fit.max_distance, std::abs(fit.normal.dot(p - centroid)));
  fit.planar = fit.max_distance < d_plane;
  return fit;
}

Vec3 point_to_world(const FilterState& x, const Pose3& rel_to_ref, std::size_t lidar, const Vec3& undistorted) {
  return x.pose() * (rel_to_ref * (x.extrinsics[lidar] * undistorted));
}

Residual residual(const FilterState& x, const Pose3& rel_to_ref, std::size_t lidar, const Vec3& undistorted,
                  const Vec3& normal, const Vec3& anchor, double s, double r) {
  const Pose3& ext = x.extrinsics[lidar];
  const Vec3 in_lidar_body = ext * undistorted;          // IMU frame at the scan's arrival
  const Vec3 in_ref_body = rel_to_ref * in_lidar_body;   // IMU frame at the reference time
  const Vec3 world = x.pose() * in_ref_body;
  const Mat3& r_gi = x.rot.matrix();
  const Mat3 r_chain = r_gi * rel_to_ref.rotation.matrix();

  Residual out;
  out.z = normal.dot(world - anchor) / s;
  out.h = Eigen::RowVectorXd::Zero(x.dim());
  const Eigen::RowVector3d nt = normal.transpose() / s;
  out.h.segment<3>(idx::kRot) = -nt * r_gi * skew(in_ref_body);
  out.h.segment<3>(idx::kPos) = nt;
  out.h.segment<3>(idx::extrinsic_rot(lidar)) = -nt * r_chain * ext.rotation.matrix() * skew(undistorted);
  out.h.segment<3>(idx::extrinsic_pos(lidar)) = nt * r_chain;
  out.r = r;
  return out;
}

Residual residual(const FilterState& x, const Pose3& rel_to_ref, std::size_t lidar, const Vec3& undistorted,
                  const PlaneFit& plane, double plane_trace, const TraceRange& batch, const FicParams& params) {
  const double s = fic(plane_trace, batch.min, batch.max, params.s_max, params.s_min);
  const double r = fic(plane_trace, batch.min, batch.max, params.r_max, params.r_min);
  return residual(x, rel_to_ref, lidar, undistorted, plane.normal, plane.anchor, s, r);
}

double normal_spread(std::span<const Vec3> normals) {
  if (normals.size() < 3) return 0.0;
  Mat3 gram = Mat3::Zero();
  for (const Vec3& n : normals) gram += n * n.transpose();
  const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(gram, Eigen::EigenvaluesOnly).eigenvalues().cwiseMax(0.0);
  if (!(ev(2) > 0.0)) return 0.0;
  // Singular values of the stacked normals are the square roots of the Gram eigenvalues.
  return std::sqrt(ev(0) / ev(2));
}

double localization_weight(std::span<const Vec3> normals, const FicParams& params) {
  if (normals.size() < 3) return params.l_min;
  const double w = normal_spread(normals);
  if (w < params.b_min) return params.l_min;
  if (w > params.b_max) return params.l_max;
  return fic(w, params.b_min, params.b_max, params.l_max, params.l_min);
}

}  // namespace mlio
