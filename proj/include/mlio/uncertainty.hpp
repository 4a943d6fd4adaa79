#pragma once

#include "mlio/pose_with_cov.hpp"
#include "mlio/state.hpp"

namespace mlio {

struct PointWithCov {
  Vec3 xyz = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  int lidar_id = 0;
  double t = 0.0;
};

/// {T^-1, Ad(T^-1) Sigma Ad(T^-1)^T}.
PoseWithCov invert_with_cov(const PoseWithCov& p);

/// {T_a T_b, Sigma} with Sigma the fourth-order compounding of two independent
/// left-perturbed poses (second-order part Sigma_a + Ad(T_a) Sigma_b Ad(T_a)^T plus the
/// quartic cross terms). Output symmetrized.
PoseWithCov compound(const PoseWithCov& a, const PoseWithCov& b);

/// Extrinsic T_IL of LiDAR i with its covariance taken from the filter covariance.
PoseWithCov extrinsic_with_cov(const FilterState& x, const StateCov& cov, std::size_t lidar);

/// Relative transform T_i^-1 T_j with the accumulated growth (body rotation, world
/// translation) between the two times mapped into the frame at t_i.
PoseWithCov relative_with_cov(const Pose3& body_i, const Pose3& body_j, const Mat6& growth);

/// Chain T_IP^-1 * rel * T_IS, compounded with covariances: the transform that carries a
/// raw point of LiDAR S to the reference LiDAR P and its acquisition-time uncertainty.
PoseWithCov acquisition_uncertainty(const PoseWithCov& extrinsic_ref, const PoseWithCov& rel,
                                    const PoseWithCov& extrinsic_src);

/// First-order point uncertainty: q = T p, Sigma_p = top-left 3x3 of Q Xi Q^T with
/// Q = [(T p)^circledot, T D], Xi = diag(Sigma_T, Z).
PointWithCov point_covariance(const PoseWithCov& t, const Vec3& p, const Mat3& z);

}  // namespace mlio
