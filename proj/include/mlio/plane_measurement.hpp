#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "mlio/state.hpp"

namespace mlio {

/// Rescaling intervals and the uncertainty threshold tau.
struct FicParams {
  double s_min = 1.0, s_max = 1.25;
  double r_min = 0.0075, r_max = 0.0125;
  double l_min = 0.5, l_max = 3.0;
  double b_min = 0.2, b_max = 0.8;
  double tau = 1.0;

  bool valid() const { return s_min < s_max && r_min < r_max && l_min < l_max && b_min < b_max && tau > 0.0; }
  bool operator==(const FicParams&) const = default;
};

/// Affine map of v from [v_min, v_max] onto [i_min, i_max]; the midpoint of the target
/// interval when the source range is degenerate.
double fic(double v, double v_min, double v_max, double i_max, double i_min);

struct PlaneCovariance {
  Mat3 cov = Mat3::Zero();
  std::vector<double> weights;
};

/// Weighted covariance sum_n w_n^2 Sigma_n with w_n proportional to tau - tr(Sigma_n).
/// Throws std::domain_error when some tr(Sigma_n) >= tau.
PlaneCovariance plane_covariance(std::span<const Mat3> neighbor_covs, double tau);

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  Vec3 anchor = Vec3::Zero();  // centroid of the neighbors, lies on the plane
  std::vector<Vec3> neighbors;
  double max_distance = 0.0;
  bool planar = false;
};

/// Least-squares plane through the neighbors. nullopt when they do not span a plane
/// (collinear or coincident); otherwise `planar` says whether every neighbor lies within
/// d_plane of the fit.
std::optional<PlaneFit> fit_plane(std::span<const Vec3> neighbors, double d_plane = 0.1);

/// Where a merged point lands in the world for state x:
///   T_GI * rel_to_ref * T_IL * p_u.
Vec3 point_to_world(const FilterState& x, const Pose3& rel_to_ref, std::size_t lidar, const Vec3& undistorted);

struct Residual {
  double z = 0.0;        // scaled signed distance, m
  Eigen::RowVectorXd h;  // d z / d(error state)
  double r = 0.0;        // measurement variance
};

struct TraceRange {
  double min = 0.0;
  double max = 0.0;
};

/// Point-to-plane residual v^T (p_w - q) / s and its Jacobian over the full error state.
Residual residual(const FilterState& x, const Pose3& rel_to_ref, std::size_t lidar, const Vec3& undistorted,
                  const Vec3& normal, const Vec3& anchor, double s, double r);

/// Residual with s = FIC(tr, s_max, s_min) and R = FIC(tr, R_max, R_min) over the batch range.
Residual residual(const FilterState& x, const Pose3& rel_to_ref, std::size_t lidar, const Vec3& undistorted,
                  const PlaneFit& plane, double plane_trace, const TraceRange& batch, const FicParams& params);

/// sigma_3 / sigma_1 of the stacked normals (0 for fewer than 3 normals).
double normal_spread(std::span<const Vec3> normals);

/// Localization weight w_l from the spread of the plane normals, clamped to [l_min, l_max].
double localization_weight(std::span<const Vec3> normals, const FicParams& params);

}  // namespace mlio
