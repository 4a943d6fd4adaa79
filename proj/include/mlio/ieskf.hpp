#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "mlio/state.hpp"
#include "mlio/trajectory_buffer.hpp"

namespace mlio {

struct PriorError {
  TangentVec residual;  // x^k [-] x_prior
  Eigen::MatrixXd jacobian;  // d((x^k [+] e) [-] x_prior)/de at e = 0
};

PriorError prior_error(const FilterState& iterate, const FilterState& prior);

/// Stacked point-to-plane residuals linearized at one iterate (before w_l scaling).
struct ResidualBatch {
  Eigen::VectorXd z;
  Eigen::MatrixXd h;  // rows x state dim
  Eigen::VectorXd r;  // per-row variance, > 0
};

using ResidualModel = std::function<ResidualBatch(const FilterState&)>;

struct UpdateOptions {
  double epsilon = 1e-3;
  int max_iter = 5;
  /// Step halvings tried before an iteration that raises the objective is given up.
  int max_backtracks = 8;
};

struct UpdateResult {
  FilterState state;
  StateCov cov;
  int iterations = 0;
  bool converged = false;
  /// Objective at the prior followed by its value after each accepted step.
  std::vector<double> objective;
};

/// MAP objective ||x [-] x_prior||^2_{Sigma} + sum_j ||w_l z_j||^2_{R_j}.
double map_objective(const FilterState& x, const FilterState& prior, const StateCov& prior_cov,
                     const ResidualBatch& batch, double w_l);

/// Iterated error-state Kalman update. Each iteration relinearizes at the current
/// iterate, forms K = (H^T R^-1 H + P^-1)^-1 H^T R^-1 with P = J^-1 Sigma J^-T, and
/// steps x^{k+1} = x^k [+] (-K z - (I - K H) J^-1 (x^k [-] x_prior)); a step that would
/// raise the MAP objective is halved until it does not. Stops once the step norm drops
/// below epsilon. Throws std::invalid_argument on an empty batch.
UpdateResult iterate_update(const FilterState& prior, const StateCov& prior_cov, const ResidualModel& model, double w_l,
                            const UpdateOptions& options);

/// Makes the update the new propagation anchor and re-anchors the pose buffer.
void finalize(const UpdateResult& result, double t, const Pose3& prior_pose, ImuTrajectory& trajectory);

}  // namespace mlio
