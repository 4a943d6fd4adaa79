#include "mlio/ieskf.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <stdexcept>

namespace mlio {

namespace {

std::vector<int> rotation_blocks(const FilterState& x) {
  std::vector<int> blocks{idx::kRot};
  for (std::size_t i = 0; i < x.num_lidars(); ++i) blocks.push_back(idx::extrinsic_rot(i));
  return blocks;
}

Eigen::MatrixXd inverse_prior_jacobian(const PriorError& pe, const FilterState& x) {
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(pe.jacobian.rows(), pe.jacobian.cols());
  for (int o : rotation_blocks(x)) inv.block<3, 3>(o, o) = so3_right_jacobian(pe.residual.segment<3>(o));
  return inv;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  const Eigen::Index n = m.rows();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    spdlog::warn("{} is singular, regularizing its diagonal by 1e-9", what);
    ldlt.compute(m + 1e-9 * Eigen::MatrixXd::Identity(n, n));
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(n, n));
}

}  // namespace

PriorError prior_error(const FilterState& iterate, const FilterState& prior) {
  PriorError pe;
  pe.residual = boxminus(iterate, prior);
  pe.jacobian = Eigen::MatrixXd::Identity(iterate.dim(), iterate.dim());
  for (int o : rotation_blocks(iterate)) pe.jacobian.block<3, 3>(o, o) = so3_right_jacobian_inv(pe.residual.segment<3>(o));
  return pe;
}

double map_objective(const FilterState& x, const FilterState& prior, const StateCov& prior_cov,
                     const ResidualBatch& batch, double w_l) {
  const TangentVec e = boxminus(x, prior);
  const double prior_term = e.dot(prior_cov.ldlt().solve(e));
  const double meas_term = w_l * w_l * (batch.z.array().square() / batch.r.array()).sum();
  return prior_term + meas_term;
}

UpdateResult iterate_update(const FilterState& prior, const StateCov& prior_cov, const ResidualModel& model, double w_l,
                            const UpdateOptions& options) {
  const int n = prior.dim();
  if (prior_cov.rows() != n || prior_cov.cols() != n) throw std::invalid_argument("iterate_update: covariance dimension");

  const Eigen::LDLT<Eigen::MatrixXd> prior_ldlt(prior_cov);
  auto objective = [&](const FilterState& x, const ResidualBatch& b) {
    const TangentVec e = boxminus(x, prior);
    return e.dot(prior_ldlt.solve(e)) + w_l * w_l * (b.z.array().square() / b.r.array()).sum();
  };

  UpdateResult out;
  FilterState x = prior;
  ResidualBatch batch = model(x);
  if (batch.z.size() == 0) throw std::invalid_argument("iterate_update: no residuals");
  double f = objective(x, batch);
  out.objective.push_back(f);

  Eigen::MatrixXd i_kh_p;  // (I - K H) P of the latest linearization
  for (int it = 0; it < options.max_iter; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd z = w_l * batch.z;
    const Eigen::MatrixXd h = w_l * batch.h;
    const Eigen::VectorXd r_inv = batch.r.cwiseInverse();

    const PriorError pe = prior_error(x, prior);
    const Eigen::MatrixXd j_inv = inverse_prior_jacobian(pe, x);
    const Eigen::MatrixXd p = j_inv * prior_cov * j_inv.transpose();
    const Eigen::MatrixXd p_inv = spd_inverse(p, "propagated covariance");

    const Eigen::MatrixXd ht_rinv = h.transpose() * r_inv.asDiagonal();
    const Eigen::MatrixXd normal = ht_rinv * h + p_inv;
    const Eigen::MatrixXd normal_inv = spd_inverse(normal, "IESKF normal matrix");
    // K = normal^-1 H^T R^-1 and I - K H = normal^-1 P^-1.
    const Eigen::MatrixXd k = normal_inv * ht_rinv;
    const TangentVec delta = -(k * z) - normal_inv * (p_inv * (j_inv * pe.residual));
    i_kh_p = (Eigen::MatrixXd::Identity(n, n) - k * h) * p;

    double step = 1.0;
    bool accepted = false;
    FilterState candidate;
    ResidualBatch candidate_batch;
    double candidate_f = f;
    for (int bt = 0; bt <= options.max_backtracks; ++bt, step *= 0.5) {
      candidate = boxplus(x, step * delta);
      candidate_batch = model(candidate);
      candidate_f = objective(candidate, candidate_batch);
      if (candidate_f <= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the Gauss-Newton direction: x is already a stationary point.
      out.converged = true;
      break;
    }
    x = std::move(candidate);
    batch = std::move(candidate_batch);
    f = candidate_f;
    out.objective.push_back(f);
    if ((step * delta).norm() < options.epsilon) {
      out.converged = true;
      break;
    }
  }

  out.state = x;
  out.cov = 0.5 * (i_kh_p + i_kh_p.transpose());
  return out;
}

void finalize(const UpdateResult& result, double t, const Pose3& prior_pose, ImuTrajectory& trajectory) {
  trajectory.reanchor(t, prior_pose, result.state, result.cov);
}

}  // namespace mlio
