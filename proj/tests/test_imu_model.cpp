#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mlio/imu_model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mlio;
using namespace mlio::test;

namespace {

Vec12 random_noise(Rng& rng) {
  Vec12 w;
  for (int i = 0; i < 12; ++i) w(i) = 0.1 * gauss(rng);
  return w;
}

}  // namespace

TEST_CASE("stationary level body with exact measurements is an equilibrium") {
  FilterState x(2);
  x.bias_gyro = Vec3(0.01, -0.02, 0.005);
  ImuSample u;
  u.gyro = x.bias_gyro;
  u.acc = -x.gravity;
  CHECK(kinematics_f(x, u, 0.005).norm() == 0.0);
}

TEST_CASE("free fall accelerates by gravity") {
  FilterState x(1);
  const TangentVec f = kinematics_f(x, ImuSample{}, 0.005);
  CHECK((f.segment<3>(idx::kVel) - x.gravity).norm() == 0.0);
}

TEST_CASE("kinematics rows match the written-out model") {
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    const FilterState x = random_state(rng, 2);
    ImuSample u;
    u.gyro = random_vec(rng, 1.0);
    u.acc = random_vec(rng, 12.0);
    const Vec12 n = random_noise(rng);
    const double dt = 0.005;
    const Mat3 r = x.rot.matrix();
    const Vec3 acc_world = r * (u.acc - x.bias_acc - n.segment<3>(3)) + x.gravity;

    Eigen::VectorXd expect = Eigen::VectorXd::Zero(x.dim());
    expect.segment<3>(0) = u.gyro - x.bias_gyro - n.segment<3>(0);
    expect.segment<3>(3) = x.vel + 0.5 * dt * acc_world;
    expect.segment<3>(6) = acc_world;
    expect.segment<3>(9) = n.segment<3>(6);
    expect.segment<3>(12) = n.segment<3>(9);
    CHECK((kinematics_f(x, u, dt, n) - expect).norm() < 1e-12);
  }
}

TEST_CASE("propagation Jacobians match central finite differences") {
  const JacobianErrors e = jacobian_errors(30, 42);
  CHECK(e.fx < 1e-5);
  CHECK(e.fw < 1e-5);
}

TEST_CASE("process noise is the squared densities over dt") {
  const NoiseParams n{0.01, 0.1, 1e-4, 1e-3};
  const Mat12 q = process_noise(n, 0.005);
  CHECK(q.diagonal()(0) == doctest::Approx(1e-4 / 0.005));
  CHECK(q.diagonal()(5) == doctest::Approx(1e-2 / 0.005));
  CHECK(q.diagonal()(6) == doctest::Approx(1e-8 / 0.005));
  CHECK(q.diagonal()(11) == doctest::Approx(1e-6 / 0.005));
  CHECK((q - Mat12(q.diagonal().asDiagonal())).norm() == 0.0);
}

TEST_CASE("equilibrium propagation grows covariance by the noise term only") {
  FilterState x(1);
  ImuSample u;
  u.acc = -x.gravity;
  const double dt = 0.005;
  const NoiseParams noise;
  const Propagated p = propagate(x, StateCov::Zero(x.dim(), x.dim()), u, dt, noise);
  CHECK(boxminus(p.state, x).norm() == 0.0);
  const PropagationJacobians j = propagation_jacobians(x, u, dt);
  const Eigen::MatrixXd expect = j.fw * process_noise(noise, dt) * j.fw.transpose();
  CHECK((p.cov - expect).norm() < 1e-15);
}

TEST_CASE("propagate rejects non-increasing time and bad covariance") {
  FilterState x(1);
  const StateCov c = StateCov::Identity(x.dim(), x.dim());
  CHECK_THROWS_AS(propagate(x, c, ImuSample{}, 0.0, NoiseParams{}), std::invalid_argument);
  CHECK_THROWS_AS(propagate(x, c, ImuSample{}, -0.01, NoiseParams{}), std::invalid_argument);
  CHECK_THROWS_AS(propagate(x, StateCov::Identity(3, 3), ImuSample{}, 0.01, NoiseParams{}), std::invalid_argument);
}

TEST_CASE("one second of constant-rate motion integrates to the closed form") {
  // Yaw rate about world z from a tilted start at constant world velocity: the specific force
  // stays constant in the body frame, so the discrete model should be exact.
  const double rate = 0.8;
  const Rot3 r0 = so3_exp(Vec3(0.2, -0.1, 0.3));
  const Vec3 v(1.0, -0.5, 0.2), g(0.0, 0.0, -9.81);
  const Vec3 bg(0.002, -0.001, 0.003), ba(0.05, -0.02, 0.01);
  const auto truth = [&](double t) { return Pose3(so3_exp(Vec3(0, 0, rate * t)) * r0, Vec3(1, 2, 3) + v * t); };

  FilterState x(1);
  x.set_pose(truth(0.0));
  x.vel = v;
  x.bias_gyro = bg;
  x.bias_acc = ba;
  x.gravity = g;
  StateCov cov = StateCov::Identity(x.dim(), x.dim()) * 1e-6;
  const double dt = 1.0 / 200.0;
  for (int k = 0; k < 200; ++k) {
    ImuSample u;
    u.t = k * dt;
    u.gyro = r0.inverse() * Vec3(0, 0, rate) + bg;
    u.acc = truth(u.t).rotation.inverse() * (-g) + ba;
    Propagated p = propagate(x, cov, u, dt, NoiseParams{});
    x = p.state;
    cov = p.cov;
  }
  const Pose3 end = truth(1.0);
  CHECK((x.pos - end.translation).norm() < 1e-5);
  CHECK((x.rot.inverse() * end.rotation).angle() < 1e-5);
}

TEST_CASE("covariance trace never shrinks while propagating without updates") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    FilterState x = random_state(rng, 2);
    StateCov cov = StateCov::Identity(x.dim(), x.dim()) * 1e-4;
    double prev = cov.trace();
    for (int k = 0; k < 400; ++k) {
      ImuSample u;
      u.gyro = random_vec(rng, 1.0);
      u.acc = -x.gravity + random_vec(rng, 2.0);
      const Propagated p = propagate(x, cov, u, 0.005, NoiseParams{});
      x = p.state;
      cov = p.cov;
      REQUIRE(cov.trace() >= prev);
      prev = cov.trace();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(0) > -1e-9);
    CHECK((cov - cov.transpose()).norm() < 1e-9);
  }
}

TEST_CASE("two half steps agree with one full step to second order") {
  Rng rng(44);
  for (int i = 0; i < 20; ++i) {
    const FilterState x = random_state(rng, 1);
    ImuSample u;
    u.gyro = random_vec(rng, 1.0);
    u.acc = random_vec(rng, 12.0);
    const auto gap = [&](double dt) {
      const FilterState full = propagate_mean(x, u, dt);
      const FilterState halves = propagate_mean(propagate_mean(x, u, dt / 2), u, dt / 2);
      return boxminus(full, halves).norm();
    };
    CHECK(gap(0.01) < 1e-3);
    CHECK(gap(0.01) / gap(0.005) > 3.5);
  }
}

TEST_CASE("recalc_pose_buffer applies a rigid correction") {
  Rng rng(45);
  std::vector<PoseWithCov> buffer;
  Pose3 p = random_pose(rng);
  for (int i = 0; i < 20; ++i) {
    p = p * Pose3(random_rotation(rng, 0.05), random_vec(rng, 0.05));
    buffer.push_back({p, Mat6(random_spd(rng, 6, 0.01))});
  }
  const Pose3 pre = buffer.back().pose;

  SUBCASE("no change leaves the buffer as it is") {
    FilterState opt(1);
    opt.set_pose(pre);
    const auto out = recalc_pose_buffer(buffer, pre, opt);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK((out[i].pose.matrix() - buffer[i].pose.matrix()).norm() < 1e-12);
      CHECK((out[i].cov - buffer[i].cov).norm() < 1e-15);
    }
  }
  SUBCASE("a pure translation shifts every pose") {
    const Vec3 c(0.3, -0.2, 0.1);
    FilterState opt(1);
    opt.set_pose(Pose3(pre.rotation, pre.translation + c));
    const auto out = recalc_pose_buffer(buffer, pre, opt);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK((out[i].pose.translation - buffer[i].pose.translation - c).norm() < 1e-12);
      CHECK((out[i].pose.rotation.matrix() - buffer[i].pose.rotation.matrix()).norm() < 1e-12);
    }
  }
  SUBCASE("a random correction keeps consecutive relative poses") {
    FilterState opt(1);
    opt.set_pose(pre * random_pose(rng, 0.3, 0.5));
    const auto out = recalc_pose_buffer(buffer, pre, opt);
    CHECK((out.back().pose.matrix() - opt.pose().matrix()).norm() < 1e-9);
    for (std::size_t i = 1; i < out.size(); ++i) {
      const Pose3 before = buffer[i - 1].pose.inverse() * buffer[i].pose;
      const Pose3 after = out[i - 1].pose.inverse() * out[i].pose;
      CHECK((before.matrix() - after.matrix()).norm() < 1e-9);
    }
  }
  CHECK_THROWS_AS(recalc_pose_buffer({}, pre, FilterState(1)), std::invalid_argument);
}
