#include "mlio/eval.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mlio {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  Trajectory out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v[8];
    for (double& x : v)
      if (!(ss >> x)) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 8 numbers");
    std::string extra;
    if (ss >> extra) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": trailing data");
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.5)) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad quaternion");
    if (!out.empty() && !(v[0] > out.back().t))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": timestamps not increasing");
    out.push_back({v[0], Pose3(Rot3::from_quaternion(q), Vec3(v[1], v[2], v[3]))});
  }
  return out;
}

void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  for (const StampedPose& s : traj) {
    const Eigen::Quaterniond q = s.pose.rotation.to_quaternion();
    const Vec3& t = s.pose.translation;
    std::fprintf(f, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", s.t, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(),
                 q.w());
  }
  std::fclose(f);
}

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est, const Trajectory& truth) {
  if (est.size() < 2 || truth.empty()) throw std::runtime_error("associate: need at least two estimated poses");
  std::vector<double> gaps;
  for (std::size_t i = 1; i < est.size(); ++i) gaps.push_back(est[i].t - est[i - 1].t);
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
  const double tol = 0.5 * gaps[gaps.size() / 2];

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto it = std::lower_bound(truth.begin(), truth.end(), est[i].t,
                                     [](const StampedPose& s, double t) { return s.t < t; });
    std::size_t best = truth.size();
    double best_dt = std::numeric_limits<double>::infinity();
    for (auto c : {it, it == truth.begin() ? it : std::prev(it)}) {
      if (c == truth.end()) continue;
      const double dt = std::abs(c->t - est[i].t);
      if (dt < best_dt) {
        best_dt = dt;
        best = static_cast<std::size_t>(c - truth.begin());
      }
    }
    if (best < truth.size() && best_dt <= tol) pairs.emplace_back(i, best);
  }
  if (pairs.size() < 2) throw std::runtime_error("associate: trajectories have no temporal overlap");
  return pairs;
}

AteResult ate(const Trajectory& est, const Trajectory& truth) {
  const auto pairs = associate(est, truth);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    src.col(k) = est[pairs[k].first].pose.translation;
    dst.col(k) = truth[pairs[k].second].pose.translation;
  }
  const Mat4 align = Eigen::umeyama(src, dst, false);

  AteResult out;
  out.alignment = Pose3::from_matrix(align);
  out.matches = pairs.size();
  double se_t = 0.0, se_r = 0.0;
  for (const auto& [i, j] : pairs) {
    const Pose3 aligned = out.alignment * est[i].pose;
    se_t += (aligned.translation - truth[j].pose.translation).squaredNorm();
    const double ang = (truth[j].pose.rotation.inverse() * aligned.rotation).angle() * kRadToDeg;
    se_r += ang * ang;
  }
  out.trans = std::sqrt(se_t / static_cast<double>(n));
  out.rot = std::sqrt(se_r / static_cast<double>(n));
  return out;
}

RteResult rte(const Trajectory& est, const Trajectory& truth, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("rte: delta must be positive");
  const auto pairs = associate(est, truth);
  std::vector<double> arc(pairs.size(), 0.0);
  for (std::size_t k = 1; k < pairs.size(); ++k)
    arc[k] = arc[k - 1] + (truth[pairs[k].second].pose.translation - truth[pairs[k - 1].second].pose.translation).norm();

  RteResult out;
  double se_t = 0.0, se_r = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    j = std::max(j, i + 1);
    while (j < pairs.size() && arc[j] - arc[i] < delta) ++j;
    if (j >= pairs.size()) break;
    const double dist = arc[j] - arc[i];
    const Pose3 rel_truth = truth[pairs[i].second].pose.inverse() * truth[pairs[j].second].pose;
    const Pose3 rel_est = est[pairs[i].first].pose.inverse() * est[pairs[j].first].pose;
    const Pose3 err = rel_truth.inverse() * rel_est;
    const double et = err.translation.norm() / dist * 100.0;
    const double er = err.rotation.angle() * kRadToDeg / dist;
    se_t += et * et;
    se_r += er * er;
    ++out.segments;
  }
  if (out.segments > 0) {
    out.trans = std::sqrt(se_t / static_cast<double>(out.segments));
    out.rot = std::sqrt(se_r / static_cast<double>(out.segments));
  }
  return out;
}

}  // namespace mlio
