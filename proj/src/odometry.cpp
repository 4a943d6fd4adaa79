#include "mlio/odometry.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "mlio/uncertainty.hpp"

namespace mlio {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// A correspondence fixed at the prior and re-evaluated at every iterate.
struct Association {
  std::size_t point = 0;  // index into the kept points
  Vec3 normal;
  Vec3 anchor;
  double trace = 0.0;
  double s = 1.0;
  double r = 0.01;
};

constexpr std::size_t kMinResiduals = 10;

}  // namespace

Odometry::Odometry(const RunConfig& config, std::vector<LidarInfo> lidars)
    : config_(config),
      sw_(switches(config.mode)),
      lidars_(std::move(lidars)),
      queues_(lidars_.size(), config.queue_capacity),
      traj_(config.noise),
      map_(MapParams{config.voxel, config.map_capacity, config.fic.tau, config.z_diag, config.rebalance_alpha}) {
  validate(config_);
  if (lidars_.empty()) throw std::invalid_argument("Odometry: no lidars");
  for (std::size_t i = 0; i < lidars_.size(); ++i) {
    if (!lidar_index_.emplace(lidars_[i].id, i).second)
      throw std::invalid_argument("Odometry: duplicate lidar id " + std::to_string(lidars_[i].id));
  }
}

void Odometry::add_imu(const ImuSample& u) {
  const auto start = Clock::now();
  if (!traj_.initialized()) {
    if (!init_samples_.empty() && !(u.t > init_samples_.back().t))
      throw std::invalid_argument("Odometry::add_imu: non-increasing timestamps");
    init_samples_.push_back(u);
    if (u.t - init_samples_.front().t >= lidars_.front().scan_period) initialize_filter();
  } else {
    imu_dt_ = u.t - traj_.back_time();
    traj_.add_imu(u);
  }
  preint_ms_ += ms_since(start);
}

void Odometry::initialize_filter() {
  Vec3 gyro = Vec3::Zero(), acc = Vec3::Zero();
  for (const ImuSample& u : init_samples_) {
    gyro += u.gyro;
    acc += u.acc;
  }
  gyro /= static_cast<double>(init_samples_.size());
  acc /= static_cast<double>(init_samples_.size());

  // The platform is assumed still over the first scan period: the mean specific force is
  // the reaction to gravity and the mean rate is the gyro bias.
  FilterState x(lidars_.size());
  x.gravity = -acc.normalized() * 9.81;
  x.bias_gyro = gyro;
  for (std::size_t i = 0; i < lidars_.size(); ++i) x.extrinsics[i] = lidars_[i].extrinsic;

  const RunConfig& c = config_;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(x.dim());
  var.segment<3>(idx::kRot).setConstant(c.init_rot_sigma * c.init_rot_sigma);
  var.segment<3>(idx::kPos).setConstant(c.init_pos_sigma * c.init_pos_sigma);
  var.segment<3>(idx::kVel).setConstant(c.init_vel_sigma * c.init_vel_sigma);
  var.segment<3>(idx::kBiasGyro).setConstant(c.init_bias_gyro_sigma * c.init_bias_gyro_sigma);
  var.segment<3>(idx::kBiasAcc).setConstant(c.init_bias_acc_sigma * c.init_bias_acc_sigma);
  var.segment<3>(idx::kGravity).setConstant(c.init_gravity_sigma * c.init_gravity_sigma);
  for (std::size_t i = 0; i < lidars_.size(); ++i) {
    var.segment<3>(idx::extrinsic_rot(i)).setConstant(c.init_ext_rot_sigma * c.init_ext_rot_sigma);
    var.segment<3>(idx::extrinsic_pos(i)).setConstant(c.init_ext_pos_sigma * c.init_ext_pos_sigma);
  }
  const StateCov cov = var.asDiagonal();

  traj_.initialize(init_samples_.front(), x, cov);
  for (std::size_t i = 1; i < init_samples_.size(); ++i) {
    imu_dt_ = init_samples_[i].t - init_samples_[i - 1].t;
    traj_.add_imu(init_samples_[i]);
  }
  state_ = x;
  cov_ = cov;
  init_samples_.clear();
  spdlog::debug("filter initialized: gravity ({:.4f}, {:.4f}, {:.4f}), gyro bias norm {:.2e}", x.gravity.x(),
                x.gravity.y(), x.gravity.z(), x.bias_gyro.norm());
}

void Odometry::add_scan(LidarScan scan) {
  const auto it = lidar_index_.find(scan.lidar_id);
  if (it == lidar_index_.end()) throw std::invalid_argument("Odometry::add_scan: unknown lidar id");
  const int index = static_cast<int>(it->second);
  scan.lidar_id = index;
  for (TimedPoint& p : scan.points) p.lidar_id = index;
  queues_.push(std::move(scan));
}

std::optional<double> Odometry::next_frame_time() const {
  const auto sel = select_scan_set(queues_.queues());
  if (!sel) return std::nullopt;
  return queues_.queues()[sel->reference][sel->index[sel->reference]].arrival();
}

int Odometry::process_ready() {
  int n = 0;
  while (traj_.initialized()) {
    const auto t = next_frame_time();
    if (!t || traj_.back_time() < *t + 3.0 * imu_dt_) break;
    auto popped = queues_.pop_selection();
    if (!popped) break;
    process_frame(std::move(popped->first), popped->second);
    ++n;
  }
  return n;
}

void Odometry::process_frame(std::vector<LidarScan> scans, std::size_t reference) {
  FrameStats st;
  for (const char* name : kStageNames) st.stage_ms[name] = 0.0;
  st.stage_ms["Pre-integration"] = preint_ms_;
  preint_ms_ = 0.0;
  const Interpolation method = sw_.interpolation;

  // Pre-process: trim points the buffer cannot interpolate yet (start-up only).
  auto start = Clock::now();
  const double t_ref = scans[reference].arrival();
  const double t_min = traj_.front_time() + 2.0 * imu_dt_;
  for (LidarScan& s : scans) {
    std::erase_if(s.points, [&](const TimedPoint& p) { return p.t < t_min || !p.xyz.allFinite(); });
    st.raw_points += s.points.size();
  }
  st.t = t_ref;
  st.reference_lidar = lidars_[reference].id;
  st.stage_ms["Pre-process"] += ms_since(start);
  if (scans[reference].points.empty() || st.raw_points == 0) {
    spdlog::warn("frame at {:.6f}: no usable points", t_ref);
    return;
  }
  // Scans emptied by the trim are left out of the merge.
  std::vector<LidarScan> used;
  std::size_t used_ref = 0;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    if (scans[i].points.empty()) continue;
    if (i == reference) used_ref = used.size();
    used.push_back(std::move(scans[i]));
  }

  // B-spline: undistortion and temporal merge into the reference LiDAR frame.
  start = Clock::now();
  const FilterState& anchor_like = traj_.knots().back().state;
  const std::vector<Pose3>& extrinsics = anchor_like.extrinsics;
  const PoseQuery body_pose = [&](double t) { return traj_.pose_at(t, method); };
  std::vector<LidarScan> undistorted;
  undistorted.reserve(used.size());
  for (const LidarScan& s : used)
    undistorted.push_back(undistort(s, body_pose, extrinsics[static_cast<std::size_t>(s.lidar_id)]));
  const MergedFrame frame = merge(undistorted, used, used_ref, body_pose, extrinsics);
  st.stage_ms["B-spline"] += ms_since(start);

  start = Clock::now();
  std::vector<Vec3> xyz;
  xyz.reserve(frame.points.size());
  for (const MergedPoint& p : frame.points) xyz.push_back(p.xyz);
  const std::vector<std::size_t> kept = voxel_downsample(xyz, config_.scan_voxel);
  st.used_points = kept.size();
  st.stage_ms["Pre-process"] += ms_since(start);

  start = Clock::now();
  const FilterState x_prior = traj_.state_at(t_ref, method);
  const StateCov cov_prior = traj_.assigned_cov(t_ref);
  const Pose3 prior_pose = x_prior.pose();
  double kalman_ms = ms_since(start);

  // Uncertainty: covariance of each kept point in the reference LiDAR frame.
  start = Clock::now();
  const std::size_t ref_index = static_cast<std::size_t>(frame.reference_id);
  const Mat3 z = config_.z_diag.asDiagonal();
  std::vector<Mat3> point_cov(kept.size());
  {
    std::vector<PoseWithCov> ext(lidars_.size());
    for (std::size_t i = 0; i < lidars_.size(); ++i) ext[i] = extrinsic_with_cov(x_prior, cov_prior, i);
    const Mat6 end_of_scan = cov_prior.topLeftCorner<6, 6>();
    int cached_source = -1;
    double cached_t = std::numeric_limits<double>::quiet_NaN();
    PoseWithCov chain;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const MergedPoint& p = frame.points[kept[k]];
      const auto src = static_cast<std::size_t>(p.lidar_id);
      if (sw_.uncertainty == PointUncertainty::None) {
        const Mat3 r = extrinsics[ref_index].rotation.matrix().transpose() *
                       frame.sources[static_cast<std::size_t>(p.source)].rel_to_ref.rotation.matrix() *
                       extrinsics[src].rotation.matrix();
        point_cov[k] = r * z * r.transpose();
        continue;
      }
      if (p.source != cached_source || p.t != cached_t) {
        cached_source = p.source;
        cached_t = p.t;
        const Pose3 body_j = traj_.pose_at(p.t, method);
        const Mat6 growth =
            sw_.uncertainty == PointUncertainty::PerPoint ? traj_.accumulated_growth(p.t, t_ref) : end_of_scan;
        chain = acquisition_uncertainty(ext[ref_index], relative_with_cov(prior_pose, body_j, growth), ext[src]);
      }
      point_cov[k] = point_covariance(chain, p.original, z).cov;
    }
  }
  st.stage_ms["Uncertainty"] += ms_since(start);

  // Kalman filter.
  start = Clock::now();
  FilterState x_post = x_prior;
  StateCov cov_post = cov_prior;
  if (frame_count_ > 0) {
    const double max_d2 = config_.max_neighbor_dist * config_.max_neighbor_dist;
    std::vector<Vec3> nbr;
    std::vector<Mat3> nbr_cov;
    // Plane correspondences of the kept points at state x.
    const auto associate = [&](const FilterState& x, double gate_at_1m) {
      std::vector<Association> out;
      for (std::size_t k = 0; k < kept.size(); ++k) {
        const MergedPoint& p = frame.points[kept[k]];
        const Pose3& rel = frame.sources[static_cast<std::size_t>(p.source)].rel_to_ref;
        const Vec3 pw = point_to_world(x, rel, static_cast<std::size_t>(p.lidar_id), p.undistorted);
        const KnnResult nn = map_.knn(pw, static_cast<std::size_t>(config_.knn));
        if (!nn.complete || nn.dist2.back() > max_d2) continue;
        nbr.clear();
        nbr_cov.clear();
        for (const MapPoint* m : nn.points) {
          nbr.push_back(m->xyz);
          nbr_cov.push_back(m->cov);
        }
        const auto fit = fit_plane(nbr, config_.d_plane);
        if (!fit || !fit->planar) continue;
        // Attitude errors displace far points more, so the gate widens with range.
        const double gate = gate_at_1m * std::sqrt(std::max(1.0, p.undistorted.norm()));
        if (std::abs(fit->normal.dot(pw - fit->anchor)) > gate) continue;
        out.push_back({k, fit->normal, fit->anchor, plane_covariance(nbr_cov, config_.fic.tau).cov.trace()});
      }
      return out;
    };
    // FIC weights of a batch; returns w_l.
    const auto weigh = [&](std::vector<Association>& assoc) {
      const FicParams& f = config_.fic;
      std::vector<Vec3> normals;
      TraceRange range{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      for (const Association& a : assoc) {
        normals.push_back(a.normal);
        range.min = std::min(range.min, a.trace);
        range.max = std::max(range.max, a.trace);
      }
      st.normal_spread = normal_spread(normals);
      for (Association& a : assoc) {
        if (sw_.fic_weights) {
          a.s = fic(a.trace, range.min, range.max, f.s_max, f.s_min);
          a.r = fic(a.trace, range.min, range.max, f.r_max, f.r_min);
        } else {
          a.s = 1.0;
          a.r = 0.5 * (f.r_min + f.r_max);
        }
      }
      return sw_.fic_weights ? localization_weight(normals, f) : 1.0;
    };
    const auto solve = [&](const std::vector<Association>& assoc, double w_l) {
      const ResidualModel model = [&](const FilterState& x) {
        ResidualBatch b;
        const auto m = static_cast<Eigen::Index>(assoc.size());
        b.z.resize(m);
        b.h.resize(m, x.dim());
        b.r.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
          const Association& a = assoc[static_cast<std::size_t>(i)];
          const MergedPoint& p = frame.points[kept[a.point]];
          const Pose3& rel = frame.sources[static_cast<std::size_t>(p.source)].rel_to_ref;
          const Residual res =
              residual(x, rel, static_cast<std::size_t>(p.lidar_id), p.undistorted, a.normal, a.anchor, a.s, a.r);
          b.z(i) = res.z;
          b.h.row(i) = res.h;
          b.r(i) = res.r;
        }
        return b;
      };
      if (spdlog::should_log(spdlog::level::debug)) {
        const ResidualBatch b0 = model(x_prior);
        spdlog::debug("frame {:.3f}: {} residuals, mean |z| {:.2e}, max |z| {:.2e}, w_l {:.3f}", t_ref, assoc.size(),
                      b0.z.cwiseAbs().mean(), b0.z.cwiseAbs().maxCoeff(), w_l);
      }
      return iterate_update(x_prior, cov_prior, model, w_l, {config_.epsilon, config_.max_iter});
    };

    // A coarse pass absorbs the prediction error; correspondences are then rebuilt at its
    // estimate under the fine gate and the update is redone from the same prior.
    std::optional<UpdateResult> ur;
    FilterState x_assoc = x_prior;
    int iterations = 0;
    std::vector<double> gates;
    if (config_.coarse_plane_residual > config_.max_plane_residual) gates.push_back(config_.coarse_plane_residual);
    gates.push_back(config_.max_plane_residual);
    for (const double gate : gates) {
      std::vector<Association> assoc = associate(x_assoc, gate);
      st.residuals = assoc.size();
      if (assoc.size() < kMinResiduals) {
        spdlog::warn("frame at {:.6f}: only {} correspondences at gate {}", t_ref, assoc.size(), gate);
        continue;
      }
      st.w_l = weigh(assoc);
      ur = solve(assoc, st.w_l);
      iterations += ur->iterations;
      x_assoc = ur->state;
    }

    if (ur) {
      st.iterations = iterations;
      st.converged = ur->converged;
      st.objective = ur->objective;
      st.updated = true;
      x_post = ur->state;
      cov_post = ur->cov;
      kalman_ms += ms_since(start);

      start = Clock::now();
      finalize(*ur, t_ref, prior_pose, traj_);
      st.stage_ms["Pre-integration"] += ms_since(start);
      start = Clock::now();
    } else {
      spdlog::warn("frame at {:.6f}: update skipped", t_ref);
    }
  }
  st.stage_ms["Kalman Filter"] += kalman_ms + ms_since(start);

  // Mapping.
  start = Clock::now();
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const MergedPoint& p = frame.points[kept[k]];
    const Pose3& rel = frame.sources[static_cast<std::size_t>(p.source)].rel_to_ref;
    MapPoint mp = to_world(x_post, rel, static_cast<std::size_t>(p.lidar_id), ref_index, p.undistorted, point_cov[k]);
    mp.frame = frame_count_;
    map_.insert(mp);
  }
  map_.maybe_rebalance();
  st.map_size = map_.size();
  st.stage_ms["Mapping"] += ms_since(start);

  st.cov_min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov_post, Eigen::EigenvaluesOnly).eigenvalues()(0);
  state_ = x_post;
  cov_ = cov_post;
  trajectory_.push_back({t_ref, x_post.pose()});

  double oldest_arrival = t_ref;
  for (const SourceScan& s : frame.sources) oldest_arrival = std::min(oldest_arrival, s.arrival);
  traj_.prune_before(oldest_arrival - 0.05);

  for (const auto& [name, ms] : st.stage_ms) st.total_ms += ms;
  frames_.push_back(std::move(st));
  ++frame_count_;
}

RunResult run_odometry(const Dataset& data, const RunConfig& config) {
  if (data.imu.empty()) throw std::runtime_error("run: dataset has no IMU stream");
  if (data.lidars.empty() || data.scans.size() != data.lidars.size())
    throw std::runtime_error("run: dataset has no LiDAR streams");
  Odometry odo(config, data.lidars);

  struct Pending {
    double arrival;
    std::size_t lidar, index;
  };
  std::vector<Pending> order;
  for (std::size_t l = 0; l < data.scans.size(); ++l)
    for (std::size_t i = 0; i < data.scans[l].size(); ++i)
      if (!data.scans[l][i].points.empty()) order.push_back({data.scans[l][i].arrival(), l, i});
  std::stable_sort(order.begin(), order.end(), [](const Pending& a, const Pending& b) { return a.arrival < b.arrival; });
  if (order.empty()) throw std::runtime_error("run: dataset has no LiDAR points");
  if (data.imu.back().t < order.back().arrival)
    throw std::runtime_error("run: IMU stream ends before the last scan; the spline cannot cover it");

  const double lookahead = 4.0 / data.imu_rate + 1e-9;
  std::size_t next_imu = 0;
  auto feed_until = [&](double t) {
    while (next_imu < data.imu.size() && data.imu[next_imu].t <= t) odo.add_imu(data.imu[next_imu++]);
  };

  for (const Pending& p : order) {
    feed_until(p.arrival);
    odo.add_scan(data.scans[p.lidar][p.index]);
    while (const auto t = odo.next_frame_time()) {
      feed_until(*t + lookahead);
      if (odo.process_ready() == 0) break;
    }
  }
  feed_until(std::numeric_limits<double>::infinity());
  odo.process_ready();

  return {odo.trajectory(), odo.frames(), odo.map()};
}

std::string frames_to_json(const std::vector<FrameStats>& frames) {
  nlohmann::json out = nlohmann::json::array();
  for (const FrameStats& f : frames) {
    nlohmann::json stages = nlohmann::json::object();
    for (const char* name : kStageNames) stages[name] = f.stage_ms.at(name);
    out.push_back({{"t", f.t},
                   {"reference_lidar", f.reference_lidar},
                   {"raw_points", f.raw_points},
                   {"used_points", f.used_points},
                   {"residuals", f.residuals},
                   {"normal_spread", f.normal_spread},
                   {"w_l", f.w_l},
                   {"iterations", f.iterations},
                   {"converged", f.converged},
                   {"cov_min_eigenvalue", f.cov_min_eigenvalue},
                   {"updated", f.updated},
                   {"map_size", f.map_size},
                   {"stages_ms", stages},
                   {"total_ms", f.total_ms}});
  }
  return out.dump(2);
}

}  // namespace mlio
