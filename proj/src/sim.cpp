#include "mlio/sim.hpp"

#include <cmath>
#include <json.hpp>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mlio::sim {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

Mat3 rot_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

// Quintic smoothstep S(x) = 6x^5 - 15x^4 + 10x^3, its integral and derivative.
struct Ramp {
  double s, ds, integral;
};

Ramp ramp(double x) {
  if (x <= 0.0) return {0.0, 0.0, 0.0};
  if (x >= 1.0) return {1.0, 0.0, 0.5 + (x - 1.0)};
  const double x2 = x * x, x3 = x2 * x;
  return {x3 * (6.0 * x2 - 15.0 * x + 10.0), 30.0 * x2 * (x - 1.0) * (x - 1.0), x3 * x * (x2 - 3.0 * x + 2.5)};
}

struct Progress {
  double u, du, ddu;
  double fade, dfade;  // roll/pitch envelope
};

Progress progress_at(const TrajectorySpec& s, double t) {
  if (!(s.ramp > 0.0)) throw std::invalid_argument("trajectory: ramp must be positive");
  const double x = (t - s.t_still) / s.ramp;
  const Ramp r = ramp(x);
  return {s.speed * s.ramp * r.integral, s.speed * r.s, s.speed * r.ds / s.ramp, r.s, r.ds / s.ramp};
}

// Path offset and its first two derivatives with respect to progress.
struct PathPoint {
  Vec3 p, dp, ddp;
};

PathPoint path_point(const TrajectorySpec& s, double u) {
  const double k1 = 2.0 * kPi / s.lateral_wavelength, k2 = 2.0 * kPi / s.lateral_wavelength2;
  const double kz = 2.0 * kPi / s.vertical_wavelength;
  const double a1 = s.lateral_amp, a2 = s.lateral_amp2, az = s.vertical_amp;
  PathPoint out;
  out.p = Vec3(u, a1 * std::sin(k1 * u) + a2 * std::sin(k2 * u), az * std::sin(kz * u));
  out.dp = Vec3(1.0, a1 * k1 * std::cos(k1 * u) + a2 * k2 * std::cos(k2 * u), az * kz * std::cos(kz * u));
  out.ddp = Vec3(0.0, -a1 * k1 * k1 * std::sin(k1 * u) - a2 * k2 * k2 * std::sin(k2 * u),
                 -az * kz * kz * std::sin(kz * u));
  return out;
}

// Horizontal unit tangent and left normal of the path at progress u (world frame).
std::pair<Vec3, Vec3> path_frame(const TrajectorySpec& s, double u) {
  const Mat3 r0 = rot_zyx(s.start_yaw, 0.0, 0.0);
  Vec3 d = r0 * path_point(s, u).dp;
  d.z() = 0.0;
  d.normalize();
  return {d, Vec3(-d.y(), d.x(), 0.0)};
}

Vec3 path_position(const TrajectorySpec& s, double u) {
  return s.start_position + rot_zyx(s.start_yaw, 0.0, 0.0) * path_point(s, u).p;
}

void add_box(std::vector<Rect>& w, const Vec3& c, const Vec3& half) {
  w.push_back({c + Vec3(half.x(), 0, 0), Vec3::UnitY(), Vec3::UnitZ(), half.y(), half.z()});
  w.push_back({c - Vec3(half.x(), 0, 0), Vec3::UnitY(), Vec3::UnitZ(), half.y(), half.z()});
  w.push_back({c + Vec3(0, half.y(), 0), Vec3::UnitX(), Vec3::UnitZ(), half.x(), half.z()});
  w.push_back({c - Vec3(0, half.y(), 0), Vec3::UnitX(), Vec3::UnitZ(), half.x(), half.z()});
  w.push_back({c + Vec3(0, 0, half.z()), Vec3::UnitX(), Vec3::UnitY(), half.x(), half.y()});
}

// Rectangle spanning the segment a-b horizontally and [0, h] vertically.
Rect wall(const Vec3& a, const Vec3& b, double h) {
  Vec3 a0(a.x(), a.y(), 0.0), b0(b.x(), b.y(), 0.0);
  const double len = (b0 - a0).norm();
  return {0.5 * (a0 + b0) + Vec3(0, 0, 0.5 * h), (b0 - a0) / len, Vec3::UnitZ(), 0.5 * len + 0.01, 0.5 * h};
}

void corridor_world(const Scenario& sc, std::vector<Rect>& w) {
  const TrajectorySpec& t = sc.trajectory;
  const WorldSpec& ws = sc.world;
  const double hw = ws.half_width, h = ws.height;
  const int n = static_cast<int>(std::ceil((ws.end - ws.begin) / ws.segment));
  for (int i = 0; i < n; ++i) {
    const double ua = ws.begin + i * ws.segment, ub = std::min(ws.end, ua + ws.segment);
    const auto [ta, na] = path_frame(t, ua);
    const auto [tb, nb] = path_frame(t, ub);
    const Vec3 pa = path_position(t, ua), pb = path_position(t, ub);
    w.push_back(wall(pa + hw * na, pb + hw * nb, h));
    w.push_back(wall(pa - hw * na, pb - hw * nb, h));
  }
  if (ws.fin_spacing > 0.0) {
    int side = 1;
    for (double u = ws.begin + ws.fin_spacing; u < ws.end; u += ws.fin_spacing, side = -side) {
      const auto [tan, nrm] = path_frame(t, u);
      const Vec3 p = path_position(t, u);
      const Vec3 c = Vec3(p.x(), p.y(), 0.5 * h) + side * (hw - 0.5 * ws.fin_depth) * nrm;
      w.push_back({c, nrm, Vec3::UnitZ(), 0.5 * ws.fin_depth, 0.5 * h});
    }
  }
  for (double u : {ws.begin, ws.end}) {
    const auto [tan, nrm] = path_frame(t, u);
    const Vec3 p = path_position(t, u);
    w.push_back({Vec3(p.x(), p.y(), 0.5 * h), nrm, Vec3::UnitZ(), hw + 0.05, 0.5 * h});
  }
  // Floor and ceiling as single slabs over the corridor's extent.
  Vec3 lo = Vec3::Constant(INFINITY), hi = Vec3::Constant(-INFINITY);
  for (double u = ws.begin; u <= ws.end; u += ws.segment) {
    lo = lo.cwiseMin(path_position(t, u));
    hi = hi.cwiseMax(path_position(t, u));
  }
  const Vec3 mid = 0.5 * (lo + hi);
  const double ex = 0.5 * (hi.x() - lo.x()) + hw + 1.0, ey = 0.5 * (hi.y() - lo.y()) + hw + 1.0;
  w.push_back({Vec3(mid.x(), mid.y(), 0.0), Vec3::UnitX(), Vec3::UnitY(), ex, ey});
  w.push_back({Vec3(mid.x(), mid.y(), h), Vec3::UnitX(), Vec3::UnitY(), ex, ey});
}

void tunnel_world(const Scenario& sc, std::vector<Rect>& w) {
  const WorldSpec& ws = sc.world;
  const Vec3 o = sc.trajectory.start_position;
  const double hw = ws.half_width, h = ws.height;
  const double x0 = o.x() + ws.tunnel_begin, x1 = o.x() + ws.tunnel_end;
  w.push_back(wall(Vec3(x0, o.y() + hw, 0), Vec3(x1, o.y() + hw, 0), h));
  w.push_back(wall(Vec3(x0, o.y() - hw, 0), Vec3(x1, o.y() - hw, 0), h));
  if (!ws.degenerate && ws.fin_spacing > 0.0) {
    int side = 1;
    for (double x = x0 + ws.fin_spacing; x < x1; x += ws.fin_spacing, side = -side)
      w.push_back({Vec3(x, o.y() + side * (hw - 0.5 * ws.fin_depth), 0.5 * h), Vec3::UnitY(), Vec3::UnitZ(),
                   0.5 * ws.fin_depth, 0.5 * h});
  }
  // Scattered boxes in the open areas before and after the tunnel.
  const double before[][3] = {{-7, 4, 1.0}, {-3, -5, 0.8}, {1, 4.5, 1.2}, {4, -4, 0.7}, {-9, -3, 1.0}, {6, 6, 1.0}};
  for (const auto& b : before) add_box(w, Vec3(o.x() + b[0], o.y() + b[1], b[2]), Vec3(0.8, 0.6, b[2]));
  const double after[][3] = {{6, 4, 1.0}, {9, -5, 0.8}, {13, 4.5, 1.2}, {16, -3.5, 0.9}, {20, 0.5, 1.0}, {24, 5, 1}};
  for (const auto& b : after) add_box(w, Vec3(x1 + b[0], o.y() + b[1], b[2]), Vec3(0.8, 0.6, b[2]));
  const double len = ws.end - ws.begin;
  w.push_back({Vec3(o.x() + ws.begin + 0.5 * len, o.y(), 0.0), Vec3::UnitX(), Vec3::UnitY(), 0.5 * len, 20.0});
}

void box_world(const Scenario& sc, std::vector<Rect>& w) {
  const Vec3 o = sc.trajectory.start_position;
  const double h = sc.world.height, hx = 6.0, hy = 5.0;
  w.push_back({Vec3(o.x(), o.y(), 0.0), Vec3::UnitX(), Vec3::UnitY(), hx, hy});
  w.push_back({Vec3(o.x(), o.y(), h), Vec3::UnitX(), Vec3::UnitY(), hx, hy});
  w.push_back({Vec3(o.x() + hx, o.y(), 0.5 * h), Vec3::UnitY(), Vec3::UnitZ(), hy, 0.5 * h});
  w.push_back({Vec3(o.x() - hx, o.y(), 0.5 * h), Vec3::UnitY(), Vec3::UnitZ(), hy, 0.5 * h});
  w.push_back({Vec3(o.x(), o.y() + hy, 0.5 * h), Vec3::UnitX(), Vec3::UnitZ(), hx, 0.5 * h});
  w.push_back({Vec3(o.x(), o.y() - hy, 0.5 * h), Vec3::UnitX(), Vec3::UnitZ(), hx, 0.5 * h});
  add_box(w, Vec3(o.x() + 3.0, o.y() + 2.0, 0.6), Vec3(0.6, 0.8, 0.6));
  add_box(w, Vec3(o.x() - 2.5, o.y() - 2.0, 0.9), Vec3(0.9, 0.5, 0.9));
  add_box(w, Vec3(o.x() + 1.0, o.y() - 3.5, 0.4), Vec3(1.2, 0.4, 0.4));
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

// ---- JSON -------------------------------------------------------------------------------

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw std::runtime_error("scenario: expected a 3-vector");
  return Vec3(v[0], v[1], v[2]);
}

json pose_to(const Pose3& p) {
  const Eigen::Quaterniond q = p.rotation.to_quaternion();
  return {{"translation", vec_json(p.translation)}, {"quaternion_wxyz", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose3 pose_from(const json& j) {
  const auto q = j.at("quaternion_wxyz").get<std::vector<double>>();
  if (q.size() != 4) throw std::runtime_error("scenario: quaternion needs 4 values");
  return Pose3(Rot3::from_quaternion(Eigen::Quaterniond(q[0], q[1], q[2], q[3])), vec_from(j.at("translation")));
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void read(const json& j, const char* key, Vec3& field) {
  if (j.contains(key)) field = vec_from(j.at(key));
}

}  // namespace

// ---- trajectory -------------------------------------------------------------------------

double AnalyticTrajectory::progress(double t) const {
  if (spec_.kind == "stationary") return 0.0;
  if (spec_.kind == "circle") return std::abs(spec_.radius * spec_.yaw_rate * t);
  return progress_at(spec_, t).u;
}

MotionSample AnalyticTrajectory::at(double t) const {
  const TrajectorySpec& s = spec_;
  MotionSample m;
  if (s.kind == "stationary") {
    m.pose = Pose3(Rot3(rot_zyx(s.start_yaw, 0.0, 0.0)), s.start_position);
    return m;
  }
  if (s.kind == "circle") {
    const double w = s.yaw_rate, th = w * t + s.start_yaw;
    const Vec3 center = s.start_position - s.radius * Vec3(std::cos(s.start_yaw), std::sin(s.start_yaw), 0.0);
    const Vec3 radial(std::cos(th), std::sin(th), 0.0), tangential(-std::sin(th), std::cos(th), 0.0);
    m.pose = Pose3(Rot3(rot_zyx(th + (w >= 0.0 ? 0.5 : -0.5) * kPi, 0.0, 0.0)), center + s.radius * radial);
    m.velocity = s.radius * w * tangential;
    m.acceleration = -s.radius * w * w * radial;
    m.body_rate = Vec3(0.0, 0.0, w);
    return m;
  }
  if (s.kind != "path") throw std::invalid_argument("trajectory: unknown kind " + s.kind);

  const Progress pr = progress_at(s, t);
  const PathPoint pp = path_point(s, pr.u);
  const Mat3 r0 = rot_zyx(s.start_yaw, 0.0, 0.0);
  const Vec3 dp = r0 * pp.dp, ddp = r0 * pp.ddp;
  m.velocity = dp * pr.du;
  m.acceleration = ddp * pr.du * pr.du + dp * pr.ddu;

  // Heading along the horizontal tangent.
  const double hx = dp.x(), hy = dp.y(), h2 = hx * hx + hy * hy;
  const double yaw = std::atan2(hy, hx);
  const double dyaw = (hx * ddp.y() - hy * ddp.x()) / h2 * pr.du;

  const double wr = 2.0 * kPi * s.roll_freq, wp = 2.0 * kPi * s.pitch_freq;
  const double roll = s.roll_amp * pr.fade * std::sin(wr * t);
  const double droll = s.roll_amp * (pr.dfade * std::sin(wr * t) + pr.fade * wr * std::cos(wr * t));
  const double pitch = s.pitch_amp * pr.fade * std::sin(wp * t);
  const double dpitch = s.pitch_amp * (pr.dfade * std::sin(wp * t) + pr.fade * wp * std::cos(wp * t));

  m.pose = Pose3(Rot3(rot_zyx(yaw, pitch, roll)), s.start_position + r0 * pp.p);
  const double sr = std::sin(roll), cr = std::cos(roll), sp = std::sin(pitch), cp = std::cos(pitch);
  m.body_rate = Vec3(droll - dyaw * sp, dpitch * cr + dyaw * sr * cp, -dpitch * sr + dyaw * cr * cp);
  return m;
}

// ---- world ------------------------------------------------------------------------------

std::vector<Rect> build_world(const Scenario& s) {
  std::vector<Rect> w;
  const std::string& kind = s.world.kind;
  if (kind == "corridor") {
    corridor_world(s, w);
  } else if (kind == "tunnel") {
    tunnel_world(s, w);
  } else if (kind == "box") {
    box_world(s, w);
  } else if (kind != "none") {
    throw std::invalid_argument("world: unknown kind " + kind);
  }
  w.insert(w.end(), s.world.extra.begin(), s.world.extra.end());
  return w;
}

std::optional<double> ray_cast(const std::vector<Rect>& world, const Vec3& origin, const Vec3& dir, double min_range,
                               double max_range) {
  double best = max_range;
  bool hit = false;
  for (const Rect& r : world) {
    const Vec3 n = r.u.cross(r.v);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double s = n.dot(r.center - origin) / denom;
    if (s < min_range || s > best) continue;
    const Vec3 d = origin + s * dir - r.center;
    if (std::abs(d.dot(r.u)) > r.half_u || std::abs(d.dot(r.v)) > r.half_v) continue;
    best = s;
    hit = true;
  }
  if (!hit) return std::nullopt;
  return best;
}

// ---- sensors ----------------------------------------------------------------------------

std::vector<ImuSample> synth_imu(const Scenario& s) {
  const AnalyticTrajectory traj(s.trajectory);
  const double dt = 1.0 / s.imu.rate;
  const auto n = static_cast<long>(std::floor(s.duration * s.imu.rate + 1e-9));
  auto rng = stream_rng(s.seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise3 = [&](double sigma) { return Vec3(sigma * gauss(rng), sigma * gauss(rng), sigma * gauss(rng)); };

  const NoiseParams& np = s.imu.noise;
  const double sg = np.gyro * std::sqrt(s.imu.rate), sa = np.acc * std::sqrt(s.imu.rate);
  const double sbg = np.gyro_bias_walk * std::sqrt(dt), sba = np.acc_bias_walk * std::sqrt(dt);
  Vec3 bg = s.imu.bias_gyro, ba = s.imu.bias_acc;

  std::vector<ImuSample> out;
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const MotionSample m = traj.at(t);
    ImuSample u;
    u.t = t;
    u.gyro = m.body_rate + bg;
    u.acc = m.pose.rotation.matrix().transpose() * (m.acceleration - s.gravity) + ba;
    if (s.imu.add_noise) {
      u.gyro += noise3(sg);
      u.acc += noise3(sa);
      bg += noise3(sbg);
      ba += noise3(sba);
    }
    out.push_back(u);
  }
  return out;
}

namespace {

// Unit firing directions in the sensor frame for one scan, plus the firing time fraction.
struct Firing {
  double frac;
  Vec3 dir;
};

std::vector<Firing> scan_pattern(const LidarSpec& l, long scan_index) {
  std::vector<Firing> out;
  if (l.pattern == "spinning") {
    const int n_az = static_cast<int>(std::lround(360.0 / l.azimuth_step_deg));
    for (int a = 0; a < n_az; ++a) {
      const double az = -kPi + (a + 0.5) * l.azimuth_step_deg * kDeg;
      const double frac = (a + 0.5) / n_az;
      for (int b = 0; b < l.beams; ++b) {
        const double el = l.beams == 1 ? 0.0 : (-0.5 + static_cast<double>(b) / (l.beams - 1)) * l.vfov_deg * kDeg;
        out.push_back({frac, Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el))});
      }
    }
  } else if (l.pattern == "raster") {
    // Rose curve r = |sin(k phi)| whose petals precess between scans (k and the angular
    // step are incommensurate), so coverage never repeats.
    const double half = 0.5 * l.fov_deg * kDeg;
    for (int i = 0; i < l.points_per_scan; ++i) {
      const double g = static_cast<double>(scan_index) * l.points_per_scan + i;
      const double phi = 2.0 * kPi * g / 317.3;
      const double r = half * std::abs(std::sin(5.17 * phi));
      out.push_back({(i + 0.5) / l.points_per_scan,
                     Vec3(std::cos(r), std::sin(r) * std::cos(phi), std::sin(r) * std::sin(phi))});
    }
  } else {
    throw std::invalid_argument("lidar: unknown pattern " + l.pattern);
  }
  return out;
}

}  // namespace

std::vector<std::vector<LidarScan>> synth_scans(const Scenario& s) {
  const AnalyticTrajectory traj(s.trajectory);
  const std::vector<Rect> world = build_world(s);
  std::vector<std::vector<LidarScan>> out;
  for (std::size_t li = 0; li < s.lidars.size(); ++li) {
    const LidarSpec& l = s.lidars[li];
    auto rng = stream_rng(s.seed, 1000 + li);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double period = 1.0 / l.rate;
    std::vector<LidarScan> scans;
    for (long j = 0;; ++j) {
      const double start = l.phase + static_cast<double>(j) * period;
      if (start + period > s.duration) break;
      LidarScan scan{l.id, {}};
      double last_frac = -1.0;
      Pose3 sensor;
      for (const Firing& f : scan_pattern(l, j)) {
        const double t = start + f.frac * period;
        if (f.frac != last_frac) {
          sensor = traj.pose(t) * l.extrinsic;
          last_frac = f.frac;
        }
        const Vec3 dir_w = sensor.rotation * f.dir;
        const auto hit = ray_cast(world, sensor.translation, dir_w, l.min_range, l.max_range);
        if (!hit) continue;
        const double range = *hit + l.range_noise * gauss(rng);
        scan.points.push_back({range * f.dir, t, l.id});
      }
      if (!scan.points.empty()) scans.push_back(std::move(scan));
    }
    out.push_back(std::move(scans));
  }
  return out;
}

Trajectory synth_truth(const Scenario& s) {
  const AnalyticTrajectory traj(s.trajectory);
  Trajectory out;
  const auto n = static_cast<long>(std::floor(s.duration * s.truth_rate + 1e-9));
  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / s.truth_rate;
    out.push_back({t, traj.pose(t)});
  }
  return out;
}

Dataset simulate(const Scenario& s) {
  Dataset d;
  d.imu = synth_imu(s);
  d.imu_rate = s.imu.rate;
  d.imu_noise = s.imu.noise;
  d.scans = synth_scans(s);
  for (const LidarSpec& l : s.lidars) {
    LidarInfo info;
    info.id = l.id;
    info.extrinsic = l.extrinsic;
    info.pattern = l.pattern;
    info.fov_h_deg = l.pattern == "spinning" ? 360.0 : l.fov_deg;
    info.fov_v_deg = l.pattern == "spinning" ? l.vfov_deg : l.fov_deg;
    info.scan_period = 1.0 / l.rate;
    info.phase = l.phase;
    d.lidars.push_back(info);
  }
  d.truth = synth_truth(s);
  return d;
}

// ---- JSON -------------------------------------------------------------------------------

std::string scenario_to_json(const Scenario& s) {
  const TrajectorySpec& t = s.trajectory;
  const WorldSpec& w = s.world;
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["duration"] = s.duration;
  j["gravity"] = vec_json(s.gravity);
  j["truth_rate"] = s.truth_rate;
  j["trajectory"] = {{"kind", t.kind},
                     {"start_position", vec_json(t.start_position)},
                     {"start_yaw", t.start_yaw},
                     {"t_still", t.t_still},
                     {"ramp", t.ramp},
                     {"speed", t.speed},
                     {"lateral_amp", t.lateral_amp},
                     {"lateral_wavelength", t.lateral_wavelength},
                     {"lateral_amp2", t.lateral_amp2},
                     {"lateral_wavelength2", t.lateral_wavelength2},
                     {"vertical_amp", t.vertical_amp},
                     {"vertical_wavelength", t.vertical_wavelength},
                     {"roll_amp", t.roll_amp},
                     {"roll_freq", t.roll_freq},
                     {"pitch_amp", t.pitch_amp},
                     {"pitch_freq", t.pitch_freq},
                     {"radius", t.radius},
                     {"yaw_rate", t.yaw_rate}};
  json extra = json::array();
  for (const Rect& r : w.extra)
    extra.push_back({{"center", vec_json(r.center)},
                     {"u", vec_json(r.u)},
                     {"v", vec_json(r.v)},
                     {"half_u", r.half_u},
                     {"half_v", r.half_v}});
  j["world"] = {{"kind", w.kind},
                {"half_width", w.half_width},
                {"height", w.height},
                {"segment", w.segment},
                {"fin_spacing", w.fin_spacing},
                {"fin_depth", w.fin_depth},
                {"begin", w.begin},
                {"end", w.end},
                {"tunnel_begin", w.tunnel_begin},
                {"tunnel_end", w.tunnel_end},
                {"degenerate", w.degenerate},
                {"extra", extra}};
  j["imu"] = {{"rate", s.imu.rate},
              {"noise",
               {{"gyro", s.imu.noise.gyro},
                {"acc", s.imu.noise.acc},
                {"gyro_bias_walk", s.imu.noise.gyro_bias_walk},
                {"acc_bias_walk", s.imu.noise.acc_bias_walk}}},
              {"bias_gyro", vec_json(s.imu.bias_gyro)},
              {"bias_acc", vec_json(s.imu.bias_acc)},
              {"add_noise", s.imu.add_noise}};
  j["lidars"] = json::array();
  for (const LidarSpec& l : s.lidars)
    j["lidars"].push_back({{"id", l.id},
                           {"extrinsic", pose_to(l.extrinsic)},
                           {"pattern", l.pattern},
                           {"rate", l.rate},
                           {"phase", l.phase},
                           {"range_noise", l.range_noise},
                           {"min_range", l.min_range},
                           {"max_range", l.max_range},
                           {"beams", l.beams},
                           {"vfov_deg", l.vfov_deg},
                           {"azimuth_step_deg", l.azimuth_step_deg},
                           {"fov_deg", l.fov_deg},
                           {"points_per_scan", l.points_per_scan}});
  return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
  Scenario s;
  try {
    const json j = json::parse(text);
    read(j, "name", s.name);
    read(j, "seed", s.seed);
    read(j, "duration", s.duration);
    read(j, "gravity", s.gravity);
    read(j, "truth_rate", s.truth_rate);
    if (j.contains("trajectory")) {
      const json& t = j["trajectory"];
      TrajectorySpec& ts = s.trajectory;
      read(t, "kind", ts.kind);
      read(t, "start_position", ts.start_position);
      read(t, "start_yaw", ts.start_yaw);
      read(t, "t_still", ts.t_still);
      read(t, "ramp", ts.ramp);
      read(t, "speed", ts.speed);
      read(t, "lateral_amp", ts.lateral_amp);
      read(t, "lateral_wavelength", ts.lateral_wavelength);
      read(t, "lateral_amp2", ts.lateral_amp2);
      read(t, "lateral_wavelength2", ts.lateral_wavelength2);
      read(t, "vertical_amp", ts.vertical_amp);
      read(t, "vertical_wavelength", ts.vertical_wavelength);
      read(t, "roll_amp", ts.roll_amp);
      read(t, "roll_freq", ts.roll_freq);
      read(t, "pitch_amp", ts.pitch_amp);
      read(t, "pitch_freq", ts.pitch_freq);
      read(t, "radius", ts.radius);
      read(t, "yaw_rate", ts.yaw_rate);
    }
    if (j.contains("world")) {
      const json& w = j["world"];
      WorldSpec& ws = s.world;
      read(w, "kind", ws.kind);
      read(w, "half_width", ws.half_width);
      read(w, "height", ws.height);
      read(w, "segment", ws.segment);
      read(w, "fin_spacing", ws.fin_spacing);
      read(w, "fin_depth", ws.fin_depth);
      read(w, "begin", ws.begin);
      read(w, "end", ws.end);
      read(w, "tunnel_begin", ws.tunnel_begin);
      read(w, "tunnel_end", ws.tunnel_end);
      read(w, "degenerate", ws.degenerate);
      if (w.contains("extra")) {
        for (const json& r : w["extra"]) {
          Rect rect;
          rect.center = vec_from(r.at("center"));
          rect.u = vec_from(r.at("u")).normalized();
          rect.v = vec_from(r.at("v")).normalized();
          rect.half_u = r.at("half_u");
          rect.half_v = r.at("half_v");
          ws.extra.push_back(rect);
        }
      }
    }
    if (j.contains("imu")) {
      const json& i = j["imu"];
      read(i, "rate", s.imu.rate);
      if (i.contains("noise")) {
        const json& n = i["noise"];
        read(n, "gyro", s.imu.noise.gyro);
        read(n, "acc", s.imu.noise.acc);
        read(n, "gyro_bias_walk", s.imu.noise.gyro_bias_walk);
        read(n, "acc_bias_walk", s.imu.noise.acc_bias_walk);
      }
      read(i, "bias_gyro", s.imu.bias_gyro);
      read(i, "bias_acc", s.imu.bias_acc);
      read(i, "add_noise", s.imu.add_noise);
    }
    if (j.contains("lidars")) {
      for (const json& l : j["lidars"]) {
        LidarSpec spec;
        read(l, "id", spec.id);
        if (l.contains("extrinsic")) spec.extrinsic = pose_from(l["extrinsic"]);
        read(l, "pattern", spec.pattern);
        read(l, "rate", spec.rate);
        read(l, "phase", spec.phase);
        read(l, "range_noise", spec.range_noise);
        read(l, "min_range", spec.min_range);
        read(l, "max_range", spec.max_range);
        read(l, "beams", spec.beams);
        read(l, "vfov_deg", spec.vfov_deg);
        read(l, "azimuth_step_deg", spec.azimuth_step_deg);
        read(l, "fov_deg", spec.fov_deg);
        read(l, "points_per_scan", spec.points_per_scan);
        s.lidars.push_back(spec);
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("scenario: ") + e.what());
  }

  if (!(s.duration > 0.0)) throw std::runtime_error("scenario: duration must be positive");
  if (!(s.imu.rate > 0.0) || !s.imu.noise.valid()) throw std::runtime_error("scenario: invalid imu spec");
  if (s.lidars.empty()) throw std::runtime_error("scenario: at least one lidar required");
  for (const LidarSpec& l : s.lidars) {
    if (!(l.rate > 0.0)) throw std::runtime_error("scenario: lidar rate must be positive");
    if (l.phase < 0.0 || l.phase >= 1.0 / l.rate) throw std::runtime_error("scenario: lidar phase outside one period");
    if (l.pattern != "spinning" && l.pattern != "raster") throw std::runtime_error("scenario: unknown pattern");
  }
  return s;
}

// ---- presets ----------------------------------------------------------------------------

LidarSpec spinning_lidar(int id, const Pose3& extrinsic, double phase) {
  LidarSpec l;
  l.id = id;
  l.extrinsic = extrinsic;
  l.pattern = "spinning";
  l.phase = phase;
  return l;
}

LidarSpec raster_lidar(int id, const Pose3& extrinsic, double phase) {
  LidarSpec l = spinning_lidar(id, extrinsic, phase);
  l.pattern = "raster";
  return l;
}

Scenario corridor(int num_lidars, bool zero_noise, std::uint64_t seed) {
  if (num_lidars < 1 || num_lidars > 3) throw std::invalid_argument("corridor: 1 to 3 lidars");
  Scenario s;
  s.name = "corridor" + std::to_string(num_lidars) + (zero_noise ? "_clean" : "");
  s.seed = seed;
  s.duration = 10.0;
  s.world.kind = "corridor";
  const std::vector<LidarSpec> rig = {
      spinning_lidar(0, Pose3(Rot3(), Vec3(0.0, 0.0, 0.3)), 0.0),
      raster_lidar(1, Pose3(Rot3(rot_zyx(45.0 * kDeg, 10.0 * kDeg, 0.0)), Vec3(0.3, 0.2, 0.1)), 0.035),
      raster_lidar(2, Pose3(Rot3(rot_zyx(-135.0 * kDeg, 10.0 * kDeg, 0.0)), Vec3(-0.3, -0.2, 0.1)), 0.05),
  };
  s.lidars.assign(rig.begin(), rig.begin() + num_lidars);
  if (zero_noise) {
    s.imu.add_noise = false;
    s.imu.bias_gyro.setZero();
    s.imu.bias_acc.setZero();
    for (LidarSpec& l : s.lidars) l.range_noise = 0.0;
  }
  return s;
}

Scenario tunnel(bool degenerate, std::uint64_t seed) {
  Scenario s;
  s.name = degenerate ? "tunnel" : "tunnel_finned";
  s.seed = seed;
  s.trajectory.lateral_amp = 0.0;
  s.trajectory.vertical_amp = 0.05;
  s.trajectory.speed = 4.0;
  s.world.kind = "tunnel";
  s.world.degenerate = degenerate;
  s.world.tunnel_begin = 12.0;
  s.world.tunnel_end = 55.0;
  s.world.begin = -15.0;
  s.world.end = 90.0;
  s.duration = 18.0;
  s.lidars = {spinning_lidar(0, Pose3(Rot3(), Vec3(0.0, 0.0, 0.3)), 0.0),
              raster_lidar(1, Pose3(Rot3(rot_zyx(0.0, 10.0 * kDeg, 0.0)), Vec3(0.3, 0.0, 0.1)), 0.04)};
  for (LidarSpec& l : s.lidars) l.max_range = 20.0;
  return s;
}

Scenario stationary(bool zero_noise, std::uint64_t seed) {
  Scenario s;
  s.name = "stationary";
  s.seed = seed;
  s.duration = 3.0;
  s.trajectory.kind = "stationary";
  s.world.kind = "box";
  s.lidars = {spinning_lidar(0, Pose3(Rot3(), Vec3(0.0, 0.0, 0.3)), 0.0)};
  if (zero_noise) {
    s.imu.add_noise = false;
    s.imu.bias_gyro.setZero();
    s.imu.bias_acc.setZero();
    for (LidarSpec& l : s.lidars) l.range_noise = 0.0;
  }
  return s;
}

}  // namespace mlio::sim
