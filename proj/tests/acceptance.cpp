// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by name.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mlio/eval.hpp"
#include "mlio/odometry.hpp"
#include "mlio/sim.hpp"
#include "oracles.hpp"

namespace {

using namespace mlio;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Run {
  sim::Scenario scenario;
  Dataset data;
  RunResult result;
  AteResult ate;
  double seconds = 0.0;  // odometry only

  double mean_frame_ms() const {
    double total = 0.0;
    for (const FrameStats& f : result.frames) total += f.total_ms;
    return total / static_cast<double>(result.frames.size());
  }
};

// Simulated runs are shared between criteria.
class Runs {
public:
  const Run& get(const std::string& key, const std::function<sim::Scenario()>& make, Mode mode) {
    const std::string id = key + "/" + to_string(mode);
    auto it = runs_.find(id);
    if (it != runs_.end()) return it->second;
    Run r;
    r.scenario = make();
    auto ds = datasets_.find(key);
    if (ds == datasets_.end()) ds = datasets_.emplace(key, sim::simulate(r.scenario)).first;
    r.data = ds->second;
    RunConfig cfg;
    cfg.mode = mode;
    const auto t0 = Clock::now();
    r.result = run_odometry(r.data, cfg);
    r.seconds = seconds_since(t0);
    r.ate = ate(r.result.trajectory, r.data.truth);
    return runs_.emplace(id, std::move(r)).first->second;
  }

private:
  std::map<std::string, Dataset> datasets_;
  std::map<std::string, Run> runs_;
};

Runs runs;

const Run& corridor(int lidars, Mode mode = Mode::Full) {
  return runs.get("corridor" + std::to_string(lidars), [=] { return sim::corridor(lidars); }, mode);
}

Outcome lie_manifold() {
  const auto t0 = Clock::now();
  const test::RoundTripErrors rt = test::round_trip_errors(10000, 1);
  const test::JacobianErrors jac = test::jacobian_errors(100, 2);
  const double secs = seconds_since(t0);
  return {rt.max() < 1e-9 && jac.max() < 1e-5 && secs < 30.0,
          fmt("round trips max %.2e (so3 %.1e, se3 %.1e, state %.1e); Jacobians Fx %.1e Fw %.1e H %.1e J %.1e; %.1f s",
              rt.max(), rt.so3, rt.se3, rt.manifold, jac.fx, jac.fw, jac.h, jac.prior, secs)};
}

Outcome spline() {
  const double line = test::spline_constant_velocity_error(200, 3);
  const double e100 = test::spline_sinusoid_error(100.0);
  const double e200 = test::spline_sinusoid_error(200.0);
  const double factor = e100 / e200;
  const double cont = test::spline_continuity_error(200, 4);
  return {line < 1e-9 && factor >= 7.0 && cont < 1e-9,
          fmt("constant velocity %.1e; error %.2e at 100 Hz, %.2e at 200 Hz, factor %.2f (need >= 7); continuity %.1e",
              line, e100, e200, factor, cont)};
}

Outcome uncertainty() {
  const auto t0 = Clock::now();
  const double comp = test::compound_chain_mc_error(100000, 0.05, 5);
  const double point = test::point_covariance_mc_error(100000, 0.05, 6);
  const test::RangeAudit range = test::range_monotonicity_audit(100, 7);
  const int gap_bad = test::gap_monotonicity_violations(100, 8);
  const double secs = seconds_since(t0);
  std::string range_note;
  if (range.violations > 0)
    range_note = fmt(" (all at ranges <= %.2f m, within a %.2f m reference-to-source offset)", range.max_range,
                     range.lever_arm);
  return {comp < 0.10 && point < 0.10 && range.violations == 0 && gap_bad == 0 && secs < 120.0,
          fmt("compound %.1f%%, point %.1f%% of Monte-Carlo; monotonicity violations range %d/100%s, gap %d/100; %.1f s",
              100.0 * comp, 100.0 * point, range.violations, range_note.c_str(), gap_bad, secs)};
}

Outcome filter() {
  const double toy = test::linear_gaussian_error(20, 9);
  const Run& r = corridor(3);
  int frames = 0, rising = 0;
  double worst_rise = 0.0, min_eig = std::numeric_limits<double>::infinity();
  for (const FrameStats& f : r.result.frames) {
    min_eig = std::min(min_eig, f.cov_min_eigenvalue);
    if (!f.updated || frames >= 50) continue;
    ++frames;
    bool ok = true;
    for (std::size_t i = 1; i < f.objective.size(); ++i) {
      const double rise = f.objective[i] - f.objective[i - 1];
      worst_rise = std::max(worst_rise, rise / std::max(1.0, std::abs(f.objective[i - 1])));
      if (rise > 1e-12 * std::max(1.0, std::abs(f.objective[i - 1]))) ok = false;
    }
    if (!ok) ++rising;
  }
  return {toy < 1e-10 && frames == 50 && rising == 0 && min_eig >= -1e-9,
          fmt("linear-Gaussian gap %.1e; %d simulator frames, %d with a rising objective (worst %.1e); "
              "min posterior eigenvalue %.2e",
              toy, frames, rising, worst_rise, min_eig)};
}

Outcome map() {
  const int knn_bad = test::knn_mismatches(100000, 2000, 5, 10);
  const test::RebalanceAudit reb = test::rebalance_audit(10000, 1000, 11);

  // Gating sweep: traces straddling tau, plus the map of the closed-loop run.
  UncertainMap m;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(-20.0, 20.0), tr(0.0, 2.0);
  for (int i = 0; i < 50000; ++i) {
    MapPoint p;
    p.xyz = Vec3(pos(rng), pos(rng), pos(rng));
    p.cov = Mat3::Identity() * tr(rng) / 3.0;
    m.insert(p);
  }
  int over = 0;
  for (const MapPoint* p : m.points()) over += p->trace() >= m.params().tau;
  for (const MapPoint* p : corridor(3).result.map.points()) over += p->trace() >= m.params().tau;

  return {knn_bad == 0 && over == 0 && reb.mismatches == 0,
          fmt("kNN mismatches %d/2000 on 1e5 points; stored points with trace >= tau: %d; rebalance mismatches "
              "%d/1000 (depth %zu -> %zu for %zu points)",
              knn_bad, over, reb.mismatches, reb.depth_before, reb.depth_after, reb.size)};
}

Outcome closed_loop() {
  const Run& full = corridor(3);
  const Run& raw = corridor(3, Mode::Raw);
  const Run& clean = runs.get("corridor-clean", [] { return sim::corridor(3, true); }, Mode::Full);
  const double secs = full.seconds + raw.seconds + clean.seconds;
  return {full.ate.trans < 0.05 && full.ate.rot < 1.0 && full.ate.trans <= raw.ate.trans && clean.ate.trans < 5e-3 &&
              secs < 180.0,
          fmt("FULL %.4f m / %.3f deg, RAW %.4f m, zero-noise FULL %.4f m; %zu frames each; %.1f s", full.ate.trans,
              full.ate.rot, raw.ate.trans, clean.ate.trans, full.result.frames.size(), secs)};
}

Outcome degeneracy() {
  const Run& tun = runs.get("tunnel", [] { return sim::tunnel(true); }, Mode::Full);
  const Run& open = runs.get("tunnel-open", [] { return sim::tunnel(false); }, Mode::Full);
  const FicParams fic;
  const sim::AnalyticTrajectory traj(tun.scenario.trajectory);
  const double begin = tun.scenario.world.tunnel_begin, end = tun.scenario.world.tunnel_end;
  double inside_min = fic.l_max;
  std::vector<double> after;
  for (const FrameStats& f : tun.result.frames) {
    if (!f.updated) continue;
    const double u = traj.progress(f.t);
    if (u > begin && u < end) inside_min = std::min(inside_min, f.w_l);
    if (u > end + 5.0) after.push_back(f.w_l);
  }
  double after_median = 0.0;
  if (!after.empty()) {
    std::nth_element(after.begin(), after.begin() + static_cast<long>(after.size() / 2), after.end());
    after_median = after[after.size() / 2];
  }
  const double ratio = tun.ate.trans / open.ate.trans;
  return {inside_min == fic.l_min && after_median >= 1.5 * fic.l_min && ratio <= 10.0,
          fmt("w_l min inside %.3f (l_min %.2f), median after exit %.3f over %zu frames; ATE %.4f m vs finned %.4f m "
              "(x%.1f)",
              inside_min, fic.l_min, after_median, after.size(), tun.ate.trans, open.ate.trans, ratio)};
}

Outcome throughput() {
  const double t1 = corridor(1).mean_frame_ms();
  const double t2 = corridor(2).mean_frame_ms();
  const double t3 = corridor(3).mean_frame_ms();
  const auto frames = nlohmann::json::parse(frames_to_json(corridor(3).result.frames));
  bool stages = !frames.empty();
  for (const auto& f : frames)
    for (const char* name : kStageNames) stages = stages && f.at("stages_ms").contains(name);
  // Growth with the LiDAR count, and at most linear (3x at three LiDARs) with 20% headroom for timing noise.
  const bool trend = t2 >= 0.9 * t1 && t3 >= 0.9 * t2 && t3 / t1 <= 3.6;
  return {trend && stages, fmt("mean frame time %.1f / %.1f / %.1f ms for 1 / 2 / 3 LiDARs (x%.2f); six stages %s",
                               t1, t2, t3, t3 / t1, stages ? "present" : "missing")};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"lie-manifold", lie_manifold}, {"spline", spline},           {"uncertainty", uncertainty},
      {"filter", filter},             {"map", map},                 {"closed-loop", closed_loop},
      {"degeneracy", degeneracy},     {"throughput", throughput}};
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
