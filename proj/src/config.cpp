#include "mlio/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mlio {

using nlohmann::json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Raw: return "RAW";
    case Mode::Cnt: return "CNT";
    case Mode::FUnc: return "F-UNC";
    case Mode::Unc: return "UNC";
    case Mode::Full: return "FULL";
  }
  return "FULL";
}

Mode mode_from_string(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "RAW") return Mode::Raw;
  if (u == "CNT") return Mode::Cnt;
  if (u == "F-UNC" || u == "FUNC" || u == "F_UNC") return Mode::FUnc;
  if (u == "UNC") return Mode::Unc;
  if (u == "FULL") return Mode::Full;
  throw std::invalid_argument("unknown mode '" + s + "' (expected RAW, CNT, F-UNC, UNC or FULL)");
}

ModeSwitches switches(Mode m) {
  switch (m) {
    case Mode::Raw: return {Interpolation::Discrete, false, PointUncertainty::None};
    case Mode::Cnt: return {Interpolation::Spline, false, PointUncertainty::None};
    case Mode::FUnc: return {Interpolation::Discrete, true, PointUncertainty::EndOfScan};
    case Mode::Unc: return {Interpolation::Discrete, true, PointUncertainty::PerPoint};
    case Mode::Full: return {Interpolation::Spline, true, PointUncertainty::PerPoint};
  }
  return {Interpolation::Spline, true, PointUncertainty::PerPoint};
}

namespace {

template <typename F>
void visit_fields(RunConfig& c, F&& f) {
  f("s_min", c.fic.s_min);
  f("s_max", c.fic.s_max);
  f("r_min", c.fic.r_min);
  f("r_max", c.fic.r_max);
  f("l_min", c.fic.l_min);
  f("l_max", c.fic.l_max);
  f("b_min", c.fic.b_min);
  f("b_max", c.fic.b_max);
  f("tau", c.fic.tau);
  f("gyro_noise", c.noise.gyro);
  f("acc_noise", c.noise.acc);
  f("gyro_bias_walk", c.noise.gyro_bias_walk);
  f("acc_bias_walk", c.noise.acc_bias_walk);
  f("z_diag", c.z_diag);
  f("epsilon", c.epsilon);
  f("max_iter", c.max_iter);
  f("voxel", c.voxel);
  f("scan_voxel", c.scan_voxel);
  f("map_capacity", c.map_capacity);
  f("rebalance_alpha", c.rebalance_alpha);
  f("knn", c.knn);
  f("d_plane", c.d_plane);
  f("coarse_plane_residual", c.coarse_plane_residual);
  f("max_plane_residual", c.max_plane_residual);
  f("max_neighbor_dist", c.max_neighbor_dist);
  f("queue_capacity", c.queue_capacity);
  f("mode", c.mode);
  f("init_rot_sigma", c.init_rot_sigma);
  f("init_pos_sigma", c.init_pos_sigma);
  f("init_vel_sigma", c.init_vel_sigma);
  f("init_bias_gyro_sigma", c.init_bias_gyro_sigma);
  f("init_bias_acc_sigma", c.init_bias_acc_sigma);
  f("init_gravity_sigma", c.init_gravity_sigma);
  f("init_ext_rot_sigma", c.init_ext_rot_sigma);
  f("init_ext_pos_sigma", c.init_ext_pos_sigma);
  f("rte_delta", c.rte_delta);
}

json to_json_value(double v) { return v; }
json to_json_value(int v) { return v; }
json to_json_value(std::size_t v) { return v; }
json to_json_value(Mode m) { return to_string(m); }
json to_json_value(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

void from_json_value(const json& j, double& v) { v = j.get<double>(); }
void from_json_value(const json& j, int& v) { v = j.get<int>(); }
void from_json_value(const json& j, std::size_t& v) { v = j.get<std::size_t>(); }
void from_json_value(const json& j, Mode& m) { m = mode_from_string(j.get<std::string>()); }
void from_json_value(const json& j, Vec3& v) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != 3) throw std::runtime_error("expected 3 numbers");
  v = Vec3(a[0], a[1], a[2]);
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw std::runtime_error("not a number: '" + s + "'");
  return v;
}

void from_string_value(const std::string& s, double& v) { v = parse_number<double>(s); }
void from_string_value(const std::string& s, int& v) { v = parse_number<int>(s); }
void from_string_value(const std::string& s, std::size_t& v) { v = parse_number<std::size_t>(s); }
void from_string_value(const std::string& s, Mode& m) { m = mode_from_string(s); }
void from_string_value(const std::string& s, Vec3& v) {
  std::vector<double> a;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) a.push_back(parse_number<double>(item));
  if (a.size() == 1) a.assign(3, a[0]);
  if (a.size() != 3) throw std::runtime_error("expected 1 or 3 comma-separated numbers: '" + s + "'");
  v = Vec3(a[0], a[1], a[2]);
}

}  // namespace

std::string config_to_json(const RunConfig& c) {
  RunConfig copy = c;
  json j = json::object();
  visit_fields(copy, [&](const char* key, auto& field) { j[key] = to_json_value(field); });
  return j.dump(2);
}

RunConfig config_from_json(const std::string& text, RunConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config: top level must be an object");
  std::set<std::string> known;
  visit_fields(base, [&](const char* key, auto& field) {
    known.insert(key);
    if (!j.contains(key)) return;
    try {
      from_json_value(j.at(key), field);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("config: key '") + key + "': " + e.what());
    }
  });
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
  return base;
}

RunConfig apply_env_overrides(RunConfig c) {
  visit_fields(c, [&](const char* key, auto& field) {
    std::string name = "MLIO_";
    for (const char* p = key; *p; ++p) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    const char* value = std::getenv(name.c_str());
    if (!value) return;
    try {
      from_string_value(value, field);
    } catch (const std::exception& e) {
      throw std::runtime_error(name + ": " + e.what());
    }
  });
  return c;
}

void validate(const RunConfig& c) {
  if (!c.fic.valid()) throw std::invalid_argument("config: rescaling intervals need min < max and tau > 0");
  if (!c.noise.valid()) throw std::invalid_argument("config: noise densities must be non-negative");
  if (!(c.z_diag.array() > 0.0).all()) throw std::invalid_argument("config: z_diag must be positive");
  if (!(c.epsilon > 0.0) || c.max_iter < 1) throw std::invalid_argument("config: epsilon > 0 and max_iter >= 1");
  if (!(c.voxel > 0.0) || !(c.scan_voxel >= 0.0)) throw std::invalid_argument("config: voxel sizes");
  if (c.map_capacity < 1) throw std::invalid_argument("config: map_capacity >= 1");
  if (!(c.rebalance_alpha > 0.5 && c.rebalance_alpha < 1.0))
    throw std::invalid_argument("config: rebalance_alpha in (0.5, 1)");
  if (c.knn < 3) throw std::invalid_argument("config: knn >= 3");
  for (const double v : {c.d_plane, c.coarse_plane_residual, c.max_plane_residual, c.max_neighbor_dist})
    if (!(v > 0.0)) throw std::invalid_argument("config: plane association thresholds must be positive");
  if (c.queue_capacity < 1) throw std::invalid_argument("config: queue_capacity >= 1");
}

}  // namespace mlio
