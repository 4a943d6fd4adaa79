#include "mlio/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace mlio {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary scan files assume a little-endian host");

namespace {

struct File {
  std::FILE* f;
  File(const fs::path& p, const char* mode) : f(std::fopen(p.c_str(), mode)) {
    if (!f) throw std::runtime_error("cannot open " + p.string());
  }
  ~File() { std::fclose(f); }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

json pose_json(const Pose3& p) {
  const Eigen::Quaterniond q = p.rotation.to_quaternion();
  return {{"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"quaternion_wxyz", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose3 pose_from_json(const json& j) {
  const auto t = j.at("translation").get<std::vector<double>>();
  const auto q = j.at("quaternion_wxyz").get<std::vector<double>>();
  if (t.size() != 3 || q.size() != 4) throw std::runtime_error("manifest: malformed pose");
  return Pose3(Rot3::from_quaternion(Eigen::Quaterniond(q[0], q[1], q[2], q[3])), Vec3(t[0], t[1], t[2]));
}

// Parses one comma-separated line into exactly n doubles.
bool parse_row(const std::string& line, double* out, int n) {
  const char* p = line.data();
  const char* end = p + line.size();
  for (int i = 0; i < n; ++i) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    const auto [next, ec] = std::from_chars(p, end, out[i]);
    if (ec != std::errc()) return false;
    p = next;
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (i + 1 < n) {
      if (p >= end || *p != ',') return false;
      ++p;
    }
  }
  return p == end;
}

template <int N, typename F>
void read_csv(const fs::path& path, F&& row) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::size_t lineno = 0;
  double v[N];
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (lineno == 1 && line[0] == 't') continue;  // header
    if (!parse_row(line, v, N))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(N) +
                               " comma-separated numbers");
    row(v);
  }
}

std::vector<TimedPoint> read_points(const fs::path& path, bool binary, int id) {
  std::vector<TimedPoint> pts;
  if (binary) {
    File f(path, "rb");
    double rec[4];
    while (std::fread(rec, sizeof(double), 4, f.f) == 4) pts.push_back({Vec3(rec[1], rec[2], rec[3]), rec[0], id});
    if (!std::feof(f.f)) throw std::runtime_error(path.string() + ": read error");
  } else {
    read_csv<4>(path, [&](const double* v) { pts.push_back({Vec3(v[1], v[2], v[3]), v[0], id}); });
  }
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].t < pts[i - 1].t) throw std::runtime_error(path.string() + ": point timestamps go backwards");
  return pts;
}

}  // namespace

std::vector<LidarScan> split_scans(std::span<const TimedPoint> points, double period, double phase, int lidar_id) {
  if (!(period > 0.0)) throw std::invalid_argument("split_scans: period must be positive");
  std::vector<LidarScan> scans;
  long current = 0;
  for (const TimedPoint& p : points) {
    const long slot = static_cast<long>(std::floor((p.t - phase) / period));
    if (scans.empty() || slot != current) {
      scans.push_back(LidarScan{lidar_id, {}});
      current = slot;
    }
    scans.back().points.push_back(p);
    scans.back().points.back().lidar_id = lidar_id;
  }
  return scans;
}

void write_dataset(const fs::path& dir, const Dataset& data, PointFormat format) {
  fs::create_directories(dir);
  {
    File f(dir / "imu.csv", "w");
    std::fprintf(f.f, "t,wx,wy,wz,ax,ay,az\n");
    for (const ImuSample& u : data.imu)
      std::fprintf(f.f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", u.t, u.gyro.x(), u.gyro.y(), u.gyro.z(),
                   u.acc.x(), u.acc.y(), u.acc.z());
  }

  json manifest;
  manifest["format"] = format == PointFormat::Csv ? "csv" : "bin";
  manifest["imu"] = {{"file", "imu.csv"}, {"rate", data.imu_rate}};
  if (data.imu_noise) {
    const NoiseParams& n = *data.imu_noise;
    manifest["imu"]["noise"] = {{"gyro", n.gyro},
                                {"acc", n.acc},
                                {"gyro_bias_walk", n.gyro_bias_walk},
                                {"acc_bias_walk", n.acc_bias_walk}};
  }
  manifest["lidars"] = json::array();
  for (std::size_t i = 0; i < data.lidars.size(); ++i) {
    const LidarInfo& info = data.lidars[i];
    const std::string name = "lidar_" + std::to_string(info.id) + (format == PointFormat::Csv ? ".csv" : ".bin");
    File f(dir / name, format == PointFormat::Csv ? "w" : "wb");
    if (format == PointFormat::Csv) std::fprintf(f.f, "t,x,y,z\n");
    if (i < data.scans.size()) {
      for (const LidarScan& scan : data.scans[i]) {
        for (const TimedPoint& p : scan.points) {
          if (format == PointFormat::Csv) {
            std::fprintf(f.f, "%.17g,%.17g,%.17g,%.17g\n", p.t, p.xyz.x(), p.xyz.y(), p.xyz.z());
          } else {
            const double rec[4] = {p.t, p.xyz.x(), p.xyz.y(), p.xyz.z()};
            if (std::fwrite(rec, sizeof(double), 4, f.f) != 4) throw std::runtime_error("write failed: " + name);
          }
        }
      }
    }
    manifest["lidars"].push_back({{"id", info.id},
                                  {"file", name},
                                  {"extrinsic", pose_json(info.extrinsic)},
                                  {"pattern", info.pattern},
                                  {"fov_h_deg", info.fov_h_deg},
                                  {"fov_v_deg", info.fov_v_deg},
                                  {"scan_period", info.scan_period},
                                  {"phase", info.phase}});
  }
  if (!data.truth.empty()) {
    write_tum(dir / "truth.tum", data.truth);
    manifest["truth"] = "truth.tum";
  }
  std::ofstream m(dir / "manifest.json");
  if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
  m << manifest.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  json manifest;
  {
    std::ifstream m(dir / "manifest.json");
    if (!m) throw std::runtime_error("missing manifest.json in " + dir.string());
    try {
      manifest = json::parse(m);
    } catch (const json::exception& e) {
      throw std::runtime_error(std::string("manifest.json: ") + e.what());
    }
  }

  Dataset data;
  try {
    const bool binary = manifest.value("format", "csv") == "bin";
    const json& imu = manifest.at("imu");
    data.imu_rate = imu.value("rate", 200.0);
    if (imu.contains("noise")) {
      const json& n = imu["noise"];
      data.imu_noise = NoiseParams{n.at("gyro"), n.at("acc"), n.at("gyro_bias_walk"), n.at("acc_bias_walk")};
    }
    read_csv<7>(dir / imu.at("file").get<std::string>(), [&](const double* v) {
      if (!data.imu.empty() && !(v[0] > data.imu.back().t))
        throw std::runtime_error("imu stream: timestamps not strictly increasing");
      data.imu.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
    });

    for (const json& l : manifest.at("lidars")) {
      LidarInfo info;
      info.id = l.at("id");
      info.extrinsic = pose_from_json(l.at("extrinsic"));
      info.pattern = l.value("pattern", "spinning");
      info.fov_h_deg = l.value("fov_h_deg", 360.0);
      info.fov_v_deg = l.value("fov_v_deg", 30.0);
      info.scan_period = l.at("scan_period");
      info.phase = l.value("phase", 0.0);
      const auto pts = read_points(dir / l.at("file").get<std::string>(), binary, info.id);
      data.scans.push_back(split_scans(pts, info.scan_period, info.phase, info.id));
      data.lidars.push_back(info);
    }
    if (manifest.contains("truth")) data.truth = read_tum(dir / manifest["truth"].get<std::string>());
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("manifest.json: ") + e.what());
  }
  if (data.imu.empty()) throw std::runtime_error("dataset has no IMU samples");
  if (data.lidars.empty()) throw std::runtime_error("dataset declares no LiDARs");
  return data;
}

}  // namespace mlio
