#include "rio/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rio {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open file for writing");
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

std::vector<double> parse_fields(const std::string& line, char sep, std::size_t expected,
                                 const std::filesystem::path& path, std::size_t number) {
  std::vector<double> values;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(sep, start);
    if (end == std::string::npos) end = line.size();
    std::string field = line.substr(start, end - start);
    const auto first = field.find_first_not_of(" \t");
    const auto last = field.find_last_not_of(" \t");
    field = first == std::string::npos ? "" : field.substr(first, last - first + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw IoError(where(path, number) + "malformed number '" + field + "'");
    }
    if (!std::isfinite(v)) throw IoError(where(path, number) + "non-finite value '" + field + "'");
    values.push_back(v);
    if (end == line.size()) break;
    start = end + 1;
  }
  if (values.size() != expected) {
    throw IoError(where(path, number) + "expected " + std::to_string(expected) + " fields, got " +
                  std::to_string(values.size()));
  }
  return values;
}

void read_header(std::istream& in, const char* header, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(where(path, 1) + "missing header '" + header + "'");
  strip_cr(line);
  if (line != header) {
    throw IoError(where(path, 1) + "bad header '" + line + "', expected '" + header + "'");
  }
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

constexpr const char* kExact = "%.17g";

}  // namespace

std::vector<RadarScan> read_radar_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  read_header(in, kRadarCsvHeader, path);
  std::vector<RadarScan> scans;
  std::string line;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    if (blank(line)) continue;
    const std::vector<double> f = parse_fields(line, ',', 5, path, number);
    PolarPoint p{f[1], f[2], f[3], f[4]};
    if (!(p.range > 0.0)) throw IoError(where(path, number) + "range must be positive");
    if (!p.valid()) throw IoError(where(path, number) + "angles out of range");
    const double t = f[0];
    if (!scans.empty() && t < scans.back().timestamp) {
      throw IoError(where(path, number) + "timestamp " + format(kExact, t) +
                    " is older than the previous row");
    }
    if (scans.empty() || t != scans.back().timestamp) {
      scans.emplace_back();
      scans.back().timestamp = t;
    }
    scans.back().points.push_back(p);
  }
  return scans;
}

void write_radar_csv(const std::filesystem::path& path, const std::vector<RadarScan>& scans) {
  std::ofstream out = open_output(path);
  out << kRadarCsvHeader << '\n';
  for (const RadarScan& s : scans) {
    for (const PolarPoint& p : s.points) {
      out << format(kExact, s.timestamp) << ',' << format(kExact, p.range) << ','
          << format(kExact, p.azimuth) << ',' << format(kExact, p.elevation) << ','
          << format(kExact, p.doppler) << '\n';
    }
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  read_header(in, kImuCsvHeader, path);
  std::vector<ImuSample> samples;
  std::string line;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    if (blank(line)) continue;
    const std::vector<double> f = parse_fields(line, ',', 7, path, number);
    ImuSample s;
    s.timestamp = f[0];
    s.gyro = Vec3(f[1], f[2], f[3]);
    s.accel = Vec3(f[4], f[5], f[6]);
    if (!samples.empty() && s.timestamp <= samples.back().timestamp) {
      throw IoError(where(path, number) + "timestamp " + format(kExact, s.timestamp) +
                    " is not newer than the previous row");
    }
    samples.push_back(s);
  }
  return samples;
}

void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuSample>& samples) {
  std::ofstream out = open_output(path);
  out << kImuCsvHeader << '\n';
  for (const ImuSample& s : samples) {
    out << format(kExact, s.timestamp);
    for (int k = 0; k < 3; ++k) out << ',' << format(kExact, s.gyro[k]);
    for (int k = 0; k < 3; ++k) out << ',' << format(kExact, s.accel[k]);
    out << '\n';
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string format_tum_line(const StampedPose& pose) {
  Eigen::Quaterniond q = pose.orientation.normalized();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  // Avoid printing "-0".
  const auto field = [](double v) { return format("%.9g", v == 0.0 ? 0.0 : v); };
  std::string line = format("%#.9g", pose.timestamp == 0.0 ? 0.0 : pose.timestamp);
  for (int k = 0; k < 3; ++k) line += ' ' + field(pose.position[k]);
  line += ' ' + field(q.x());
  line += ' ' + field(q.y());
  line += ' ' + field(q.z());
  line += ' ' + field(q.w());
  return line;
}

void write_tum(std::ostream& out, const Trajectory& trajectory) {
  for (const StampedPose& p : trajectory) out << format_tum_line(p) << '\n';
}

void write_tum(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out = open_output(path);
  write_tum(out, trajectory);
  if (!out) throw IoError(path.string() + ": write failed");
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Trajectory out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    if (blank(line) || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string token, joined;
    int count = 0;
    while (fields >> token) {
      joined += (count ? "," : "") + token;
      ++count;
    }
    const std::vector<double> f = parse_fields(joined, ',', 8, path, number);
    StampedPose p;
    p.timestamp = f[0];
    p.position = Eigen::Vector3d(f[1], f[2], f[3]);
    p.orientation = Eigen::Quaterniond(f[7], f[4], f[5], f[6]);
    const double norm = p.orientation.norm();
    if (std::abs(norm - 1.0) > 1e-6) {
      throw IoError(where(path, number) + "quaternion is not unit length");
    }
    p.orientation.normalize();
    if (!out.empty() && p.timestamp <= out.back().timestamp) {
      throw IoError(where(path, number) + "timestamps must be strictly increasing");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace rio
