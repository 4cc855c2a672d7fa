#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rio/factors.hpp"
#include "rio/radar_model.hpp"
#include "rio/trajectory.hpp"

namespace rio {

/// Ingestion or output failure. Messages carry the path and, for malformed
/// rows, the 1-based line number.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kRadarCsvHeader = "t,r,theta,phi,doppler";
inline constexpr const char* kImuCsvHeader = "t,wx,wy,wz,ax,ay,az";

/// Rows sharing a timestamp form one scan. Scan timestamps must increase.
std::vector<RadarScan> read_radar_csv(const std::filesystem::path& path);
void write_radar_csv(const std::filesystem::path& path, const std::vector<RadarScan>& scans);

std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);
void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuSample>& samples);

/// `t x y z qx qy qz qw`, 9 significant digits.
std::string format_tum_line(const StampedPose& pose);
void write_tum(std::ostream& out, const Trajectory& trajectory);
void write_tum(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_tum(const std::filesystem::path& path);

}  // namespace rio
