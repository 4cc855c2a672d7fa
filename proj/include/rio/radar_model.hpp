#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "rio/manifold.hpp"

namespace rio {

/// One radar return. Azimuth is measured about +z from +x, elevation toward +z.
struct PolarPoint {
  double range = 1.0;      // m
  double azimuth = 0.0;    // rad, (-pi, pi]
  double elevation = 0.0;  // rad, (-pi/2, pi/2)
  double doppler = 0.0;    // m/s

  bool valid() const;
};

/// Standard deviations of the independent polar measurement noises.
struct NoiseParams {
  double sigma_range = 0.1;       // m
  double sigma_azimuth = 0.01;    // rad
  double sigma_elevation = 0.01;  // rad

  bool valid() const { return sigma_range > 0.0 && sigma_azimuth > 0.0 && sigma_elevation > 0.0; }
  bool operator==(const NoiseParams&) const = default;
};

/// Cartesian covariance of a radar point together with the matrix that
/// carries (range, azimuth, elevation) noise into Cartesian space.
struct PointCovariance {
  Mat3 covariance = Mat3::Identity();  // m^2
  Mat3 transport = Mat3::Identity();
};

struct RadarScan {
  double timestamp = 0.0;
  std::vector<PolarPoint> points;
  /// Ground-truth landmark id per point; only filled by the simulator.
  std::vector<std::int64_t> labels;
};

/// Sensor acceptance region. Angles are full widths.
struct FieldOfView {
  double azimuth = 2.0 * 1.0471975511965976;    // rad
  double elevation = 2.0 * 0.2617993877991494;  // rad
  double min_range = 0.5;                        // m
  double max_range = 25.0;                       // m

  bool contains(const PolarPoint& p) const;
  bool operator==(const FieldOfView&) const = default;
};

enum class AblationMode { kFull, kNoRange, kNoAngular, kNone };

std::string_view to_string(AblationMode mode);
std::optional<AblationMode> parse_ablation_mode(std::string_view text);

/// Smallest eigenvalue allowed in a point covariance (m^2).
inline constexpr double kCovarianceEigenFloor = 1e-8;
/// Value an ablated standard deviation collapses to (m or rad).
inline constexpr double kAblationEpsilon = 1e-4;

Bearing bearing_of(double azimuth, double elevation);

Vec3 polar_to_cartesian(const PolarPoint& p);

/// Inverse of polar_to_cartesian; doppler is left at zero.
PolarPoint cartesian_to_polar(const Vec3& x);

/// Sigma_k = A diag(sr^2, sa^2, se^2) A^T with A = [Omega, -r Omega^ N(Omega)],
/// eigenvalues clamped from below at kCovarianceEigenFloor.
PointCovariance point_covariance(const PolarPoint& p, const NoiseParams& n);

/// Multiplies the covariance by 2^alpha.
PointCovariance scale_covariance(const PointCovariance& sigma, double alpha);

NoiseParams ablate(const NoiseParams& n, AblationMode mode);

/// Clamps eigenvalues of a symmetric matrix from below.
Mat3 floor_eigenvalues(const Mat3& m, double floor);

/// Draws the measurement of `gt` under polar noise: r + dr and Omega boxplus dOmega.
/// The doppler of `gt` is carried through unchanged.
PolarPoint sample_noisy_point(const PolarPoint& gt, const NoiseParams& n, std::mt19937_64& rng);
PolarPoint sample_noisy_point(const PolarPoint& gt, const NoiseParams& n, std::uint64_t seed);

}  // namespace rio
