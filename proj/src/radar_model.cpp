#include "rio/radar_model.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace rio {

bool PolarPoint::valid() const {
  return std::isfinite(range) && std::isfinite(azimuth) && std::isfinite(elevation) &&
         std::isfinite(doppler) && range > 0.0 && azimuth > -std::numbers::pi &&
         azimuth <= std::numbers::pi && std::abs(elevation) < 0.5 * std::numbers::pi;
}

bool FieldOfView::contains(const PolarPoint& p) const {
  return p.range >= min_range && p.range <= max_range && std::abs(p.azimuth) <= 0.5 * azimuth &&
         std::abs(p.elevation) <= 0.5 * elevation;
}

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull: return "full";
    case AblationMode::kNoRange: return "no-range";
    case AblationMode::kNoAngular: return "no-angular";
    case AblationMode::kNone: return "none";
  }
  return "full";
}

std::optional<AblationMode> parse_ablation_mode(std::string_view text) {
  for (auto mode : {AblationMode::kFull, AblationMode::kNoRange, AblationMode::kNoAngular,
                    AblationMode::kNone}) {
    if (text == to_string(mode)) return mode;
  }
  return std::nullopt;
}

Bearing bearing_of(double azimuth, double elevation) {
  const double ce = std::cos(elevation);
  return Bearing(Vec3(ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)));
}

Vec3 polar_to_cartesian(const PolarPoint& p) {
  return p.range * bearing_of(p.azimuth, p.elevation).vector();
}

PolarPoint cartesian_to_polar(const Vec3& x) {
  PolarPoint p;
  p.range = x.norm();
  p.azimuth = std::atan2(x.y(), x.x());
  if (p.azimuth == -std::numbers::pi) p.azimuth = std::numbers::pi;
  p.elevation = std::atan2(x.z(), std::hypot(x.x(), x.y()));
  return p;
}

Mat3 floor_eigenvalues(const Mat3& m, double floor) {
  const Mat3 sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  const Vec3 values = eig.eigenvalues();
  if (values.minCoeff() >= floor) return sym;
  const Mat3& v = eig.eigenvectors();
  const Mat3 clamped = v * values.cwiseMax(floor).asDiagonal() * v.transpose();
  return 0.5 * (clamped + clamped.transpose());
}

PointCovariance point_covariance(const PolarPoint& p, const NoiseParams& n) {
  const Bearing omega = bearing_of(p.azimuth, p.elevation);
  PointCovariance out;
  out.transport.col(0) = omega.vector();
  out.transport.rightCols<2>() = -p.range * skew(omega.vector()) * tangent_basis(omega);
  const Vec3 variances(n.sigma_range * n.sigma_range, n.sigma_azimuth * n.sigma_azimuth,
                       n.sigma_elevation * n.sigma_elevation);
  const Mat3 sigma = out.transport * variances.asDiagonal() * out.transport.transpose();
  out.covariance = floor_eigenvalues(sigma, kCovarianceEigenFloor);
  return out;
}

PointCovariance scale_covariance(const PointCovariance& sigma, double alpha) {
  PointCovariance out = sigma;
  out.covariance *= std::exp2(alpha);
  return out;
}

NoiseParams ablate(const NoiseParams& n, AblationMode mode) {
  NoiseParams out = n;
  if (mode == AblationMode::kNoRange || mode == AblationMode::kNone) {
    out.sigma_range = kAblationEpsilon;
  }
  if (mode == AblationMode::kNoAngular || mode == AblationMode::kNone) {
    out.sigma_azimuth = kAblationEpsilon;
    out.sigma_elevation = kAblationEpsilon;
  }
  return out;
}

PolarPoint sample_noisy_point(const PolarPoint& gt, const NoiseParams& n, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const Bearing omega = bearing_of(gt.azimuth, gt.elevation);
  for (;;) {
    const double range = gt.range + n.sigma_range * unit(rng);
    const double d_az = n.sigma_azimuth * unit(rng);
    const double d_el = n.sigma_elevation * unit(rng);
    // Non-positive ranges are redrawn.
    if (range <= 0.0) continue;
    const Bearing noisy = boxplus(omega, Vec2(d_az, d_el));
    PolarPoint out = cartesian_to_polar(range * noisy.vector());
    out.doppler = gt.doppler;
    return out;
  }
}

PolarPoint sample_noisy_point(const PolarPoint& gt, const NoiseParams& n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_noisy_point(gt, n, rng);
}

}  // namespace rio
