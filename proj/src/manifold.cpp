#include "rio/manifold.hpp"

#include <cmath>

namespace rio {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}

Rotation Rotation::from_matrix(const Mat3& m) { return Rotation(Eigen::Quaterniond(m)); }

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }

Rotation so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < kSmallAngle) {
    // Second-order series of (cos(t/2), sin(t/2)/t * phi).
    const double theta2 = theta * theta;
    const Vec3 xyz = 0.5 * (1.0 - theta2 / 24.0) * phi;
    return Rotation(Eigen::Quaterniond(1.0 - theta2 / 8.0, xyz.x(), xyz.y(), xyz.z()));
  }
  const double half = 0.5 * theta;
  const Vec3 xyz = std::sin(half) / theta * phi;
  return Rotation(Eigen::Quaterniond(std::cos(half), xyz.x(), xyz.y(), xyz.z()));
}

Vec3 so3_log(const Rotation& r) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 xyz = q.vec();
  const double s = xyz.norm();
  if (s < 0.5 * kSmallAngle) {
    // theta ~ 2 s; series of 2 atan2(s, w) / s.
    const double w = q.w();
    return (2.0 / w) * (1.0 - s * s / (3.0 * w * w)) * xyz;
  }
  return 2.0 * std::atan2(s, q.w()) / s * xyz;
}

Mat3 so3_right_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) return Mat3::Identity() - 0.5 * k + k * k / 6.0;
  const double t2 = theta * theta;
  return Mat3::Identity() - (1.0 - std::cos(theta)) / t2 * k +
         (theta - std::sin(theta)) / (t2 * theta) * k * k;
}

Mat3 so3_right_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) return Mat3::Identity() + 0.5 * k + k * k / 12.0;
  const double t2 = theta * theta;
  return Mat3::Identity() + 0.5 * k +
         (1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta))) * k * k;
}

Bearing::Bearing(const Vec3& v) : v_(v.normalized()) {}

Mat32 tangent_basis(const Bearing& omega) {
  const Vec3& w = omega.vector();
  Mat32 n;
  if ((w + Vec3::UnitZ()).norm() < kAntipodalTolerance) {
    n.col(0) = Vec3::UnitX();
    n.col(1) = -Vec3::UnitY();
    return n;
  }
  // Minimal rotation e3 -> w: R = I + K + K^2 / (1 + c), K = skew(e3 x w), c = w.z.
  // 1 + c is rewritten as (wx^2 + wy^2) / (1 - c) on the lower hemisphere to
  // keep precision near the antipode.
  const double xy2 = w.x() * w.x() + w.y() * w.y();
  const double one_plus_c = w.z() >= 0.0 ? 1.0 + w.z() : xy2 / (1.0 - w.z());
  const Vec3 axis(-w.y(), w.x(), 0.0);
  const Mat3 k = skew(axis);
  const Mat3 r = Mat3::Identity() + k + k * k / one_plus_c;
  n.col(0) = r.col(0).normalized();
  n.col(1) = r.col(1).normalized();
  return n;
}

Bearing boxplus(const Bearing& omega, const Vec2& delta) {
  if (delta.isZero(0.0)) return omega;
  const Vec3 axis = tangent_basis(omega) * delta;
  return Bearing(so3_exp(axis) * omega.vector());
}

}  // namespace rio
