#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Below this angle exp/log switch to their Taylor series.
inline constexpr double kSmallAngle = 1e-6;

/// Within this distance of -e3 the minimal rotation e3 -> bearing is not unique.
inline constexpr double kAntipodalTolerance = 1e-9;

/// Cross-product matrix: skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Unit-quaternion rotation. Renormalized after every composition.
class Rotation {
 public:
  Rotation() = default;
  explicit Rotation(const Eigen::Quaterniond& q);
  static Rotation identity() { return Rotation(); }
  static Rotation from_matrix(const Mat3& m);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation inverse() const;

  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Rodrigues exponential of a rotation vector (rad).
Rotation so3_exp(const Vec3& phi);

/// Rotation vector with norm in [0, pi].
Vec3 so3_log(const Rotation& r);

/// Right Jacobian of SO(3) and its inverse.
Mat3 so3_right_jacobian(const Vec3& phi);
Mat3 so3_right_jacobian_inverse(const Vec3& phi);

/// Point on the unit sphere S2.
class Bearing {
 public:
  Bearing() = default;
  /// Normalizes its argument; v must be nonzero.
  explicit Bearing(const Vec3& v);

  const Vec3& vector() const { return v_; }
  double operator[](int i) const { return v_[i]; }

 private:
  Vec3 v_ = Vec3::UnitZ();
};

/// Orthonormal basis [N1 N2] of the tangent plane at `omega`.
///
/// N1 and N2 are e1 and e2 carried by the minimal rotation taking e3 onto
/// `omega`. At the antipode (-e3) that rotation is not unique and the fixed
/// basis N1 = (1,0,0), N2 = (0,-1,0) is returned.
Mat32 tangent_basis(const Bearing& omega);

/// S2 retraction: exp((N(omega) delta)^) * omega.
Bearing boxplus(const Bearing& omega, const Vec2& delta);

}  // namespace rio
