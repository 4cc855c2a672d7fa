#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "rio/manifold.hpp"
#include "rio/radar_model.hpp"

namespace rio {

using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat3x15 = Eigen::Matrix<double, 3, 15>;
using Row15 = Eigen::Matrix<double, 1, 15>;

/// Tangent-space layout of a NavState perturbation.
/// Orientation is perturbed on the right: R <- R * exp(dtheta).
namespace state_index {
inline constexpr int kPosition = 0;
inline constexpr int kOrientation = 3;
inline constexpr int kVelocity = 6;
inline constexpr int kAccelBias = 9;
inline constexpr int kGyroBias = 12;
inline constexpr int kDim = 15;
}  // namespace state_index

struct NavState {
  double timestamp = 0.0;
  Vec3 position = Vec3::Zero();
  Rotation orientation;
  Vec3 velocity = Vec3::Zero();  // world frame
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
};

NavState retract(const NavState& x, const Vec15& delta);

/// Radar-to-IMU transform: p_imu = rotation * p_radar + translation.
struct Extrinsics {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
};

struct ImuSample {
  double timestamp = 0.0;
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2, specific force
};

/// Continuous-time noise densities.
struct ImuNoise {
  double gyro_noise_density = 2.4e-4;       // rad/s/sqrt(Hz)
  double accel_noise_density = 1.7e-3;      // m/s^2/sqrt(Hz)
  double gyro_bias_random_walk = 2.0e-5;    // rad/s^2/sqrt(Hz)
  double accel_bias_random_walk = 3.0e-4;   // m/s^3/sqrt(Hz)

  bool operator==(const ImuNoise&) const = default;
};

class EmptyIntervalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-manifold IMU preintegration with first-order bias correction.
/// Samples are zero-order held: a sample's value applies until the next one.
class PreintegratedImu {
 public:
  PreintegratedImu() = default;
  PreintegratedImu(const Vec3& accel_bias, const Vec3& gyro_bias, const ImuNoise& noise);

  void integrate(const Vec3& gyro, const Vec3& accel, double dt);

  double delta_time() const { return dt_; }
  const Vec3& delta_position() const { return dp_; }
  const Vec3& delta_velocity() const { return dv_; }
  const Rotation& delta_rotation() const { return dr_; }
  const Vec3& linearization_accel_bias() const { return ba_; }
  const Vec3& linearization_gyro_bias() const { return bg_; }

  /// Residual order [p, theta, v, ba, bg].
  const Mat15& covariance() const { return cov_; }

  const Mat3& dp_dba() const { return dp_dba_; }
  const Mat3& dp_dbg() const { return dp_dbg_; }
  const Mat3& dv_dba() const { return dv_dba_; }
  const Mat3& dv_dbg() const { return dv_dbg_; }
  const Mat3& dr_dbg() const { return dr_dbg_; }

 private:
  ImuNoise noise_;
  Vec3 ba_ = Vec3::Zero();
  Vec3 bg_ = Vec3::Zero();
  double dt_ = 0.0;
  Vec3 dp_ = Vec3::Zero();
  Vec3 dv_ = Vec3::Zero();
  Rotation dr_;
  Mat15 cov_ = Mat15::Zero();
  Mat3 dp_dba_ = Mat3::Zero();
  Mat3 dp_dbg_ = Mat3::Zero();
  Mat3 dv_dba_ = Mat3::Zero();
  Mat3 dv_dbg_ = Mat3::Zero();
  Mat3 dr_dbg_ = Mat3::Zero();
};

/// Integrates `samples` over [t0, t1]. A sample governs the interval up to the
/// next sample; the first sample is held backwards if it starts after t0.
/// Throws EmptyIntervalError if there are no samples or t1 <= t0.
PreintegratedImu preintegrate(std::span<const ImuSample> samples, double t0, double t1,
                              const Vec3& accel_bias, const Vec3& gyro_bias,
                              const ImuNoise& noise);

/// Dead-reckons `from` through the preintegrated motion.
NavState predict(const NavState& from, const PreintegratedImu& preint, const Vec3& gravity);

struct ImuResidual {
  Vec15 residual = Vec15::Zero();
  Mat15 jacobian_i = Mat15::Zero();
  Mat15 jacobian_j = Mat15::Zero();
};

/// [r_p, r_theta, r_v, r_ba, r_bg] between consecutive states.
ImuResidual imu_residual(const PreintegratedImu& preint, const NavState& xi, const NavState& xj,
                         const Vec3& gravity);

/// Sensor velocity expressed in the radar frame:
/// R_E^T (R^T v + (gyro - b_g)^ t_E).
Vec3 radar_frame_velocity(const NavState& x, const Vec3& gyro, const Extrinsics& ext);

/// Bearing of the point projected on the radar-frame velocity, minus the
/// measured doppler.
double doppler_residual(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                        const Extrinsics& ext);

/// d r_D / d state, tangent layout of state_index.
Row15 doppler_jacobian(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                       const Extrinsics& ext);

/// d r_D / d n for Cartesian point noise n: K^T (I - Omega Omega^T) / r.
Eigen::RowVector3d doppler_noise_jacobian(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                                          const Extrinsics& ext);

/// max(J Sigma_k J^T, floor_variance).
double doppler_residual_covariance(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                                   const Extrinsics& ext, const PointCovariance& sigma,
                                   double floor_variance);

/// l - (R (R_E p + t_E) + position).
Vec3 point_residual(const NavState& x, const Vec3& landmark, const PolarPoint& p,
                    const Extrinsics& ext);

/// d r_P / d state. d r_P / d landmark is the identity.
Mat3x15 point_jacobian(const NavState& x, const PolarPoint& p, const Extrinsics& ext);

/// (R R_E) Sigma_k (R R_E)^T.
Mat3 point_residual_covariance(const NavState& x, const Extrinsics& ext,
                               const PointCovariance& sigma);

}  // namespace rio
