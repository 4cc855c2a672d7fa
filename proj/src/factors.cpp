#include "rio/factors.hpp"

#include <algorithm>

namespace rio {

namespace si = state_index;

NavState retract(const NavState& x, const Vec15& delta) {
  NavState out = x;
  out.position += delta.segment<3>(si::kPosition);
  out.orientation = x.orientation * so3_exp(delta.segment<3>(si::kOrientation));
  out.velocity += delta.segment<3>(si::kVelocity);
  out.accel_bias += delta.segment<3>(si::kAccelBias);
  out.gyro_bias += delta.segment<3>(si::kGyroBias);
  return out;
}

PreintegratedImu::PreintegratedImu(const Vec3& accel_bias, const Vec3& gyro_bias,
                                   const ImuNoise& noise)
    : noise_(noise), ba_(accel_bias), bg_(gyro_bias) {}

void PreintegratedImu::integrate(const Vec3& gyro, const Vec3& accel, double dt) {
  if (dt <= 0.0) return;
  const Vec3 a = accel - ba_;
  const Vec3 w = gyro - bg_;
  const Mat3 dr = dr_.matrix();
  const Mat3 a_hat = skew(a);
  const Rotation step = so3_exp(w * dt);
  const Mat3 step_t = step.matrix().transpose();
  const Mat3 jr = so3_right_jacobian(w * dt);
  const double dt2 = dt * dt;

  // Covariance of [p, theta, v]; the bias blocks are pure random walks.
  Eigen::Matrix<double, 9, 9> a_mat = Eigen::Matrix<double, 9, 9>::Identity();
  a_mat.block<3, 3>(0, 3) = -0.5 * dr * a_hat * dt2;
  a_mat.block<3, 3>(0, 6) = Mat3::Identity() * dt;
  a_mat.block<3, 3>(3, 3) = step_t;
  a_mat.block<3, 3>(6, 3) = -dr * a_hat * dt;
  Eigen::Matrix<double, 9, 6> b_mat = Eigen::Matrix<double, 9, 6>::Zero();
  b_mat.block<3, 3>(3, 0) = jr * dt;
  b_mat.block<3, 3>(0, 3) = 0.5 * dr * dt2;
  b_mat.block<3, 3>(6, 3) = dr * dt;
  Eigen::Matrix<double, 6, 1> q;
  q.head<3>().setConstant(noise_.gyro_noise_density * noise_.gyro_noise_density / dt);
  q.tail<3>().setConstant(noise_.accel_noise_density * noise_.accel_noise_density / dt);
  const Eigen::Matrix<double, 9, 9> nav = cov_.topLeftCorner<9, 9>();
  cov_.topLeftCorner<9, 9>() =
      a_mat * nav * a_mat.transpose() + b_mat * q.asDiagonal() * b_mat.transpose();
  cov_.block<3, 3>(9, 9) += Mat3::Identity() * noise_.accel_bias_random_walk *
                            noise_.accel_bias_random_walk * dt;
  cov_.block<3, 3>(12, 12) += Mat3::Identity() * noise_.gyro_bias_random_walk *
                              noise_.gyro_bias_random_walk * dt;

  // Bias Jacobians use the pre-update rotation.
  dp_dba_ += dv_dba_ * dt - 0.5 * dr * dt2;
  dp_dbg_ += dv_dbg_ * dt - 0.5 * dr * a_hat * dr_dbg_ * dt2;
  dv_dba_ -= dr * dt;
  dv_dbg_ -= dr * a_hat * dr_dbg_ * dt;
  dr_dbg_ = step_t * dr_dbg_ - jr * dt;

  dp_ += dv_ * dt + 0.5 * (dr * a) * dt2;
  dv_ += dr * a * dt;
  dr_ = dr_ * step;
  dt_ += dt;
}

PreintegratedImu preintegrate(std::span<const ImuSample> samples, double t0, double t1,
                              const Vec3& accel_bias, const Vec3& gyro_bias,
                              const ImuNoise& noise) {
  if (samples.empty()) throw EmptyIntervalError("no IMU samples in preintegration interval");
  if (!(t1 > t0)) throw EmptyIntervalError("preintegration interval has non-positive length");
  PreintegratedImu out(accel_bias, gyro_bias, noise);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double start = k == 0 ? t0 : std::max(samples[k].timestamp, t0);
    const double end = k + 1 < samples.size() ? std::min(samples[k + 1].timestamp, t1) : t1;
    if (end > start) out.integrate(samples[k].gyro, samples[k].accel, end - start);
  }
  if (out.delta_time() <= 0.0) {
    throw EmptyIntervalError("IMU samples do not cover the preintegration interval");
  }
  return out;
}

namespace {

struct BiasCorrected {
  Vec3 dp;
  Vec3 dv;
  Rotation dr;
  Vec3 dbg;
};

BiasCorrected correct(const PreintegratedImu& pre, const Vec3& ba, const Vec3& bg) {
  const Vec3 dba = ba - pre.linearization_accel_bias();
  const Vec3 dbg = bg - pre.linearization_gyro_bias();
  return {pre.delta_position() + pre.dp_dba() * dba + pre.dp_dbg() * dbg,
          pre.delta_velocity() + pre.dv_dba() * dba + pre.dv_dbg() * dbg,
          pre.delta_rotation() * so3_exp(pre.dr_dbg() * dbg), dbg};
}

}  // namespace

NavState predict(const NavState& from, const PreintegratedImu& preint, const Vec3& gravity) {
  const BiasCorrected c = correct(preint, from.accel_bias, from.gyro_bias);
  const double dt = preint.delta_time();
  NavState out = from;
  out.timestamp = from.timestamp + dt;
  out.position = from.position + from.velocity * dt + 0.5 * gravity * dt * dt +
                 from.orientation * c.dp;
  out.velocity = from.velocity + gravity * dt + from.orientation * c.dv;
  out.orientation = from.orientation * c.dr;
  return out;
}

ImuResidual imu_residual(const PreintegratedImu& preint, const NavState& xi, const NavState& xj,
                         const Vec3& gravity) {
  const BiasCorrected c = correct(preint, xi.accel_bias, xi.gyro_bias);
  const double dt = preint.delta_time();
  const Mat3 ri_t = xi.orientation.matrix().transpose();
  const Vec3 dp_world = xj.position - xi.position - xi.velocity * dt - 0.5 * gravity * dt * dt;
  const Vec3 dv_world = xj.velocity - xi.velocity - gravity * dt;
  const Rotation rot_err = c.dr.inverse() * xi.orientation.inverse() * xj.orientation;
  const Vec3 r_theta = so3_log(rot_err);

  ImuResidual out;
  out.residual.segment<3>(0) = ri_t * dp_world - c.dp;
  out.residual.segment<3>(3) = r_theta;
  out.residual.segment<3>(6) = ri_t * dv_world - c.dv;
  out.residual.segment<3>(9) = xj.accel_bias - xi.accel_bias;
  out.residual.segment<3>(12) = xj.gyro_bias - xi.gyro_bias;

  const Mat3 jr_inv = so3_right_jacobian_inverse(r_theta);
  const Mat3 rel = xj.orientation.matrix().transpose() * xi.orientation.matrix();

  Mat15& ji = out.jacobian_i;
  ji.block<3, 3>(0, si::kPosition) = -ri_t;
  ji.block<3, 3>(0, si::kOrientation) = skew(ri_t * dp_world);
  ji.block<3, 3>(0, si::kVelocity) = -ri_t * dt;
  ji.block<3, 3>(0, si::kAccelBias) = -preint.dp_dba();
  ji.block<3, 3>(0, si::kGyroBias) = -preint.dp_dbg();

  ji.block<3, 3>(3, si::kOrientation) = -jr_inv * rel;
  ji.block<3, 3>(3, si::kGyroBias) = -jr_inv * so3_exp(r_theta).matrix().transpose() *
                                     so3_right_jacobian(preint.dr_dbg() * c.dbg) *
                                     preint.dr_dbg();

  ji.block<3, 3>(6, si::kOrientation) = skew(ri_t * dv_world);
  ji.block<3, 3>(6, si::kVelocity) = -ri_t;
  ji.block<3, 3>(6, si::kAccelBias) = -preint.dv_dba();
  ji.block<3, 3>(6, si::kGyroBias) = -preint.dv_dbg();

  ji.block<3, 3>(9, si::kAccelBias) = -Mat3::Identity();
  ji.block<3, 3>(12, si::kGyroBias) = -Mat3::Identity();

  Mat15& jj = out.jacobian_j;
  jj.block<3, 3>(0, si::kPosition) = ri_t;
  jj.block<3, 3>(3, si::kOrientation) = jr_inv;
  jj.block<3, 3>(6, si::kVelocity) = ri_t;
  jj.block<3, 3>(9, si::kAccelBias) = Mat3::Identity();
  jj.block<3, 3>(12, si::kGyroBias) = Mat3::Identity();
  return out;
}

Vec3 radar_frame_velocity(const NavState& x, const Vec3& gyro, const Extrinsics& ext) {
  const Vec3 body = x.orientation.inverse() * x.velocity +
                    (gyro - x.gyro_bias).cross(ext.translation);
  return ext.rotation.inverse() * body;
}

double doppler_residual(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                        const Extrinsics& ext) {
  const Vec3 omega = bearing_of(p.azimuth, p.elevation).vector();
  return omega.dot(radar_frame_velocity(x, gyro, ext)) - p.doppler;
}

Row15 doppler_jacobian(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                       const Extrinsics& ext) {
  (void)gyro;
  const Vec3 omega = bearing_of(p.azimuth, p.elevation).vector();
  const Eigen::RowVector3d proj = omega.transpose() * ext.rotation.matrix().transpose();
  const Mat3 r_t = x.orientation.matrix().transpose();
  Row15 j = Row15::Zero();
  j.segment<3>(si::kOrientation) = proj * skew(r_t * x.velocity);
  j.segment<3>(si::kVelocity) = proj * r_t;
  j.segment<3>(si::kGyroBias) = proj * skew(ext.translation);
  return j;
}

Eigen::RowVector3d doppler_noise_jacobian(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                                          const Extrinsics& ext) {
  const Vec3 omega = bearing_of(p.azimuth, p.elevation).vector();
  const Vec3 k = radar_frame_velocity(x, gyro, ext);
  const Mat3 projector = Mat3::Identity() - omega * omega.transpose();
  return k.transpose() * projector / p.range;
}

double doppler_residual_covariance(const NavState& x, const Vec3& gyro, const PolarPoint& p,
                                   const Extrinsics& ext, const PointCovariance& sigma,
                                   double floor_variance) {
  const Eigen::RowVector3d j = doppler_noise_jacobian(x, gyro, p, ext);
  const double variance = (j * sigma.covariance * j.transpose())(0, 0);
  return std::max(variance, floor_variance);
}

Vec3 point_residual(const NavState& x, const Vec3& landmark, const PolarPoint& p,
                    const Extrinsics& ext) {
  const Vec3 body = ext.rotation * polar_to_cartesian(p) + ext.translation;
  return landmark - (x.orientation * body + x.position);
}

Mat3x15 point_jacobian(const NavState& x, const PolarPoint& p, const Extrinsics& ext) {
  const Vec3 body = ext.rotation * polar_to_cartesian(p) + ext.translation;
  Mat3x15 j = Mat3x15::Zero();
  j.block<3, 3>(0, si::kPosition) = -Mat3::Identity();
  j.block<3, 3>(0, si::kOrientation) = x.orientation.matrix() * skew(body);
  return j;
}

Mat3 point_residual_covariance(const NavState& x, const Extrinsics& ext,
                               const PointCovariance& sigma) {
  const Mat3 j = x.orientation.matrix() * ext.rotation.matrix();
  const Mat3 out = j * sigma.covariance * j.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace rio
