#pragma once

#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "rio/association.hpp"
#include "rio/factors.hpp"

namespace rio {

struct ImuFactor {
  std::int64_t frame_i = 0;  // links frame_i and frame_i + 1
  PreintegratedImu preint;
  std::vector<ImuSample> samples;  // kept for re-integration after large bias updates
  double t0 = 0.0;
  double t1 = 0.0;
};

struct DopplerFactor {
  std::int64_t frame = 0;
  PolarPoint point;
  Vec3 gyro = Vec3::Zero();  // IMU rate at the scan time
  PointCovariance sigma;
};

struct PointFactor {
  std::int64_t frame = 0;
  LandmarkId landmark = 0;
  PolarPoint point;
  PointCovariance sigma;
};

struct FactorSet {
  std::vector<ImuFactor> imu;
  std::vector<DopplerFactor> doppler;
  std::vector<PointFactor> point;
};

struct Frame {
  std::int64_t id = 0;
  NavState state;
  Vec3 gyro = Vec3::Zero();
};

/// Frames in the window carry consecutive ids; factors refer to frames by id.
struct WindowState {
  std::deque<Frame> frames;
  LandmarkMap map;
  FactorSet factors;
  std::int64_t frame_counter = 0;

  /// Index into `frames`, or -1 when the id is not in the window.
  int index_of(std::int64_t frame_id) const;
};

/// Shared measurement model constants.
struct FactorModel {
  Extrinsics extrinsics;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double doppler_floor_variance = 0.05 * 0.05;
};

/// How the 4-dof position/yaw freedom of the window is removed.
enum class Gauge {
  /// Soft prior holding the oldest frame's position and yaw at their values
  /// at the start of the solve.
  kAnchorOldest,
  /// Oldest frame's position and orientation are held fixed.
  kFixOldestPose,
  kNone,
};

struct SolverOptions {
  int max_iterations = 50;
  double initial_lambda = 1e-4;
  double lambda_increase = 10.0;
  double lambda_decrease = 0.5;
  int max_retries = 10;
  double relative_cost_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  Gauge gauge = Gauge::kAnchorOldest;
  double gauge_sigma_position = 1e-3;  // m
  double gauge_sigma_yaw = 1e-3;       // rad
  /// Optional soft priors holding the oldest frame's roll/pitch and biases at
  /// their values at the start of the solve. Zero disables a prior. Only
  /// active with Gauge::kAnchorOldest.
  double prior_sigma_tilt = 0.0;         // rad, 0 disables
  double prior_sigma_accel_bias = 0.02;  // m/s^2
  double prior_sigma_gyro_bias = 0.002;  // rad/s
  /// Multiplies every factor covariance (including the gauge prior).
  double covariance_scale = 1.0;
};

enum class SolverStatus { kConverged, kMaxIterations, kDiverged };

std::string_view to_string(SolverStatus status);

/// Sum of squared Mahalanobis norms per factor family.
struct CostBreakdown {
  double imu = 0.0;
  double doppler = 0.0;
  double point = 0.0;
  double gauge = 0.0;

  double total() const { return imu + doppler + point + gauge; }
};

struct SolverReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  SolverStatus status = SolverStatus::kConverged;
  CostBreakdown initial_breakdown;
  CostBreakdown final_breakdown;
};

/// Levenberg-damped Gauss-Newton (H + lambda I) over every frame and every
/// landmark referenced by a point factor. Landmarks are eliminated with a
/// Schur complement. Factor weights are evaluated once, at the incoming
/// estimate, and held for the whole solve.
SolverReport solve(WindowState& window, const FactorModel& model, const SolverOptions& options);

/// Cost of the window at its current estimate, weights evaluated at the same estimate.
CostBreakdown evaluate_cost(const WindowState& window, const FactorModel& model,
                            const SolverOptions& options);

/// World yaw of a rotation, atan2(R10, R00).
double yaw_of(const Rotation& r);

}  // namespace rio
