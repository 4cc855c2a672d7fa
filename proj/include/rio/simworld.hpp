#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rio/factors.hpp"
#include "rio/radar_model.hpp"
#include "rio/trajectory.hpp"

namespace rio {

enum class TrajectoryShape { kCircle, kFigureEight, kStraight };

std::string_view to_string(TrajectoryShape shape);
std::optional<TrajectoryShape> parse_trajectory_shape(std::string_view text);

struct Scenario {
  TrajectoryShape shape = TrajectoryShape::kCircle;
  double speed = 1.0;      // m/s
  double radius = 5.0;     // m, circle radius / figure-eight half width
  double duration = 60.0;  // s
  double height = 0.0;     // m, trajectory altitude

  int landmark_count = 200;
  Vec3 box_min = Vec3(-10.0, -10.0, -2.0);  // m
  Vec3 box_max = Vec3(10.0, 10.0, 2.0);     // m

  double scan_rate = 10.0;   // Hz
  double imu_rate = 200.0;   // Hz
  double scan_start = 0.5;   // s, first scan time; IMU starts at 0
  FieldOfView fov;

  NoiseParams noise;
  ImuNoise imu_noise;
  /// Standard deviation of the initial IMU biases drawn by corrupt().
  double initial_accel_bias = 0.02;  // m/s^2
  double initial_gyro_bias = 0.001;  // rad/s
  /// Optional doppler noise (m/s); the measurement model assumes none.
  double doppler_noise = 0.0;
  Extrinsics extrinsics;

  bool noiseless = false;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Straight pass with a dense landmark slab 20-30 m ahead, where landmark
/// spacing is below the tangential 3-sigma extent of a point.
Scenario long_range_anisotropic_scenario(std::uint64_t seed);

struct GroundTruth {
  std::vector<NavState> states;  // one per scan, aligned with the scan stream
  std::vector<Vec3> landmarks;   // indexed by landmark label
  /// Scans in which no landmark was visible.
  int empty_scans = 0;

  Trajectory trajectory() const;
};

struct SensorStreams {
  std::vector<RadarScan> scans;  // labels filled
  std::vector<ImuSample> imu;
};

struct Simulation {
  GroundTruth truth;
  SensorStreams streams;
};

/// Noiseless measurements: every doppler and point residual evaluates to zero
/// at the true states, and IMU samples integrate exactly to them.
Simulation generate(const Scenario& s);

/// Applies polar point noise, optional doppler noise and IMU white noise plus
/// random-walk biases. Each scan and the IMU stream draw from seeds derived
/// from `seed`.
SensorStreams corrupt(const SensorStreams& clean, const NoiseParams& noise,
                      const ImuNoise& imu_noise, std::uint64_t seed, double initial_accel_bias = 0.0,
                      double initial_gyro_bias = 0.0, double doppler_noise = 0.0);

/// generate() followed by corrupt() unless the scenario is noiseless.
Simulation simulate(const Scenario& s);

/// Stream-splitting seed derivation (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace rio
