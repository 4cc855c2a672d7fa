#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "rio/association.hpp"
#include "rio/estimator.hpp"
#include "rio/evaluation.hpp"
#include "rio/radar_model.hpp"
#include "rio/simworld.hpp"

namespace rio {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs: sensor model, estimator knobs, simulated scenario,
/// evaluation settings and seeds. Key table in docs/config.md.
struct RunConfig {
  std::uint64_t seed = 1;
  /// Number of seeds (seed, seed+1, ...) used by multi-run experiments.
  int runs = 10;

  NoiseParams noise;
  ImuNoise imu_noise;
  FieldOfView fov;
  std::array<double, 4> extrinsic_rotation{1.0, 0.0, 0.0, 0.0};  // w x y z, radar to IMU
  std::array<double, 3> extrinsic_translation{0.0, 0.0, 0.0};    // m
  double gravity = 9.81;

  // estimator
  double alpha = 0.0;
  AblationMode ablation = AblationMode::kFull;
  MatchingMode matching = MatchingMode::kProbability;
  double candidate_margin = 0.1;
  double euclidean_radius = 1.0;
  int window_length = 10;
  int min_observations = 1;
  double doppler_floor_sigma = 0.05;
  double gravity_alignment_window = 0.5;
  bool report_newest = false;

  // solver
  int max_iterations = 50;
  double initial_lambda = 1e-4;
  double lambda_increase = 10.0;
  double lambda_decrease = 0.5;
  int max_retries = 10;
  double relative_cost_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  double gauge_sigma_position = 1e-3;
  double gauge_sigma_yaw = 1e-3;
  double prior_sigma_tilt = 0.0;
  double prior_sigma_accel_bias = 0.02;
  double prior_sigma_gyro_bias = 0.002;

  // scenario
  TrajectoryShape shape = TrajectoryShape::kCircle;
  double speed = 1.0;
  double radius = 5.0;
  double duration = 60.0;
  double height = 0.0;
  int landmark_count = 200;
  std::array<double, 3> box_min{-10.0, -10.0, -2.0};
  std::array<double, 3> box_max{10.0, 10.0, 2.0};
  double scan_rate = 10.0;
  double imu_rate = 200.0;
  double scan_start = 0.5;
  double initial_accel_bias = 0.02;
  double initial_gyro_bias = 0.001;
  double doppler_noise = 0.0;
  bool noiseless = false;

  // evaluation
  bool align = true;
  double max_time_difference = 0.01;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;

  EstimatorConfig estimator() const;
  Scenario scenario() const;
  EvalOptions evaluation() const;
};

/// Parses a YAML document. Missing keys keep their defaults; unknown keys,
/// wrong types and out-of-range values throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// YAML document that parse_config maps back to an equal RunConfig.
std::string serialize_config(const RunConfig& config);

}  // namespace rio
