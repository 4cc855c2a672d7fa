#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rio/association.hpp"
#include "rio/factors.hpp"
#include "rio/radar_model.hpp"
#include "rio/solver.hpp"
#include "rio/trajectory.hpp"

namespace rio {

struct EstimatorConfig {
  NoiseParams noise;
  /// Point covariances are multiplied by 2^alpha.
  double alpha = 0.0;
  AblationMode ablation = AblationMode::kFull;
  MatchingMode matching = MatchingMode::kProbability;
  double candidate_margin = 0.1;  // m
  double euclidean_radius = 1.0;  // m
  int window_length = 10;
  int min_observations = 1;
  Extrinsics extrinsics;
  ImuNoise imu_noise;
  FieldOfView fov;
  double gravity = 9.81;                 // m/s^2, world z up
  double doppler_floor_sigma = 0.05;     // m/s
  double gravity_alignment_window = 0.5; // s
  /// Preintegration is redone from raw samples past these bias changes.
  double reintegrate_accel_bias = 0.05;
  double reintegrate_gyro_bias = 0.005;
  SolverOptions solver;
  /// Report each frame's pose right after its first solve instead of when it leaves the window.
  bool report_newest = false;
};

class OutOfOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoImuDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-scan summary.
struct FrameRecord {
  std::int64_t frame = 0;
  double timestamp = 0.0;
  int points = 0;
  int matches = 0;
  int spawned = 0;
  int landmarks = 0;
  SolverReport solver;
};

/// Correspondence quality against simulator labels.
struct AssociationStats {
  std::int64_t labelled_matches = 0;
  std::int64_t mismatches = 0;

  double mismatch_rate() const {
    return labelled_matches == 0 ? 0.0
                                 : static_cast<double>(mismatches) / labelled_matches;
  }
};

/// Sliding-window radar-inertial estimator.
///
/// Calls must be externally serialized. Each push_scan predicts the new
/// frame from IMU data, adds doppler factors for every in-view point,
/// associates points with the landmark map, minimizes the window cost and
/// evicts the oldest frame once the window exceeds its length.
class Estimator {
 public:
  explicit Estimator(EstimatorConfig config);

  /// Throws OutOfOrderError unless the sample is newer than every buffered
  /// sample and the last scan.
  void push_imu(const ImuSample& sample);

  /// Throws OutOfOrderError for non-increasing scan times and NoImuDataError
  /// when no IMU sample arrived since the previous scan.
  SolverReport push_scan(const RadarScan& scan);

  /// Reports the frames still in the window.
  void finish();

  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<FrameRecord>& records() const { return records_; }
  const WindowState& window() const { return window_; }
  const AssociationStats& association_stats() const { return stats_; }
  const EstimatorConfig& config() const { return config_; }

  /// Covariance used for a point under the configured ablation and alpha.
  PointCovariance point_uncertainty(const PolarPoint& p) const;

 private:
  FactorModel model() const;
  NavState bootstrap(double timestamp) const;
  Vec3 gyro_at(double timestamp) const;
  void reintegrate_if_needed();
  void slide_window();
  void report(const Frame& frame);

  EstimatorConfig config_;
  NoiseParams effective_noise_;
  WindowState window_;
  std::deque<ImuSample> imu_;
  double last_scan_time_ = -std::numeric_limits<double>::infinity();
  bool started_ = false;
  bool finished_ = false;
  std::unordered_map<LandmarkId, int> landmark_refs_;
  Trajectory trajectory_;
  std::vector<FrameRecord> records_;
  AssociationStats stats_;
};

}  // namespace rio
