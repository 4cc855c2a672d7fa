#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rio/config.hpp"
#include "rio/estimator.hpp"
#include "rio/evaluation.hpp"
#include "rio/simworld.hpp"

namespace rio {

struct RunResult {
  Trajectory trajectory;
  std::vector<FrameRecord> records;
  AssociationStats association;
};

/// Feeds both streams through one estimator in timestamp order and reports
/// every frame.
RunResult run_estimator(const std::vector<RadarScan>& scans, const std::vector<ImuSample>& imu,
                        const EstimatorConfig& config);

struct Metrics {
  PoseError ape;
  PoseError rpe;
};

Metrics evaluate(const Trajectory& estimate, const Trajectory& reference, const EvalOptions& options);

/// Recorded or simulated input with its reference trajectory.
struct Dataset {
  std::vector<RadarScan> scans;
  std::vector<ImuSample> imu;
  Trajectory reference;
};

/// Noisy (unless configured noiseless) simulation of config.scenario() under `seed`.
Dataset simulate_dataset(const RunConfig& config, std::uint64_t seed);

/// Element-wise median of the metrics.
Metrics median(std::vector<Metrics> runs);

struct TableRow {
  std::string label;
  Metrics metrics;
};

/// One row per ablation mode (none, no-range, no-angular, full). With a
/// dataset every mode runs once on it; otherwise each row is the median over
/// config.runs simulated seeds starting at config.seed.
std::vector<TableRow> ablation_table(const RunConfig& config, const std::optional<Dataset>& data);

/// One row per alpha in -3..3 under the configured ablation mode, same
/// dataset rules as ablation_table.
std::vector<TableRow> alpha_sweep_table(const RunConfig& config, const std::optional<Dataset>& data);

/// (x - min) / (max - min); all zeros when the values are equal.
std::vector<double> normalize(const std::vector<double>& values);

struct CovarianceCheck {
  double range = 0.0;
  double sigma_range = 0.0;
  double sigma_angle = 0.0;
  double frobenius_error = 0.0;
};

/// Relative Frobenius error between the empirical covariance of `samples`
/// noisy Cartesian points and point_covariance at a point at the given range.
double monte_carlo_covariance_error(double range, const NoiseParams& noise, int samples,
                                    std::uint64_t seed);

/// Ranges {1, 5, 10, 30} m x angle sigmas {0.005, 0.01, 0.03} rad x range
/// sigmas {0.05, 0.1} m.
std::vector<CovarianceCheck> monte_carlo_grid(int samples, std::uint64_t seed);

}  // namespace rio
