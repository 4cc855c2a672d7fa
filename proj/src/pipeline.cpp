#include "rio/pipeline.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <random>

namespace rio {

RunResult run_estimator(const std::vector<RadarScan>& scans, const std::vector<ImuSample>& imu,
                        const EstimatorConfig& config) {
  Estimator estimator(config);
  std::size_t next = 0;
  for (const RadarScan& scan : scans) {
    while (next < imu.size() && imu[next].timestamp <= scan.timestamp) {
      estimator.push_imu(imu[next++]);
    }
    estimator.push_scan(scan);
  }
  estimator.finish();
  return {estimator.trajectory(), estimator.records(), estimator.association_stats()};
}

Metrics evaluate(const Trajectory& estimate, const Trajectory& reference,
                 const EvalOptions& options) {
  return {ape_rmse(estimate, reference, options), rpe_rmse(estimate, reference, options)};
}

Dataset simulate_dataset(const RunConfig& config, std::uint64_t seed) {
  Scenario s = config.scenario();
  s.seed = seed;
  Simulation sim = simulate(s);
  return {std::move(sim.streams.scans), std::move(sim.streams.imu), sim.truth.trajectory()};
}

Metrics median(std::vector<Metrics> runs) {
  const auto med = [&](auto field) {
    std::vector<double> v;
    for (const Metrics& m : runs) v.push_back(field(m));
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  Metrics out;
  out.ape.translation = med([](const Metrics& m) { return m.ape.translation; });
  out.ape.rotation = med([](const Metrics& m) { return m.ape.rotation; });
  out.rpe.translation = med([](const Metrics& m) { return m.rpe.translation; });
  out.rpe.rotation = med([](const Metrics& m) { return m.rpe.rotation; });
  return out;
}

namespace {

template <typename Variant>
std::vector<TableRow> table(const RunConfig& config, const std::optional<Dataset>& data,
                            const std::vector<std::pair<std::string, Variant>>& variants) {
  std::vector<TableRow> rows;
  if (data) {
    for (const auto& [label, apply] : variants) {
      EstimatorConfig ec = config.estimator();
      apply(ec);
      const RunResult r = run_estimator(data->scans, data->imu, ec);
      rows.push_back({label, evaluate(r.trajectory, data->reference, config.evaluation())});
    }
    return rows;
  }
  std::vector<std::vector<Metrics>> per_variant(variants.size());
  for (int k = 0; k < config.runs; ++k) {
    const Dataset d = simulate_dataset(config, config.seed + static_cast<std::uint64_t>(k));
    for (std::size_t v = 0; v < variants.size(); ++v) {
      EstimatorConfig ec = config.estimator();
      variants[v].second(ec);
      const RunResult r = run_estimator(d.scans, d.imu, ec);
      per_variant[v].push_back(evaluate(r.trajectory, d.reference, config.evaluation()));
    }
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    rows.push_back({variants[v].first, median(per_variant[v])});
  }
  return rows;
}

}  // namespace

std::vector<TableRow> ablation_table(const RunConfig& config, const std::optional<Dataset>& data) {
  using Apply = std::function<void(EstimatorConfig&)>;
  std::vector<std::pair<std::string, Apply>> variants;
  for (AblationMode mode :
       {AblationMode::kNone, AblationMode::kNoRange, AblationMode::kNoAngular, AblationMode::kFull}) {
    variants.emplace_back(std::string(to_string(mode)),
                          [mode](EstimatorConfig& c) { c.ablation = mode; });
  }
  return table(config, data, variants);
}

std::vector<TableRow> alpha_sweep_table(const RunConfig& config,
                                        const std::optional<Dataset>& data) {
  using Apply = std::function<void(EstimatorConfig&)>;
  std::vector<std::pair<std::string, Apply>> variants;
  for (int alpha = -3; alpha <= 3; ++alpha) {
    variants.emplace_back(std::to_string(alpha),
                          [alpha](EstimatorConfig& c) { c.alpha = alpha; });
  }
  return table(config, data, variants);
}

std::vector<double> normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<double> out(values.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t k = 0; k < values.size(); ++k) out[k] = (values[k] - *lo) / (*hi - *lo);
  }
  return out;
}

double monte_carlo_covariance_error(double range, const NoiseParams& noise, int samples,
                                    std::uint64_t seed) {
  const PolarPoint gt{range, 0.3, 0.1, 0.0};
  const Vec3 center = polar_to_cartesian(gt);
  std::mt19937_64 rng(seed);
  Vec3 sum = Vec3::Zero();
  Mat3 acc = Mat3::Zero();
  for (int k = 0; k < samples; ++k) {
    const Vec3 d = polar_to_cartesian(sample_noisy_point(gt, noise, rng)) - center;
    sum += d;
    acc += d * d.transpose();
  }
  const Vec3 mean = sum / samples;
  const Mat3 empirical = (acc - samples * mean * mean.transpose()) / (samples - 1);
  const Mat3 analytic = point_covariance(gt, noise).covariance;
  return (empirical - analytic).norm() / analytic.norm();
}

std::vector<CovarianceCheck> monte_carlo_grid(int samples, std::uint64_t seed) {
  std::vector<CovarianceCheck> out;
  std::uint64_t cell = 0;
  for (double range : {1.0, 5.0, 10.0, 30.0}) {
    for (double angle : {0.005, 0.01, 0.03}) {
      for (double sr : {0.05, 0.1}) {
        const NoiseParams n{sr, angle, angle};
        out.push_back({range, sr, angle,
                       monte_carlo_covariance_error(range, n, samples, derive_seed(seed, cell++))});
      }
    }
  }
  return out;
}

}  // namespace rio
