#include "rio/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rio {

Estimator::Estimator(EstimatorConfig config)
    : config_(std::move(config)), effective_noise_(ablate(config_.noise, config_.ablation)) {
  if (config_.window_length < 1) throw std::invalid_argument("window length must be positive");
}

FactorModel Estimator::model() const {
  FactorModel m;
  m.extrinsics = config_.extrinsics;
  m.gravity = Vec3(0.0, 0.0, -config_.gravity);
  m.doppler_floor_variance = config_.doppler_floor_sigma * config_.doppler_floor_sigma;
  return m;
}

PointCovariance Estimator::point_uncertainty(const PolarPoint& p) const {
  return scale_covariance(point_covariance(p, effective_noise_), config_.alpha);
}

void Estimator::push_imu(const ImuSample& sample) {
  if (!std::isfinite(sample.timestamp) || !sample.gyro.allFinite() || !sample.accel.allFinite()) {
    throw std::invalid_argument("IMU sample has non-finite fields");
  }
  if (!imu_.empty() && sample.timestamp <= imu_.back().timestamp) {
    throw OutOfOrderError("IMU sample at t=" + std::to_string(sample.timestamp) +
                          " is not newer than the previous sample");
  }
  if (sample.timestamp <= last_scan_time_) {
    throw OutOfOrderError("IMU sample at t=" + std::to_string(sample.timestamp) +
                          " is older than the last radar scan");
  }
  imu_.push_back(sample);
}

Vec3 Estimator::gyro_at(double timestamp) const {
  Vec3 gyro = Vec3::Zero();
  for (const ImuSample& s : imu_) {
    if (s.timestamp > timestamp) break;
    gyro = s.gyro;
  }
  return gyro;
}

NavState Estimator::bootstrap(double timestamp) const {
  NavState x;
  x.timestamp = timestamp;
  Vec3 mean = Vec3::Zero();
  int count = 0;
  for (const ImuSample& s : imu_) {
    if (s.timestamp > timestamp) break;
    if (s.timestamp < timestamp - config_.gravity_alignment_window) continue;
    mean += s.accel;
    ++count;
  }
  if (count > 0 && mean.norm() > 0.0) {
    // At rest the specific force points along world +z.
    const Rotation tilt(Eigen::Quaterniond::FromTwoVectors(mean, Vec3::UnitZ()));
    x.orientation = so3_exp(Vec3(0.0, 0.0, -yaw_of(tilt))) * tilt;
  }
  return x;
}

void Estimator::reintegrate_if_needed() {
  for (ImuFactor& f : window_.factors.imu) {
    const NavState& xi = window_.frames[window_.index_of(f.frame_i)].state;
    if ((xi.accel_bias - f.preint.linearization_accel_bias()).norm() >
            config_.reintegrate_accel_bias ||
        (xi.gyro_bias - f.preint.linearization_gyro_bias()).norm() >
            config_.reintegrate_gyro_bias) {
      f.preint = preintegrate(f.samples, f.t0, f.t1, xi.accel_bias, xi.gyro_bias,
                              config_.imu_noise);
    }
  }
}

SolverReport Estimator::push_scan(const RadarScan& scan) {
  if (!(scan.timestamp > last_scan_time_)) {
    throw OutOfOrderError("radar scan at t=" + std::to_string(scan.timestamp) +
                          " is not newer than the previous scan");
  }
  const FactorModel fm = model();

  Frame frame;
  frame.id = window_.frame_counter;
  if (!started_) {
    frame.state = bootstrap(scan.timestamp);
  } else {
    const bool fresh = std::any_of(imu_.begin(), imu_.end(), [&](const ImuSample& s) {
      return s.timestamp > last_scan_time_;
    });
    if (!fresh) {
      throw NoImuDataError("no IMU data between scans at t=" + std::to_string(last_scan_time_) +
                           " and t=" + std::to_string(scan.timestamp));
    }
    const Frame& prev = window_.frames.back();
    ImuFactor imu;
    imu.frame_i = prev.id;
    imu.t0 = last_scan_time_;
    imu.t1 = scan.timestamp;
    for (const ImuSample& s : imu_) {
      if (s.timestamp < scan.timestamp) imu.samples.push_back(s);
    }
    imu.preint = preintegrate(imu.samples, imu.t0, imu.t1, prev.state.accel_bias,
                              prev.state.gyro_bias, config_.imu_noise);
    frame.state = predict(prev.state, imu.preint, fm.gravity);
    frame.state.timestamp = scan.timestamp;
    window_.factors.imu.push_back(std::move(imu));
  }
  frame.gyro = gyro_at(scan.timestamp);
  window_.frames.push_back(frame);
  ++window_.frame_counter;
  started_ = true;
  last_scan_time_ = scan.timestamp;

  // Keep the sample that governs the interval right after this scan.
  while (imu_.size() > 1 && imu_[1].timestamp <= scan.timestamp) imu_.pop_front();

  FrameRecord record;
  record.frame = frame.id;
  record.timestamp = scan.timestamp;

  const bool labelled = scan.labels.size() == scan.points.size();
  std::vector<NewPoint> unmatched;
  std::vector<PolarPoint> unmatched_points;
  std::vector<LandmarkId> claimed;
  for (std::size_t k = 0; k < scan.points.size(); ++k) {
    const PolarPoint& p = scan.points[k];
    if (!p.valid() || !config_.fov.contains(p)) continue;
    ++record.points;
    const PointCovariance sigma = point_uncertainty(p);
    window_.factors.doppler.push_back({frame.id, p, frame.gyro, sigma});

    const WorldPoint wp = to_world(p, frame.state, config_.extrinsics, sigma);
    const MatchResult match =
        config_.matching == MatchingMode::kProbability
            ? associate(wp, window_.map, config_.candidate_margin)
            : associate_euclidean(wp.position, window_.map, config_.euclidean_radius);
    const std::int64_t label = labelled ? scan.labels[k] : -1;
    if (match.landmark &&
        std::find(claimed.begin(), claimed.end(), *match.landmark) == claimed.end()) {
      const LandmarkId id = *match.landmark;
      claimed.push_back(id);
      window_.map.observe(id, frame.id);
      window_.factors.point.push_back({frame.id, id, p, sigma});
      ++landmark_refs_[id];
      ++record.matches;
      const std::int64_t truth = window_.map.at(id).truth_label;
      if (label >= 0 && truth >= 0) {
        ++stats_.labelled_matches;
        if (label != truth) ++stats_.mismatches;
      }
    } else {
      unmatched.push_back({wp.position, label});
      unmatched_points.push_back(p);
    }
  }

  const MapPolicy policy{config_.window_length, config_.min_observations};
  const std::vector<LandmarkId> spawned = update_map(window_.map, unmatched, frame.id, policy);
  for (std::size_t k = 0; k < spawned.size(); ++k) {
    window_.factors.point.push_back(
        {frame.id, spawned[k], unmatched_points[k], point_uncertainty(unmatched_points[k])});
    ++landmark_refs_[spawned[k]];
  }
  record.spawned = static_cast<int>(spawned.size());

  // Retirement inside update_map only touches landmarks without live factors,
  // but keep the factor set consistent regardless.
  auto& points = window_.factors.point;
  points.erase(std::remove_if(points.begin(), points.end(),
                              [&](const PointFactor& f) {
                                if (window_.map.contains(f.landmark)) return false;
                                landmark_refs_.erase(f.landmark);
                                return true;
                              }),
               points.end());

  reintegrate_if_needed();
  record.solver = solve(window_, fm, config_.solver);
  record.landmarks = static_cast<int>(window_.map.size());
  records_.push_back(record);

  if (config_.report_newest) report(window_.frames.back());
  if (static_cast<int>(window_.frames.size()) > config_.window_length) slide_window();
  return record.solver;
}

void Estimator::report(const Frame& frame) {
  StampedPose pose;
  pose.timestamp = frame.state.timestamp;
  pose.position = frame.state.position;
  pose.orientation = frame.state.orientation.quaternion();
  trajectory_.push_back(pose);
}

void Estimator::slide_window() {
  const Frame oldest = window_.frames.front();
  if (!config_.report_newest) report(oldest);
  FactorSet& f = window_.factors;
  f.imu.erase(std::remove_if(f.imu.begin(), f.imu.end(),
                             [&](const ImuFactor& x) { return x.frame_i == oldest.id; }),
              f.imu.end());
  f.doppler.erase(std::remove_if(f.doppler.begin(), f.doppler.end(),
                                 [&](const DopplerFactor& x) { return x.frame == oldest.id; }),
                  f.doppler.end());
  f.point.erase(std::remove_if(f.point.begin(), f.point.end(),
                               [&](const PointFactor& x) {
                                 if (x.frame != oldest.id) return false;
                                 if (--landmark_refs_[x.landmark] == 0) {
                                   landmark_refs_.erase(x.landmark);
                                   window_.map.remove(x.landmark);
                                 }
                                 return true;
                               }),
                f.point.end());
  window_.frames.pop_front();
}

void Estimator::finish() {
  if (finished_) return;
  finished_ = true;
  if (config_.report_newest) return;
  for (const Frame& frame : window_.frames) report(frame);
}

}  // namespace rio
