#pragma once

#include <map>
#include <set>
#include <vector>

#include "rio/simworld.hpp"
#include "rio/solver.hpp"

namespace fixture {

/// Window over `frames` consecutive scans of `sim` starting at `first`, with
/// states at ground truth, doppler factors for every point and point factors
/// for points whose label is in `labels` (all labels when empty).
inline rio::WindowState make_window(const rio::Simulation& sim, std::size_t first,
                                    std::size_t frames, const rio::NoiseParams& noise,
                                    const std::set<std::int64_t>& labels = {}) {
  using namespace rio;
  WindowState w;
  std::map<std::int64_t, LandmarkId> ids;
  for (std::size_t k = 0; k < frames; ++k) {
    const RadarScan& scan = sim.streams.scans[first + k];
    Frame f;
    f.id = static_cast<std::int64_t>(k);
    f.state = sim.truth.states[first + k];
    for (const ImuSample& s : sim.streams.imu) {
      if (s.timestamp <= scan.timestamp) f.gyro = s.gyro;
    }
    w.frames.push_back(f);
    for (std::size_t j = 0; j < scan.points.size(); ++j) {
      const PolarPoint& p = scan.points[j];
      const PointCovariance sigma = point_covariance(p, noise);
      w.factors.doppler.push_back({f.id, p, f.gyro, sigma});
      const std::int64_t label = scan.labels[j];
      if (!labels.empty() && !labels.count(label)) continue;
      if (!ids.count(label)) ids[label] = w.map.add(sim.truth.landmarks[label], f.id, label);
      w.factors.point.push_back({f.id, ids[label], p, sigma});
    }
    if (k + 1 < frames) {
      const double t0 = scan.timestamp;
      const double t1 = sim.streams.scans[first + k + 1].timestamp;
      ImuFactor imu;
      imu.frame_i = f.id;
      imu.t0 = t0;
      imu.t1 = t1;
      for (const ImuSample& s : sim.streams.imu) {
        if (s.timestamp >= t0 && s.timestamp < t1) imu.samples.push_back(s);
      }
      imu.preint = preintegrate(imu.samples, t0, t1, f.state.accel_bias, f.state.gyro_bias, {});
      w.factors.imu.push_back(std::move(imu));
    }
  }
  w.frame_counter = static_cast<std::int64_t>(frames);
  return w;
}

inline rio::Scenario short_circle(bool noiseless, std::uint64_t seed = 1) {
  rio::Scenario s;
  s.duration = 3.0;
  s.noiseless = noiseless;
  s.seed = seed;
  return s;
}

}  // namespace fixture
