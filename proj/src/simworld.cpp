#include "rio/simworld.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace rio {

std::string_view to_string(TrajectoryShape shape) {
  switch (shape) {
    case TrajectoryShape::kCircle: return "circle";
    case TrajectoryShape::kFigureEight: return "figure-eight";
    case TrajectoryShape::kStraight: return "straight";
  }
  return "circle";
}

std::optional<TrajectoryShape> parse_trajectory_shape(std::string_view text) {
  for (auto shape :
       {TrajectoryShape::kCircle, TrajectoryShape::kFigureEight, TrajectoryShape::kStraight}) {
    if (text == to_string(shape)) return shape;
  }
  return std::nullopt;
}

void Scenario::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid scenario: ") + what);
  };
  require(duration > 0.0, "duration must be positive");
  require(speed >= 0.0, "speed must be non-negative");
  require(radius > 0.0, "radius must be positive");
  require(scan_rate > 0.0, "scan_rate must be positive");
  require(imu_rate > 0.0, "imu_rate must be positive");
  require(imu_rate >= scan_rate, "imu_rate must not be below scan_rate");
  const double ratio = imu_rate / scan_rate;
  require(std::abs(ratio - std::round(ratio)) < 1e-9, "imu_rate must be a multiple of scan_rate");
  require(scan_start >= 0.0 && scan_start < duration, "scan_start must lie inside the duration");
  require(fov.max_range > 0.0 && fov.min_range >= 0.0 && fov.min_range < fov.max_range,
          "field-of-view ranges must satisfy 0 <= min_range < max_range");
  require(fov.azimuth > 0.0 && fov.elevation > 0.0, "field-of-view angles must be positive");
  require(landmark_count >= 0, "landmark_count must be non-negative");
  require((box_max - box_min).minCoeff() >= 0.0, "landmark box must have box_max >= box_min");
  require(noise.valid(), "noise sigmas must be positive");
}

Scenario long_range_anisotropic_scenario(std::uint64_t seed) {
  Scenario s;
  s.shape = TrajectoryShape::kStraight;
  s.speed = 1.0;
  s.duration = 3.0;
  s.scan_start = 0.5;
  s.landmark_count = 600;
  s.box_min = Vec3(22.0, -5.0, -0.5);
  s.box_max = Vec3(33.0, 5.0, 0.5);
  s.fov.max_range = 35.0;
  s.noise = NoiseParams{0.05, 0.01, 0.01};
  s.seed = seed;
  return s;
}

Trajectory GroundTruth::trajectory() const {
  Trajectory out;
  out.reserve(states.size());
  for (const NavState& x : states) {
    out.push_back({x.timestamp, x.position, x.orientation.quaternion()});
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(stream));
}

namespace {

struct Kinematics {
  Vec3 position;
  Vec3 velocity;
  Vec3 acceleration;
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

class Path {
 public:
  explicit Path(const Scenario& s) : s_(s) {
    if (s.shape == TrajectoryShape::kFigureEight) {
      // Angular rate giving the requested mean speed.
      const int n = 4096;
      double mean = 0.0;
      for (int i = 0; i < n; ++i) {
        const double u = 2.0 * std::numbers::pi * (i + 0.5) / n;
        mean += std::hypot(std::cos(u), std::cos(2.0 * u));
      }
      mean /= n;
      rate_ = s.speed / (s.radius * mean);
    } else {
      rate_ = s.speed / s.radius;
    }
  }

  Kinematics at(double t) const {
    Kinematics k;
    const double r = s_.radius;
    const double w = rate_;
    switch (s_.shape) {
      case TrajectoryShape::kCircle: {
        const double a = w * t;
        k.position = Vec3(r * std::cos(a), r * std::sin(a), s_.height);
        k.velocity = Vec3(-r * w * std::sin(a), r * w * std::cos(a), 0.0);
        k.acceleration = Vec3(-r * w * w * std::cos(a), -r * w * w * std::sin(a), 0.0);
        break;
      }
      case TrajectoryShape::kFigureEight: {
        const double a = w * t;
        k.position = Vec3(r * std::sin(a), 0.5 * r * std::sin(2.0 * a), s_.height);
        k.velocity = Vec3(r * w * std::cos(a), r * w * std::cos(2.0 * a), 0.0);
        k.acceleration =
            Vec3(-r * w * w * std::sin(a), -2.0 * r * w * w * std::sin(2.0 * a), 0.0);
        break;
      }
      case TrajectoryShape::kStraight:
        k.position = Vec3(s_.speed * t, 0.0, s_.height);
        k.velocity = Vec3(s_.speed, 0.0, 0.0);
        k.acceleration = Vec3::Zero();
        break;
    }
    const double speed2 = k.velocity.head<2>().squaredNorm();
    if (speed2 > 0.0) {
      k.yaw = std::atan2(k.velocity.y(), k.velocity.x());
      k.yaw_rate = (k.velocity.x() * k.acceleration.y() - k.velocity.y() * k.acceleration.x()) /
                   speed2;
    }
    return k;
  }

 private:
  const Scenario& s_;
  double rate_ = 0.0;
};

Rotation yaw_rotation(double yaw) { return so3_exp(Vec3(0.0, 0.0, yaw)); }

}  // namespace

Simulation generate(const Scenario& s) {
  s.validate();
  const Vec3 gravity(0.0, 0.0, -9.81);
  const Path path(s);
  const double dt = 1.0 / s.imu_rate;
  const auto n_imu = static_cast<std::int64_t>(std::floor(s.duration * s.imu_rate + 1e-9)) + 1;
  const auto ratio = static_cast<std::int64_t>(std::llround(s.imu_rate / s.scan_rate));

  Simulation sim;
  std::mt19937_64 rng(derive_seed(s.seed, 0x1a4d));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < s.landmark_count; ++j) {
    Vec3 l;
    for (int a = 0; a < 3; ++a) l[a] = s.box_min[a] + (s.box_max[a] - s.box_min[a]) * unit(rng);
    sim.truth.landmarks.push_back(l);
  }

  // The true motion is the exact zero-order-hold integral of the noiseless
  // IMU samples, so preintegration reproduces it to round-off.
  const Kinematics k0 = path.at(0.0);
  NavState x;
  x.position = k0.position;
  x.velocity = k0.velocity;
  x.orientation = yaw_rotation(k0.yaw);

  sim.streams.imu.reserve(n_imu);
  for (std::int64_t k = 0; k < n_imu; ++k) {
    const double t = static_cast<double>(k) / s.imu_rate;
    x.timestamp = t;
    const Kinematics mid = path.at(t + 0.5 * dt);
    ImuSample sample;
    sample.timestamp = t;
    sample.gyro = Vec3(0.0, 0.0, mid.yaw_rate);
    sample.accel = x.orientation.inverse() * (mid.acceleration - gravity);
    sim.streams.imu.push_back(sample);

    if (k % ratio == 0 && t >= s.scan_start - 1e-9) {
      RadarScan scan;
      scan.timestamp = t;
      const Vec3 v_radar = radar_frame_velocity(x, sample.gyro, s.extrinsics);
      for (int j = 0; j < s.landmark_count; ++j) {
        const Vec3 body = x.orientation.inverse() * (sim.truth.landmarks[j] - x.position);
        const Vec3 radar = s.extrinsics.rotation.inverse() * (body - s.extrinsics.translation);
        if (radar.norm() <= 0.0) continue;
        PolarPoint p = cartesian_to_polar(radar);
        if (!s.fov.contains(p)) continue;
        p.doppler = bearing_of(p.azimuth, p.elevation).vector().dot(v_radar);
        scan.points.push_back(p);
        scan.labels.push_back(j);
      }
      if (scan.points.empty()) ++sim.truth.empty_scans;
      sim.truth.states.push_back(x);
      sim.streams.scans.push_back(std::move(scan));
    }

    const Vec3 accel_world = x.orientation * sample.accel + gravity;
    x.position += x.velocity * dt + 0.5 * accel_world * dt * dt;
    x.velocity += accel_world * dt;
    x.orientation = x.orientation * so3_exp(sample.gyro * dt);
  }
  return sim;
}

SensorStreams corrupt(const SensorStreams& clean, const NoiseParams& noise,
                      const ImuNoise& imu_noise, std::uint64_t seed, double initial_accel_bias,
                      double initial_gyro_bias, double doppler_noise) {
  SensorStreams out = clean;
  std::normal_distribution<double> unit(0.0, 1.0);

  std::mt19937_64 imu_rng(derive_seed(seed, 0));
  const auto draw = [&](double sigma) -> Vec3 {
    const double x = unit(imu_rng), y = unit(imu_rng), z = unit(imu_rng);
    return Vec3(x, y, z) * sigma;
  };
  Vec3 accel_bias = draw(initial_accel_bias);
  Vec3 gyro_bias = draw(initial_gyro_bias);
  for (std::size_t k = 0; k < out.imu.size(); ++k) {
    const std::size_t next = k + 1 < out.imu.size() ? k + 1 : k;
    const std::size_t prev = next == k ? (k > 0 ? k - 1 : k) : k;
    const double dt = out.imu[next].timestamp - out.imu[prev].timestamp;
    if (dt <= 0.0) continue;
    ImuSample& s = out.imu[k];
    s.gyro += gyro_bias + draw(imu_noise.gyro_noise_density / std::sqrt(dt));
    s.accel += accel_bias + draw(imu_noise.accel_noise_density / std::sqrt(dt));
    gyro_bias += draw(imu_noise.gyro_bias_random_walk * std::sqrt(dt));
    accel_bias += draw(imu_noise.accel_bias_random_walk * std::sqrt(dt));
  }

  for (std::size_t i = 0; i < out.scans.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, i + 1));
    for (PolarPoint& p : out.scans[i].points) {
      p = sample_noisy_point(p, noise, rng);
      if (doppler_noise > 0.0) p.doppler += doppler_noise * unit(rng);
    }
  }
  return out;
}

Simulation simulate(const Scenario& s) {
  Simulation sim = generate(s);
  if (!s.noiseless) {
    sim.streams = corrupt(sim.streams, s.noise, s.imu_noise, derive_seed(s.seed, 0xc0ffee),
                          s.initial_accel_bias, s.initial_gyro_bias, s.doppler_noise);
  }
  return sim;
}

}  // namespace rio
