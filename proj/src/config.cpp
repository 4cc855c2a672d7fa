#include "rio/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include <yaml-cpp/yaml.h>

namespace rio {

namespace {

struct Field {
  std::string key;
  std::function<void(const YAML::Node&, RunConfig&)> read;
  std::function<void(YAML::Emitter&, const RunConfig&)> write;
};

struct Section {
  std::string name;  // empty for top level
  std::vector<Field> fields;
};

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
Field scalar(std::string key, T RunConfig::*member) {
  return {key,
          [member](const YAML::Node& n, RunConfig& c) {
            if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
            c.*member = n.as<T>();
          },
          [member](YAML::Emitter& e, const RunConfig& c) {
            if constexpr (std::is_same_v<T, double>) {
              e << shortest(c.*member);
            } else {
              e << c.*member;
            }
          }};
}

template <std::size_t N>
Field array(std::string key, std::array<double, N> RunConfig::*member) {
  return {key,
          [member](const YAML::Node& n, RunConfig& c) {
            if (!n.IsSequence() || n.size() != N) throw YAML::BadConversion(n.Mark());
            for (std::size_t k = 0; k < N; ++k) (c.*member)[k] = n[k].as<double>();
          },
          [member](YAML::Emitter& e, const RunConfig& c) {
            e << YAML::Flow << YAML::BeginSeq;
            for (double v : c.*member) e << shortest(v);
            e << YAML::EndSeq;
          }};
}

template <typename E, typename Parse, typename Print>
Field enumeration(std::string key, E RunConfig::*member, Parse parse, Print print) {
  return {key,
          [member, parse, key](const YAML::Node& n, RunConfig& c) {
            if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
            const auto text = n.as<std::string>();
            const auto value = parse(text);
            if (!value) throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
            c.*member = *value;
          },
          [member, print](YAML::Emitter& e, const RunConfig& c) {
            e << std::string(print(c.*member));
          }};
}

template <typename T, typename Outer>
Field nested_scalar(std::string key, Outer RunConfig::*outer, T Outer::*member) {
  return {key,
          [outer, member](const YAML::Node& n, RunConfig& c) {
            if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
            c.*outer.*member = n.as<T>();
          },
          [outer, member](YAML::Emitter& e, const RunConfig& c) {
            e << shortest(c.*outer.*member);
          }};
}

const std::vector<Section>& schema() {
  using C = RunConfig;
  static const std::vector<Section> sections = {
      {"",
       {scalar("seed", &C::seed), scalar("runs", &C::runs)}},
      {"noise",
       {nested_scalar("sigma_range", &C::noise, &NoiseParams::sigma_range),
        nested_scalar("sigma_azimuth", &C::noise, &NoiseParams::sigma_azimuth),
        nested_scalar("sigma_elevation", &C::noise, &NoiseParams::sigma_elevation)}},
      {"imu",
       {nested_scalar("gyro_noise_density", &C::imu_noise, &ImuNoise::gyro_noise_density),
        nested_scalar("accel_noise_density", &C::imu_noise, &ImuNoise::accel_noise_density),
        nested_scalar("gyro_bias_random_walk", &C::imu_noise, &ImuNoise::gyro_bias_random_walk),
        nested_scalar("accel_bias_random_walk", &C::imu_noise, &ImuNoise::accel_bias_random_walk),
        scalar("gravity", &C::gravity)}},
      {"sensor",
       {nested_scalar("azimuth_fov", &C::fov, &FieldOfView::azimuth),
        nested_scalar("elevation_fov", &C::fov, &FieldOfView::elevation),
        nested_scalar("min_range", &C::fov, &FieldOfView::min_range),
        nested_scalar("max_range", &C::fov, &FieldOfView::max_range)}},
      {"extrinsics",
       {array("rotation", &C::extrinsic_rotation), array("translation", &C::extrinsic_translation)}},
      {"estimator",
       {scalar("alpha", &C::alpha),
        enumeration("ablation", &C::ablation, parse_ablation_mode,
                    [](AblationMode m) { return to_string(m); }),
        enumeration("matching", &C::matching, parse_matching_mode,
                    [](MatchingMode m) { return to_string(m); }),
        scalar("candidate_margin", &C::candidate_margin),
        scalar("euclidean_radius", &C::euclidean_radius),
        scalar("window_length", &C::window_length),
        scalar("min_observations", &C::min_observations),
        scalar("doppler_floor_sigma", &C::doppler_floor_sigma),
        scalar("gravity_alignment_window", &C::gravity_alignment_window),
        scalar("report_newest", &C::report_newest)}},
      {"solver",
       {scalar("max_iterations", &C::max_iterations),
        scalar("initial_lambda", &C::initial_lambda),
        scalar("lambda_increase", &C::lambda_increase),
        scalar("lambda_decrease", &C::lambda_decrease),
        scalar("max_retries", &C::max_retries),
        scalar("relative_cost_tolerance", &C::relative_cost_tolerance),
        scalar("step_tolerance", &C::step_tolerance),
        scalar("gauge_sigma_position", &C::gauge_sigma_position),
        scalar("gauge_sigma_yaw", &C::gauge_sigma_yaw),
        scalar("prior_sigma_tilt", &C::prior_sigma_tilt),
        scalar("prior_sigma_accel_bias", &C::prior_sigma_accel_bias),
        scalar("prior_sigma_gyro_bias", &C::prior_sigma_gyro_bias)}},
      {"scenario",
       {enumeration("shape", &C::shape, parse_trajectory_shape,
                    [](TrajectoryShape s) { return to_string(s); }),
        scalar("speed", &C::speed),
        scalar("radius", &C::radius),
        scalar("duration", &C::duration),
        scalar("height", &C::height),
        scalar("landmark_count", &C::landmark_count),
        array("box_min", &C::box_min),
        array("box_max", &C::box_max),
        scalar("scan_rate", &C::scan_rate),
        scalar("imu_rate", &C::imu_rate),
        scalar("scan_start", &C::scan_start),
        scalar("initial_accel_bias", &C::initial_accel_bias),
        scalar("initial_gyro_bias", &C::initial_gyro_bias),
        scalar("doppler_noise", &C::doppler_noise),
        scalar("noiseless", &C::noiseless)}},
      {"evaluation",
       {scalar("align", &C::align), scalar("max_time_difference", &C::max_time_difference)}},
  };
  return sections;
}

const Section* find_section(const std::string& name) {
  for (const Section& s : schema()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Field* find_field(const Section& section, const std::string& key) {
  for (const Field& f : section.fields) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::string qualified(const Section& s, const std::string& key) {
  return s.name.empty() ? key : s.name + "." + key;
}

void read_field(const Section& section, const std::string& key, const YAML::Node& value,
                RunConfig& c) {
  const Field* f = find_field(section, key);
  if (f == nullptr) throw ConfigError("unknown key '" + qualified(section, key) + "'");
  try {
    f->read(value, c);
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for key '" + qualified(section, key) + "'");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("invalid config: " + message);
}

}  // namespace

void RunConfig::validate() const {
  require(runs >= 1, "runs must be at least 1");
  require(noise.valid(), "noise sigmas must be positive");
  require(imu_noise.gyro_noise_density >= 0.0 && imu_noise.accel_noise_density >= 0.0 &&
              imu_noise.gyro_bias_random_walk >= 0.0 && imu_noise.accel_bias_random_walk >= 0.0,
          "imu noise densities must be non-negative");
  require(gravity > 0.0, "imu.gravity must be positive");
  require(fov.azimuth > 0.0 && fov.azimuth <= 2.0 * std::numbers::pi,
          "sensor.azimuth_fov must lie in (0, 2pi]");
  require(fov.elevation > 0.0 && fov.elevation <= std::numbers::pi,
          "sensor.elevation_fov must lie in (0, pi]");
  require(fov.min_range >= 0.0 && fov.min_range < fov.max_range,
          "sensor ranges must satisfy 0 <= min_range < max_range");
  const double qn = std::sqrt(extrinsic_rotation[0] * extrinsic_rotation[0] +
                              extrinsic_rotation[1] * extrinsic_rotation[1] +
                              extrinsic_rotation[2] * extrinsic_rotation[2] +
                              extrinsic_rotation[3] * extrinsic_rotation[3]);
  require(std::abs(qn - 1.0) < 1e-6, "extrinsics.rotation must be a unit quaternion");
  require(std::isfinite(alpha), "estimator.alpha must be finite");
  require(candidate_margin >= 0.0, "estimator.candidate_margin must be non-negative");
  require(euclidean_radius > 0.0, "estimator.euclidean_radius must be positive");
  require(window_length >= 1, "estimator.window_length must be at least 1");
  require(min_observations >= 1, "estimator.min_observations must be at least 1");
  require(doppler_floor_sigma > 0.0, "estimator.doppler_floor_sigma must be positive");
  require(gravity_alignment_window >= 0.0,
          "estimator.gravity_alignment_window must be non-negative");
  require(max_iterations >= 1, "solver.max_iterations must be at least 1");
  require(initial_lambda > 0.0, "solver.initial_lambda must be positive");
  require(lambda_increase > 1.0, "solver.lambda_increase must exceed 1");
  require(lambda_decrease > 0.0 && lambda_decrease < 1.0,
          "solver.lambda_decrease must lie in (0, 1)");
  require(max_retries >= 1, "solver.max_retries must be at least 1");
  require(relative_cost_tolerance >= 0.0 && step_tolerance >= 0.0,
          "solver tolerances must be non-negative");
  require(gauge_sigma_position > 0.0 && gauge_sigma_yaw > 0.0,
          "solver gauge sigmas must be positive");
  require(prior_sigma_tilt >= 0.0 && prior_sigma_accel_bias >= 0.0 && prior_sigma_gyro_bias >= 0.0,
          "solver prior sigmas must be non-negative (0 disables)");
  require(initial_accel_bias >= 0.0 && initial_gyro_bias >= 0.0 && doppler_noise >= 0.0,
          "scenario noise levels must be non-negative");
  require(max_time_difference > 0.0, "evaluation.max_time_difference must be positive");
  try {
    scenario().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

EstimatorConfig RunConfig::estimator() const {
  EstimatorConfig c;
  c.noise = noise;
  c.alpha = alpha;
  c.ablation = ablation;
  c.matching = matching;
  c.candidate_margin = candidate_margin;
  c.euclidean_radius = euclidean_radius;
  c.window_length = window_length;
  c.min_observations = min_observations;
  c.extrinsics.rotation = Rotation(Eigen::Quaterniond(
      extrinsic_rotation[0], extrinsic_rotation[1], extrinsic_rotation[2], extrinsic_rotation[3]));
  c.extrinsics.translation =
      Vec3(extrinsic_translation[0], extrinsic_translation[1], extrinsic_translation[2]);
  c.imu_noise = imu_noise;
  c.fov = fov;
  c.gravity = gravity;
  c.doppler_floor_sigma = doppler_floor_sigma;
  c.gravity_alignment_window = gravity_alignment_window;
  c.report_newest = report_newest;
  c.solver.max_iterations = max_iterations;
  c.solver.initial_lambda = initial_lambda;
  c.solver.lambda_increase = lambda_increase;
  c.solver.lambda_decrease = lambda_decrease;
  c.solver.max_retries = max_retries;
  c.solver.relative_cost_tolerance = relative_cost_tolerance;
  c.solver.step_tolerance = step_tolerance;
  c.solver.gauge_sigma_position = gauge_sigma_position;
  c.solver.gauge_sigma_yaw = gauge_sigma_yaw;
  c.solver.prior_sigma_tilt = prior_sigma_tilt;
  c.solver.prior_sigma_accel_bias = prior_sigma_accel_bias;
  c.solver.prior_sigma_gyro_bias = prior_sigma_gyro_bias;
  return c;
}

Scenario RunConfig::scenario() const {
  Scenario s;
  s.shape = shape;
  s.speed = speed;
  s.radius = radius;
  s.duration = duration;
  s.height = height;
  s.landmark_count = landmark_count;
  s.box_min = Vec3(box_min[0], box_min[1], box_min[2]);
  s.box_max = Vec3(box_max[0], box_max[1], box_max[2]);
  s.scan_rate = scan_rate;
  s.imu_rate = imu_rate;
  s.scan_start = scan_start;
  s.fov = fov;
  s.noise = noise;
  s.imu_noise = imu_noise;
  s.initial_accel_bias = initial_accel_bias;
  s.initial_gyro_bias = initial_gyro_bias;
  s.doppler_noise = doppler_noise;
  s.extrinsics = estimator().extrinsics;
  s.noiseless = noiseless;
  s.seed = seed;
  return s;
}

EvalOptions RunConfig::evaluation() const { return {align, max_time_difference}; }

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config is not valid YAML: " + e.msg);
  }
  RunConfig c;
  if (root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  const Section& top = *find_section("");
  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    if (find_field(top, key) != nullptr) {
      read_field(top, key, entry.second, c);
      continue;
    }
    const Section* section = key.empty() ? nullptr : find_section(key);
    if (section == nullptr) throw ConfigError("unknown key '" + key + "'");
    if (entry.second.IsNull()) continue;
    if (!entry.second.IsMap()) throw ConfigError("section '" + key + "' must be a mapping");
    for (const auto& inner : entry.second) {
      read_field(*section, inner.first.as<std::string>(), inner.second, c);
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const RunConfig& config) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  for (const Section& s : schema()) {
    if (!s.name.empty()) e << YAML::Key << s.name << YAML::Value << YAML::BeginMap;
    for (const Field& f : s.fields) {
      e << YAML::Key << f.key << YAML::Value;
      f.write(e, config);
    }
    if (!s.name.empty()) e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace rio
