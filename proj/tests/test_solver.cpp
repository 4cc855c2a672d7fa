#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include <Eigen/Cholesky>

#include "oracles.hpp"
#include "rio/solver.hpp"
#include "window_fixture.hpp"

using namespace rio;

namespace {

const NoiseParams kNoise{0.1, 0.01, 0.01};

FactorModel default_model() { return FactorModel{}; }

std::set<std::int64_t> first_labels(const Simulation& sim, std::size_t scan, std::size_t n) {
  std::set<std::int64_t> out;
  for (std::int64_t l : sim.streams.scans[scan].labels) {
    if (out.size() == n) break;
    out.insert(l);
  }
  return out;
}

void perturb(WindowState& w, std::mt19937_64& rng, double scale, bool keep_oldest_pose) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < w.frames.size(); ++i) {
    Vec15 d;
    for (int c = 0; c < 15; ++c) d(c) = g(rng);
    d.segment<3>(state_index::kAccelBias) *= 0.01;
    d.segment<3>(state_index::kGyroBias) *= 0.001;
    d.segment<3>(state_index::kOrientation) *= 0.02;
    if (i == 0 && keep_oldest_pose) d.head<6>().setZero();
    w.frames[i].state = retract(w.frames[i].state, scale * d);
  }
  std::vector<std::pair<LandmarkId, Vec3>> moved;
  for (const auto& [id, lm] : w.map.landmarks()) {
    moved.emplace_back(id, lm.position + scale * Vec3(g(rng), g(rng), g(rng)));
  }
  for (const auto& [id, p] : moved) w.map.set_position(id, p);
}

/// Dense Levenberg-Marquardt on the stacked whitened residual with numeric
/// Jacobians. The oldest frame's position and orientation are held fixed.
class DenseReferenceSolver {
 public:
  DenseReferenceSolver(const WindowState& w, const FactorModel& m) : w_(w), m_(m) {
    for (const auto& f : w.factors.imu) {
      Mat15 cov = f.preint.covariance();
      cov.diagonal().array() += 1e-15;
      imu_info_.push_back(Mat15(Eigen::LLT<Mat15>(cov).matrixL().solve(Mat15::Identity())));
    }
    for (const auto& d : w.factors.doppler) {
      const NavState& x = w.frames[w.index_of(d.frame)].state;
      const double var = doppler_residual_covariance(x, d.gyro, d.point, m.extrinsics, d.sigma,
                                                     m.doppler_floor_variance);
      doppler_info_.push_back(1.0 / std::sqrt(var));
    }
    for (const auto& p : w.factors.point) {
      const NavState& x = w.frames[w.index_of(p.frame)].state;
      const Mat3 cov = point_residual_covariance(x, m.extrinsics, p.sigma);
      point_info_.push_back(Mat3(Eigen::LLT<Mat3>(cov).matrixL().solve(Mat3::Identity())));
    }
    for (const auto& p : w.factors.point) {
      if (!slot_.count(p.landmark)) {
        const int k = static_cast<int>(slot_.size());
        slot_[p.landmark] = k;
      }
    }
  }

  struct Estimate {
    std::vector<NavState> states;
    std::vector<Vec3> landmarks;
  };

  Estimate initial() const {
    Estimate e;
    for (const auto& f : w_.frames) e.states.push_back(f.state);
    e.landmarks.resize(slot_.size());
    for (const auto& [id, k] : slot_) e.landmarks[k] = w_.map.at(id).position;
    return e;
  }

  int dim() const { return 9 + 15 * (static_cast<int>(w_.frames.size()) - 1) + 3 * static_cast<int>(slot_.size()); }

  Estimate plus(const Estimate& e, const Eigen::VectorXd& dx) const {
    Estimate out = e;
    Vec15 d0 = Vec15::Zero();
    d0.tail<9>() = dx.head<9>();
    out.states[0] = retract(e.states[0], d0);
    int o = 9;
    for (std::size_t i = 1; i < e.states.size(); ++i, o += 15) {
      out.states[i] = retract(e.states[i], dx.segment<15>(o));
    }
    for (auto& l : out.landmarks) {
      l += dx.segment<3>(o);
      o += 3;
    }
    return out;
  }

  Eigen::VectorXd residual(const Estimate& e) const {
    std::vector<double> r;
    for (std::size_t k = 0; k < w_.factors.imu.size(); ++k) {
      const auto& f = w_.factors.imu[k];
      const int i = w_.index_of(f.frame_i);
      const Vec15 v = imu_info_[k] * imu_residual(f.preint, e.states[i], e.states[i + 1], m_.gravity).residual;
      r.insert(r.end(), v.data(), v.data() + 15);
    }
    for (std::size_t k = 0; k < w_.factors.doppler.size(); ++k) {
      const auto& d = w_.factors.doppler[k];
      r.push_back(doppler_info_[k] *
                  doppler_residual(e.states[w_.index_of(d.frame)], d.gyro, d.point, m_.extrinsics));
    }
    for (std::size_t k = 0; k < w_.factors.point.size(); ++k) {
      const auto& p = w_.factors.point[k];
      const Vec3 v = point_info_[k] * point_residual(e.states[w_.index_of(p.frame)],
                                                     e.landmarks[slot_.at(p.landmark)], p.point,
                                                     m_.extrinsics);
      r.insert(r.end(), v.data(), v.data() + 3);
    }
    return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
  }

  Estimate solve() const {
    Estimate x = initial();
    double mu = 1e-6;
    Eigen::VectorXd r = residual(x);
    for (int it = 0; it < 200; ++it) {
      const int n = dim();
      Eigen::MatrixXd j(r.size(), n);
      const double h = 1e-7;
      for (int c = 0; c < n; ++c) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        d(c) = h;
        j.col(c) = (residual(plus(x, d)) - residual(plus(x, -d))) / (2 * h);
      }
      const Eigen::MatrixXd h_mat = j.transpose() * j;
      const Eigen::VectorXd g = j.transpose() * r;
      bool moved = false;
      for (int attempt = 0; attempt < 20 && !moved; ++attempt) {
        Eigen::MatrixXd a = h_mat;
        a.diagonal().array() += mu;
        const Eigen::VectorXd dx = a.ldlt().solve(-g);
        const Estimate cand = plus(x, dx);
        const Eigen::VectorXd rc = residual(cand);
        if (rc.squaredNorm() <= r.squaredNorm()) {
          x = cand;
          r = rc;
          mu = std::max(mu * 0.1, 1e-12);
          moved = true;
          if (dx.norm() < 1e-11) return x;
        } else {
          mu *= 10.0;
        }
      }
      if (!moved) return x;
    }
    return x;
  }

  const std::map<LandmarkId, int>& slots() const { return slot_; }

 private:
  const WindowState& w_;
  const FactorModel& m_;
  std::vector<Mat15> imu_info_;
  std::vector<double> doppler_info_;
  std::vector<Mat3> point_info_;
  std::map<LandmarkId, int> slot_;
};

}  // namespace

TEST(Solver, ZeroResidualWindowIsLeftAlone)
{
  const Simulation sim = generate(fixture::short_circle(true));
  WindowState w = fixture::make_window(sim, 2, 4, kNoise);
  const WindowState before = w;
  const SolverReport report = solve(w, default_model(), SolverOptions{});
  EXPECT_EQ(report.status, SolverStatus::kConverged);
  EXPECT_EQ(report.iterations, 0);
  EXPECT_LT(report.initial_cost, 1e-12);
  for (std::size_t i = 0; i < w.frames.size(); ++i) {
    EXPECT_EQ(w.frames[i].state.position, before.frames[i].state.position);
    EXPECT_EQ(w.frames[i].state.velocity, before.frames[i].state.velocity);
    EXPECT_EQ(w.frames[i].state.orientation.quaternion().coeffs(),
              before.frames[i].state.orientation.quaternion().coeffs());
  }
}

TEST(Solver, LinearProblemConvergesInOneIteration)
{
  // One frame with a fixed pose: point factors are then linear in the
  // landmarks. Each landmark is observed twice so the optimum keeps a
  // nonzero cost.
  const Simulation sim = simulate(fixture::short_circle(false, 3));
  WindowState w = fixture::make_window(sim, 0, 1, kNoise);
  w.factors.doppler.clear();
  const auto original = w.factors.point;
  std::mt19937_64 rng(1);
  for (const PointFactor& f : original) {
    PointFactor twin = f;
    twin.point = sample_noisy_point(f.point, kNoise, rng);
    w.factors.point.push_back(twin);
  }
  SolverOptions options;
  options.gauge = Gauge::kFixOldestPose;
  const SolverReport report = solve(w, default_model(), options);
  EXPECT_EQ(report.status, SolverStatus::kConverged);
  EXPECT_EQ(report.iterations, 1);

  // Closed form: information-weighted mean of the two world points.
  const NavState& x = w.frames[0].state;
  for (std::size_t k = 0; k < original.size(); ++k) {
    const PointFactor& a = w.factors.point[k];
    const PointFactor& b = w.factors.point[k + original.size()];
    const Vec3 pa = -point_residual(x, Vec3::Zero(), a.point, Extrinsics{});
    const Vec3 pb = -point_residual(x, Vec3::Zero(), b.point, Extrinsics{});
    const Mat3 ia = point_residual_covariance(x, Extrinsics{}, a.sigma).inverse();
    const Mat3 ib = point_residual_covariance(x, Extrinsics{}, b.sigma).inverse();
    const Vec3 expected = (ia + ib).inverse() * (ia * pa + ib * pb);
    EXPECT_LT((w.map.at(a.landmark).position - expected).norm(), 1e-6);
  }
}

TEST(Solver, MatchesDenseReferenceSolver)
{
  for (std::uint64_t seed : {1, 2, 3}) {
    const Simulation sim = simulate(fixture::short_circle(false, seed));
    WindowState w = fixture::make_window(sim, 4, 3, kNoise, first_labels(sim, 4, 20));
    std::mt19937_64 rng(seed);
    perturb(w, rng, 0.05, true);

    const FactorModel model = default_model();
    const DenseReferenceSolver reference(w, model);
    const auto expected = reference.solve();

    SolverOptions options;
    options.gauge = Gauge::kFixOldestPose;
    options.max_iterations = 200;
    options.relative_cost_tolerance = 1e-16;
    options.step_tolerance = 1e-13;
    const SolverReport report = solve(w, model, options);
    EXPECT_TRUE(report.converged);
    EXPECT_LE(report.final_cost, report.initial_cost);
    for (std::size_t i = 0; i < w.frames.size(); ++i) {
      const NavState& a = w.frames[i].state;
      const NavState& b = expected.states[i];
      EXPECT_LT((a.position - b.position).norm(), 1e-6) << "seed " << seed << " frame " << i;
      EXPECT_LT((a.velocity - b.velocity).norm(), 1e-6);
      EXPECT_LT(so3_log(a.orientation.inverse() * b.orientation).norm(), 1e-6);
      EXPECT_LT((a.accel_bias - b.accel_bias).norm(), 1e-6);
      EXPECT_LT((a.gyro_bias - b.gyro_bias).norm(), 1e-6);
    }
    for (const auto& [id, k] : reference.slots()) {
      EXPECT_LT((w.map.at(id).position - expected.landmarks[k]).norm(), 1e-6);
    }
  }
}

TEST(Solver, GlobalCovarianceScaleLeavesOptimumUnchanged)
{
  const Simulation sim = simulate(fixture::short_circle(false, 4));
  WindowState w = fixture::make_window(sim, 3, 5, kNoise);
  std::mt19937_64 rng(4);
  perturb(w, rng, 0.02, false);
  WindowState scaled = w;

  SolverOptions options;
  options.max_iterations = 200;
  options.relative_cost_tolerance = 1e-16;
  options.step_tolerance = 1e-13;
  solve(w, default_model(), options);
  options.covariance_scale = 7.3;
  solve(scaled, default_model(), options);
  for (std::size_t i = 0; i < w.frames.size(); ++i) {
    EXPECT_LT((w.frames[i].state.position - scaled.frames[i].state.position).norm(), 1e-8);
    EXPECT_LT(so3_log(w.frames[i].state.orientation.inverse() * scaled.frames[i].state.orientation).norm(),
              1e-8);
    EXPECT_LT((w.frames[i].state.velocity - scaled.frames[i].state.velocity).norm(), 1e-8);
  }
}

TEST(Solver, CostBreakdownAndDescent)
{
  const Simulation sim = simulate(fixture::short_circle(false, 5));
  WindowState w = fixture::make_window(sim, 2, 6, kNoise);
  std::mt19937_64 rng(5);
  perturb(w, rng, 0.05, false);
  const FactorModel model = default_model();
  const CostBreakdown before = evaluate_cost(w, model, SolverOptions{});
  const SolverReport report = solve(w, model, SolverOptions{});
  EXPECT_NEAR(report.initial_cost, before.total(), 1e-9 * before.total());
  EXPECT_GT(before.imu, 0.0);
  EXPECT_GT(before.doppler, 0.0);
  EXPECT_GT(before.point, 0.0);
  EXPECT_LT(report.final_cost, report.initial_cost);
  EXPECT_NEAR(report.final_breakdown.total(), report.final_cost, 1e-12 * report.final_cost);
}

TEST(Solver, GaugeAnchorHoldsOldestPose)
{
  const Simulation sim = simulate(fixture::short_circle(false, 6));
  WindowState w = fixture::make_window(sim, 2, 5, kNoise);
  std::mt19937_64 rng(6);
  perturb(w, rng, 0.02, false);
  const NavState oldest = w.frames[0].state;
  solve(w, default_model(), SolverOptions{});
  EXPECT_LT((w.frames[0].state.position - oldest.position).norm(), 1e-2);
  EXPECT_LT(std::abs(std::remainder(yaw_of(w.frames[0].state.orientation) - yaw_of(oldest.orientation),
                                    2 * oracle::kPi)),
            1e-2);

  WindowState fixed = fixture::make_window(sim, 2, 5, kNoise);
  std::mt19937_64 rng2(6);
  perturb(fixed, rng2, 0.02, false);
  const NavState oldest_fixed = fixed.frames[0].state;
  SolverOptions options;
  options.gauge = Gauge::kFixOldestPose;
  solve(fixed, default_model(), options);
  EXPECT_EQ(fixed.frames[0].state.position, oldest_fixed.position);
}

TEST(Solver, EmptyWindow)
{
  WindowState w;
  const SolverReport report = solve(w, default_model(), SolverOptions{});
  EXPECT_TRUE(report.converged);
  EXPECT_EQ(report.iterations, 0);
}

TEST(Solver, StatusNames)
{
  EXPECT_EQ(to_string(SolverStatus::kConverged), "converged");
  EXPECT_EQ(to_string(SolverStatus::kMaxIterations), "max-iterations");
  EXPECT_EQ(to_string(SolverStatus::kDiverged), "diverged");
}

TEST(Solver, YawOf)
{
  EXPECT_NEAR(yaw_of(so3_exp(Vec3(0, 0, 1.2))), 1.2, 1e-15);
  EXPECT_NEAR(yaw_of(so3_exp(Vec3(0, 0, -2.5)) * so3_exp(Vec3(0.1, 0, 0))), -2.5, 1e-12);
}
