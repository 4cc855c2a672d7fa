#include "rio/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <Eigen/Cholesky>

namespace rio {

namespace si = state_index;

int WindowState::index_of(std::int64_t frame_id) const {
  if (frames.empty()) return -1;
  const std::int64_t idx = frame_id - frames.front().id;
  if (idx < 0 || idx >= static_cast<std::int64_t>(frames.size())) return -1;
  return static_cast<int>(idx);
}

std::string_view to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::kConverged: return "converged";
    case SolverStatus::kMaxIterations: return "max-iterations";
    case SolverStatus::kDiverged: return "diverged";
  }
  return "converged";
}

double yaw_of(const Rotation& r) {
  const Mat3 m = r.matrix();
  return std::atan2(m(1, 0), m(0, 0));
}

namespace {

using Mat15x3 = Eigen::Matrix<double, 15, 3>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12x15 = Eigen::Matrix<double, 12, 15>;

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

Mat3 whitening(const Mat3& cov) {
  const Eigen::LLT<Mat3> llt(cov);
  return llt.matrixL().solve(Mat3::Identity());
}

struct Variables {
  std::vector<NavState> states;
  std::vector<Vec3> landmarks;
};

struct Problem {
  const WindowState& window;
  const FactorModel& model;
  const SolverOptions& options;

  std::vector<LandmarkId> landmark_ids;
  std::unordered_map<LandmarkId, int> landmark_index;
  std::vector<int> imu_frame;
  std::vector<int> doppler_frame;
  std::vector<int> point_frame;
  std::vector<int> point_landmark;

  std::vector<Mat15> imu_weight;
  std::vector<double> doppler_weight;
  std::vector<Mat3> point_weight;

  bool anchored = false;
  NavState anchor;
  double anchor_yaw = 0.0;
  double anchor_weight_position = 0.0;
  double anchor_weight_yaw = 0.0;
  double anchor_weight_tilt = 0.0;
  double anchor_weight_accel_bias = 0.0;
  double anchor_weight_gyro_bias = 0.0;

  Problem(const WindowState& w, const FactorModel& m, const SolverOptions& o)
      : window(w), model(m), options(o) {
    const FactorSet& f = window.factors;
    for (const auto& pf : f.point) {
      if (!landmark_index.count(pf.landmark)) {
        landmark_index.emplace(pf.landmark, 0);
        landmark_ids.push_back(pf.landmark);
      }
    }
    std::sort(landmark_ids.begin(), landmark_ids.end());
    for (std::size_t k = 0; k < landmark_ids.size(); ++k) {
      landmark_index[landmark_ids[k]] = static_cast<int>(k);
    }
    for (const auto& imu : f.imu) imu_frame.push_back(window.index_of(imu.frame_i));
    for (const auto& d : f.doppler) doppler_frame.push_back(window.index_of(d.frame));
    for (const auto& pf : f.point) {
      point_frame.push_back(window.index_of(pf.frame));
      point_landmark.push_back(landmark_index.at(pf.landmark));
    }
    compute_weights();
  }

  Variables snapshot() const {
    Variables v;
    for (const Frame& fr : window.frames) v.states.push_back(fr.state);
    for (LandmarkId id : landmark_ids) v.landmarks.push_back(window.map.at(id).position);
    return v;
  }

  void compute_weights() {
    const double inv_sqrt_scale = 1.0 / std::sqrt(options.covariance_scale);
    const FactorSet& f = window.factors;
    for (const auto& imu : f.imu) {
      Mat15 cov = imu.preint.covariance();
      cov.diagonal().array() += 1e-15;
      const Eigen::LLT<Mat15> llt(cov);
      imu_weight.push_back(inv_sqrt_scale * Mat15(llt.matrixL().solve(Mat15::Identity())));
    }
    for (std::size_t k = 0; k < f.doppler.size(); ++k) {
      const DopplerFactor& d = f.doppler[k];
      const NavState& x = window.frames[doppler_frame[k]].state;
      const double var = doppler_residual_covariance(x, d.gyro, d.point, model.extrinsics,
                                                     d.sigma, model.doppler_floor_variance);
      doppler_weight.push_back(inv_sqrt_scale / std::sqrt(var));
    }
    for (std::size_t k = 0; k < f.point.size(); ++k) {
      const NavState& x = window.frames[point_frame[k]].state;
      const Mat3 cov = point_residual_covariance(x, model.extrinsics, f.point[k].sigma);
      point_weight.push_back(inv_sqrt_scale * whitening(cov));
    }
    if (options.gauge == Gauge::kAnchorOldest && !window.frames.empty()) {
      anchored = true;
      anchor = window.frames.front().state;
      anchor_yaw = yaw_of(anchor.orientation);
      const auto weight = [&](double sigma) {
        return sigma > 0.0 && std::isfinite(sigma) ? inv_sqrt_scale / sigma : 0.0;
      };
      anchor_weight_position = inv_sqrt_scale / options.gauge_sigma_position;
      anchor_weight_yaw = inv_sqrt_scale / options.gauge_sigma_yaw;
      anchor_weight_tilt = weight(options.prior_sigma_tilt);
      anchor_weight_accel_bias = weight(options.prior_sigma_accel_bias);
      anchor_weight_gyro_bias = weight(options.prior_sigma_gyro_bias);
    }
  }

  // Rows: position (3), yaw, world-frame roll/pitch error (2), accel bias (3), gyro bias (3).
  Vec12 gauge_residual(const NavState& x) const {
    Vec12 r;
    r.segment<3>(0) = anchor_weight_position * (x.position - anchor.position);
    r(3) = anchor_weight_yaw * wrap_angle(yaw_of(x.orientation) - anchor_yaw);
    const Vec3 tilt = so3_log(x.orientation * anchor.orientation.inverse());
    r.segment<2>(4) = anchor_weight_tilt * tilt.head<2>();
    r.segment<3>(6) = anchor_weight_accel_bias * (x.accel_bias - anchor.accel_bias);
    r.segment<3>(9) = anchor_weight_gyro_bias * (x.gyro_bias - anchor.gyro_bias);
    return r;
  }

  Mat12x15 gauge_jacobian(const NavState& x) const {
    const Mat3 m = x.orientation.matrix();
    const double den = m(0, 0) * m(0, 0) + m(1, 0) * m(1, 0);
    Mat12x15 j = Mat12x15::Zero();
    j.block<3, 3>(0, si::kPosition) = anchor_weight_position * Mat3::Identity();
    j(3, si::kOrientation + 1) = anchor_weight_yaw * (m(1, 0) * m(0, 2) - m(0, 0) * m(1, 2)) / den;
    j(3, si::kOrientation + 2) = anchor_weight_yaw * (m(0, 0) * m(1, 1) - m(1, 0) * m(0, 1)) / den;
    if (anchor_weight_tilt > 0.0) {
      // R Exp(d) R0^T = (R R0^T) Exp(R0 d)
      const Vec3 tilt = so3_log(x.orientation * anchor.orientation.inverse());
      const Mat3 d = so3_right_jacobian_inverse(tilt) * anchor.orientation.matrix();
      j.block<2, 3>(4, si::kOrientation) = anchor_weight_tilt * d.topRows<2>();
    }
    j.block<3, 3>(6, si::kAccelBias) = anchor_weight_accel_bias * Mat3::Identity();
    j.block<3, 3>(9, si::kGyroBias) = anchor_weight_gyro_bias * Mat3::Identity();
    return j;
  }

  CostBreakdown cost(const Variables& v) const {
    CostBreakdown c;
    const FactorSet& f = window.factors;
    for (std::size_t k = 0; k < f.imu.size(); ++k) {
      const int i = imu_frame[k];
      const Vec15 r = imu_residual(f.imu[k].preint, v.states[i], v.states[i + 1],
                                   model.gravity).residual;
      c.imu += (imu_weight[k] * r).squaredNorm();
    }
    for (std::size_t k = 0; k < f.doppler.size(); ++k) {
      const DopplerFactor& d = f.doppler[k];
      const double r = doppler_residual(v.states[doppler_frame[k]], d.gyro, d.point,
                                        model.extrinsics);
      c.doppler += std::pow(doppler_weight[k] * r, 2);
    }
    for (std::size_t k = 0; k < f.point.size(); ++k) {
      const Vec3 r = point_residual(v.states[point_frame[k]], v.landmarks[point_landmark[k]],
                                    f.point[k].point, model.extrinsics);
      c.point += (point_weight[k] * r).squaredNorm();
    }
    if (anchored) c.gauge = gauge_residual(v.states.front()).squaredNorm();
    return c;
  }
};

struct LandmarkCoupling {
  int frame = 0;
  Mat15x3 block = Mat15x3::Zero();
};

struct Linearization {
  Eigen::MatrixXd hss;
  Eigen::VectorXd gs;
  std::vector<Mat3> hll;
  std::vector<Vec3> gl;
  std::vector<std::vector<LandmarkCoupling>> hsl;
  std::vector<bool> fixed;
};

Linearization linearize(const Problem& pb, const Variables& v) {
  const int nf = static_cast<int>(v.states.size());
  const int nl = static_cast<int>(v.landmarks.size());
  const int n = nf * si::kDim;
  Linearization lin;
  lin.hss = Eigen::MatrixXd::Zero(n, n);
  lin.gs = Eigen::VectorXd::Zero(n);
  lin.hll.assign(nl, Mat3::Zero());
  lin.gl.assign(nl, Vec3::Zero());
  lin.hsl.resize(nl);
  lin.fixed.assign(n, false);

  const FactorSet& f = pb.window.factors;
  const auto frame_block = [&](int a, int b) {
    return lin.hss.block<15, 15>(a * si::kDim, b * si::kDim);
  };
  const auto grad_block = [&](int a) { return lin.gs.segment<15>(a * si::kDim); };

  for (std::size_t k = 0; k < f.imu.size(); ++k) {
    const int i = pb.imu_frame[k];
    const int j = i + 1;
    const ImuResidual res = imu_residual(f.imu[k].preint, v.states[i], v.states[j],
                                         pb.model.gravity);
    const Mat15& w = pb.imu_weight[k];
    const Vec15 r = w * res.residual;
    const Mat15 ji = w * res.jacobian_i;
    const Mat15 jj = w * res.jacobian_j;
    frame_block(i, i) += ji.transpose() * ji;
    frame_block(j, j) += jj.transpose() * jj;
    frame_block(i, j) += ji.transpose() * jj;
    frame_block(j, i) += jj.transpose() * ji;
    grad_block(i) += ji.transpose() * r;
    grad_block(j) += jj.transpose() * r;
  }

  for (std::size_t k = 0; k < f.doppler.size(); ++k) {
    const DopplerFactor& d = f.doppler[k];
    const int i = pb.doppler_frame[k];
    const double w = pb.doppler_weight[k];
    const double r = w * doppler_residual(v.states[i], d.gyro, d.point, pb.model.extrinsics);
    const Row15 j = w * doppler_jacobian(v.states[i], d.gyro, d.point, pb.model.extrinsics);
    frame_block(i, i) += j.transpose() * j;
    grad_block(i) += j.transpose() * r;
  }

  for (std::size_t k = 0; k < f.point.size(); ++k) {
    const PointFactor& pf = f.point[k];
    const int i = pb.point_frame[k];
    const int l = pb.point_landmark[k];
    const Mat3& w = pb.point_weight[k];
    const Vec3 r = w * point_residual(v.states[i], v.landmarks[l], pf.point, pb.model.extrinsics);
    const Mat3x15 js = w * point_jacobian(v.states[i], pf.point, pb.model.extrinsics);
    const Mat3& jl = w;
    frame_block(i, i) += js.transpose() * js;
    grad_block(i) += js.transpose() * r;
    lin.hll[l] += jl.transpose() * jl;
    lin.gl[l] += jl.transpose() * r;
    const Mat15x3 coupling = js.transpose() * jl;
    auto& couplings = lin.hsl[l];
    auto it = std::find_if(couplings.begin(), couplings.end(),
                           [i](const LandmarkCoupling& c) { return c.frame == i; });
    if (it == couplings.end()) {
      couplings.push_back({i, coupling});
    } else {
      it->block += coupling;
    }
  }

  if (pb.anchored) {
    const Vec12 r = pb.gauge_residual(v.states.front());
    const Mat12x15 j = pb.gauge_jacobian(v.states.front());
    frame_block(0, 0) += j.transpose() * j;
    grad_block(0) += j.transpose() * r;
  }

  if (pb.options.gauge == Gauge::kFixOldestPose && nf > 0) {
    for (int c = 0; c < 6; ++c) lin.fixed[c] = true;
  }
  for (int c = 0; c < n; ++c) {
    if (!lin.fixed[c]) continue;
    lin.hss.row(c).setZero();
    lin.hss.col(c).setZero();
    lin.hss(c, c) = 1.0;
    lin.gs(c) = 0.0;
  }
  for (auto& couplings : lin.hsl) {
    for (auto& c : couplings) {
      for (int r = 0; r < si::kDim; ++r) {
        if (lin.fixed[c.frame * si::kDim + r]) c.block.row(r).setZero();
      }
    }
  }
  return lin;
}

/// Solves the damped normal equations; returns false if the reduced system is
/// not positive definite.
bool solve_step(const Linearization& lin, double lambda, Eigen::VectorXd& ds,
                std::vector<Vec3>& dl) {
  const int n = static_cast<int>(lin.gs.size());
  Eigen::MatrixXd s = lin.hss;
  for (int c = 0; c < n; ++c) s(c, c) += lambda;
  Eigen::VectorXd rhs = -lin.gs;

  const std::size_t nl = lin.hll.size();
  std::vector<Mat3> hll_inv(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    Mat3 h = lin.hll[l];
    for (int c = 0; c < 3; ++c) h(c, c) += lambda;
    const Eigen::LLT<Mat3> llt(h);
    if (llt.info() != Eigen::Success) return false;
    hll_inv[l] = llt.solve(Mat3::Identity());
    const auto& couplings = lin.hsl[l];
    for (const auto& a : couplings) {
      const Mat15x3 wa = a.block * hll_inv[l];
      rhs.segment<15>(a.frame * si::kDim) += wa * lin.gl[l];
      for (const auto& b : couplings) {
        s.block<15, 15>(a.frame * si::kDim, b.frame * si::kDim) -= wa * b.block.transpose();
      }
    }
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success) return false;
  ds = ldlt.solve(rhs);
  if (!ds.allFinite()) return false;

  dl.assign(nl, Vec3::Zero());
  for (std::size_t l = 0; l < nl; ++l) {
    Vec3 b = -lin.gl[l];
    for (const auto& a : lin.hsl[l]) b -= a.block.transpose() * ds.segment<15>(a.frame * si::kDim);
    dl[l] = hll_inv[l] * b;
  }
  return true;
}

Variables apply_step(const Variables& v, const Eigen::VectorXd& ds, const std::vector<Vec3>& dl) {
  Variables out;
  out.states.reserve(v.states.size());
  for (std::size_t i = 0; i < v.states.size(); ++i) {
    out.states.push_back(retract(v.states[i], ds.segment<15>(i * si::kDim)));
  }
  out.landmarks.reserve(v.landmarks.size());
  for (std::size_t l = 0; l < v.landmarks.size(); ++l) out.landmarks.push_back(v.landmarks[l] + dl[l]);
  return out;
}

double step_norm(const Eigen::VectorXd& ds, const std::vector<Vec3>& dl) {
  double sq = ds.squaredNorm();
  for (const Vec3& d : dl) sq += d.squaredNorm();
  return std::sqrt(sq);
}

/// Decrease of the undamped quadratic model along the step.
double predicted_decrease(const Linearization& lin, const Eigen::VectorXd& ds,
                          const std::vector<Vec3>& dl) {
  double gd = lin.gs.dot(ds);
  double dhd = ds.dot(lin.hss * ds);
  for (std::size_t l = 0; l < dl.size(); ++l) {
    gd += lin.gl[l].dot(dl[l]);
    dhd += dl[l].dot(lin.hll[l] * dl[l]);
    for (const auto& a : lin.hsl[l]) {
      dhd += 2.0 * ds.segment<15>(a.frame * si::kDim).dot(a.block * dl[l]);
    }
  }
  return -(2.0 * gd + dhd);
}

void write_back(WindowState& window, const Problem& pb, const Variables& v) {
  for (std::size_t i = 0; i < v.states.size(); ++i) window.frames[i].state = v.states[i];
  for (std::size_t l = 0; l < v.landmarks.size(); ++l) {
    window.map.set_position(pb.landmark_ids[l], v.landmarks[l]);
  }
}

}  // namespace

CostBreakdown evaluate_cost(const WindowState& window, const FactorModel& model,
                            const SolverOptions& options) {
  const Problem pb(window, model, options);
  return pb.cost(pb.snapshot());
}

SolverReport solve(WindowState& window, const FactorModel& model, const SolverOptions& options) {
  SolverReport report;
  if (window.frames.empty()) {
    report.converged = true;
    return report;
  }
  const Problem pb(window, model, options);
  Variables current = pb.snapshot();
  CostBreakdown breakdown = pb.cost(current);
  report.initial_breakdown = breakdown;
  report.initial_cost = breakdown.total();
  double cost = report.initial_cost;
  double lambda = options.initial_lambda;

  report.status = SolverStatus::kMaxIterations;
  if (!(cost > 0.0)) report.status = SolverStatus::kConverged;

  while (report.status == SolverStatus::kMaxIterations &&
         report.iterations < options.max_iterations) {
    const Linearization lin = linearize(pb, current);
    const bool flat = lin.gs.lpNorm<Eigen::Infinity>() == 0.0 &&
                      std::all_of(lin.gl.begin(), lin.gl.end(),
                                  [](const Vec3& g) { return g.isZero(0.0); });
    if (flat) {
      report.status = SolverStatus::kConverged;
      break;
    }
    bool accepted = false;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      Eigen::VectorXd ds;
      std::vector<Vec3> dl;
      if (solve_step(lin, lambda, ds, dl)) {
        if (predicted_decrease(lin, ds, dl) <= options.relative_cost_tolerance * cost ||
            step_norm(ds, dl) < options.step_tolerance) {
          // Already at the minimum to working precision.
          report.status = SolverStatus::kConverged;
          accepted = true;
          break;
        }
        Variables candidate = apply_step(current, ds, dl);
        const CostBreakdown cb = pb.cost(candidate);
        const double new_cost = cb.total();
        if (std::isfinite(new_cost) && new_cost < cost) {
          const double decrease = (cost - new_cost) / cost;
          const double norm = step_norm(ds, dl);
          current = std::move(candidate);
          breakdown = cb;
          cost = new_cost;
          lambda = std::max(lambda * options.lambda_decrease, 1e-12);
          accepted = true;
          ++report.iterations;
          if (decrease < options.relative_cost_tolerance || norm < options.step_tolerance) {
            report.status = SolverStatus::kConverged;
          }
          break;
        }
      }
      lambda *= options.lambda_increase;
    }
    if (!accepted) {
      // No damping level reduces the cost. After accepted steps this is the
      // numerical floor of a converged solve.
      report.status = report.iterations == 0 ? SolverStatus::kDiverged : SolverStatus::kConverged;
      break;
    }
  }

  write_back(window, pb, current);
  report.final_breakdown = breakdown;
  report.final_cost = cost;
  report.converged = report.status == SolverStatus::kConverged;
  return report;
}

}  // namespace rio
