#include "rio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

namespace rio {

namespace {

Eigen::Isometry3d to_isometry(const StampedPose& p) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = p.orientation.normalized().toRotationMatrix();
  t.translation() = p.position;
  return t;
}

double angle_deg(const Eigen::Matrix3d& r) {
  const Eigen::Quaterniond q(r);
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w())) * 180.0 / std::numbers::pi;
}

struct Paired {
  std::vector<Eigen::Isometry3d> reference;
  std::vector<Eigen::Isometry3d> estimate;
};

Paired pair_up(const Trajectory& estimate, const Trajectory& reference, double max_diff) {
  Paired out;
  for (const auto& [i, j] : associate_by_time(reference, estimate, max_diff)) {
    out.reference.push_back(to_isometry(reference[i]));
    out.estimate.push_back(to_isometry(estimate[j]));
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> associate_by_time(const Trajectory& reference,
                                                                   const Trajectory& estimate,
                                                                   double max_diff) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (estimate.empty()) return out;
  const bool sorted = std::is_sorted(estimate.begin(), estimate.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp;
  });
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = reference[i].timestamp;
    if (!sorted) {
      std::size_t best = 0;
      double best_diff = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < estimate.size(); ++j) {
        const double d = std::abs(estimate[j].timestamp - t);
        if (d < best_diff) {
          best_diff = d;
          best = j;
        }
      }
      if (best_diff <= max_diff) out.emplace_back(i, best);
      continue;
    }
    if (t < estimate.front().timestamp - max_diff || t > estimate.back().timestamp + max_diff) {
      continue;
    }
    auto it = std::upper_bound(estimate.begin(), estimate.end(), t,
                               [](double v, const StampedPose& p) { return v < p.timestamp; });
    std::size_t upper = static_cast<std::size_t>(it - estimate.begin());
    if (upper >= estimate.size()) upper = estimate.size() - 1;
    const double diff_ub = estimate[upper].timestamp - t;
    const double diff_lb =
        upper > 0 ? t - estimate[upper - 1].timestamp : std::numeric_limits<double>::infinity();
    if (diff_ub <= max_diff && diff_ub < diff_lb) {
      out.emplace_back(i, upper);
    } else if (diff_lb <= max_diff && diff_lb <= diff_ub) {
      out.emplace_back(i, upper - 1);
    }
  }
  return out;
}

Eigen::Isometry3d align_rigid(const std::vector<Eigen::Vector3d>& estimate,
                              const std::vector<Eigen::Vector3d>& reference) {
  const auto n = static_cast<Eigen::Index>(estimate.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    src.col(k) = estimate[k];
    dst.col(k) = reference[k];
  }
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (n == 0) return t;
  t.matrix() = Eigen::umeyama(src, dst, false);
  return t;
}

PoseError ape_rmse(const Trajectory& estimate, const Trajectory& reference,
                   const EvalOptions& options) {
  Paired p = pair_up(estimate, reference, options.max_time_difference);
  if (p.reference.empty()) throw EvaluationError("no overlapping timestamps between trajectories");
  if (options.align) {
    std::vector<Eigen::Vector3d> src, dst;
    for (std::size_t k = 0; k < p.reference.size(); ++k) {
      src.push_back(p.estimate[k].translation());
      dst.push_back(p.reference[k].translation());
    }
    const Eigen::Isometry3d t = align_rigid(src, dst);
    for (auto& e : p.estimate) e = t * e;
  }
  double sum_t = 0.0, sum_r = 0.0;
  for (std::size_t k = 0; k < p.reference.size(); ++k) {
    const Eigen::Isometry3d e = p.reference[k].inverse() * p.estimate[k];
    sum_t += (p.estimate[k].translation() - p.reference[k].translation()).squaredNorm();
    const double a = angle_deg(e.linear());
    sum_r += a * a;
  }
  const double n = static_cast<double>(p.reference.size());
  return {std::sqrt(sum_t / n), std::sqrt(sum_r / n)};
}

PoseError rpe_rmse(const Trajectory& estimate, const Trajectory& reference,
                   const EvalOptions& options) {
  const Paired p = pair_up(estimate, reference, options.max_time_difference);
  if (p.reference.size() < 2) throw EvaluationError("fewer than two paired poses for RPE");
  double sum_t = 0.0, sum_r = 0.0;
  for (std::size_t k = 0; k + 1 < p.reference.size(); ++k) {
    const Eigen::Isometry3d dr = p.reference[k].inverse() * p.reference[k + 1];
    const Eigen::Isometry3d de = p.estimate[k].inverse() * p.estimate[k + 1];
    const Eigen::Isometry3d e = dr.inverse() * de;
    sum_t += e.translation().squaredNorm();
    const double a = angle_deg(e.linear());
    sum_r += a * a;
  }
  const double n = static_cast<double>(p.reference.size() - 1);
  return {std::sqrt(sum_t / n), std::sqrt(sum_r / n)};
}

}  // namespace rio
