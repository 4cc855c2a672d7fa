#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rio/trajectory.hpp"

namespace rio {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PoseError {
  double translation = 0.0;  // m
  double rotation = 0.0;     // deg
};

struct EvalOptions {
  /// Rigid (rotation + translation, no scale) alignment of the estimate onto the reference before APE.
  bool align = true;
  /// Largest timestamp difference for a pose pair (s).
  double max_time_difference = 0.01;
};

/// Index pairs (reference, estimate): each reference pose is paired with the
/// nearest estimate pose when they are at most `max_diff` apart.
std::vector<std::pair<std::size_t, std::size_t>> associate_by_time(const Trajectory& reference,
                                                                   const Trajectory& estimate,
                                                                   double max_diff);

/// Rigid transform (R, t) minimizing sum |R est + t - ref|^2 over paired positions.
Eigen::Isometry3d align_rigid(const std::vector<Eigen::Vector3d>& estimate,
                              const std::vector<Eigen::Vector3d>& reference);

/// Absolute pose error RMSE. Throws EvaluationError without any pose pair.
PoseError ape_rmse(const Trajectory& estimate, const Trajectory& reference,
                   const EvalOptions& options = {});

/// Relative pose error RMSE over consecutive paired frames. Throws
/// EvaluationError with fewer than two pose pairs.
PoseError rpe_rmse(const Trajectory& estimate, const Trajectory& reference,
                   const EvalOptions& options = {});

}  // namespace rio
