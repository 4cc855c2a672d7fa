#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rio {

struct StampedPose {
  double timestamp = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

using Trajectory = std::vector<StampedPose>;

}  // namespace rio
