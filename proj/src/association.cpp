#include "rio/association.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace rio {

namespace {
constexpr std::int64_t kCellBits = 21;
constexpr std::int64_t kCellOffset = std::int64_t{1} << (kCellBits - 1);
constexpr std::int64_t kCellMask = (std::int64_t{1} << kCellBits) - 1;
}  // namespace

LandmarkMap::LandmarkMap(double cell_size) : cell_size_(cell_size) {}

LandmarkMap::CellKey LandmarkMap::key_of(std::int64_t ix, std::int64_t iy,
                                         std::int64_t iz) const {
  return (((ix + kCellOffset) & kCellMask) << (2 * kCellBits)) |
         (((iy + kCellOffset) & kCellMask) << kCellBits) | ((iz + kCellOffset) & kCellMask);
}

LandmarkMap::CellKey LandmarkMap::key_of(const Vec3& p) const {
  return key_of(static_cast<std::int64_t>(std::floor(p.x() / cell_size_)),
                static_cast<std::int64_t>(std::floor(p.y() / cell_size_)),
                static_cast<std::int64_t>(std::floor(p.z() / cell_size_)));
}

void LandmarkMap::index_insert(LandmarkId id, const Vec3& p) { cells_[key_of(p)].push_back(id); }

void LandmarkMap::index_erase(LandmarkId id, const Vec3& p) {
  auto it = cells_.find(key_of(p));
  if (it == cells_.end()) return;
  auto& ids = it->second;
  ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
  if (ids.empty()) cells_.erase(it);
}

LandmarkId LandmarkMap::add(const Vec3& position, std::int64_t frame, std::int64_t truth_label) {
  const LandmarkId id = next_id_++;
  landmarks_.emplace(id, Landmark{id, position, 1, frame, truth_label});
  index_insert(id, position);
  return id;
}

void LandmarkMap::remove(LandmarkId id) {
  auto it = landmarks_.find(id);
  if (it == landmarks_.end()) return;
  index_erase(id, it->second.position);
  landmarks_.erase(it);
}

void LandmarkMap::set_position(LandmarkId id, const Vec3& position) {
  Landmark& lm = landmarks_.at(id);
  if (key_of(lm.position) != key_of(position)) {
    index_erase(id, lm.position);
    index_insert(id, position);
  }
  lm.position = position;
}

void LandmarkMap::observe(LandmarkId id, std::int64_t frame) {
  Landmark& lm = landmarks_.at(id);
  ++lm.observations;
  lm.last_seen_frame = std::max(lm.last_seen_frame, frame);
}

std::vector<LandmarkId> LandmarkMap::within(const Vec3& center, double radius) const {
  std::vector<LandmarkId> out;
  if (!(radius >= 0.0) || landmarks_.empty()) return out;
  const auto lo = [&](double c) { return static_cast<std::int64_t>(std::floor((c - radius) / cell_size_)); };
  const auto hi = [&](double c) { return static_cast<std::int64_t>(std::floor((c + radius) / cell_size_)); };
  const std::int64_t span = (hi(center.x()) - lo(center.x()) + 1) *
                            (hi(center.y()) - lo(center.y()) + 1) *
                            (hi(center.z()) - lo(center.z()) + 1);
  const double r2 = radius * radius;
  if (span > static_cast<std::int64_t>(landmarks_.size())) {
    for (const auto& [id, lm] : landmarks_) {
      if ((lm.position - center).squaredNorm() <= r2) out.push_back(id);
    }
    return out;
  }
  for (auto ix = lo(center.x()); ix <= hi(center.x()); ++ix) {
    for (auto iy = lo(center.y()); iy <= hi(center.y()); ++iy) {
      for (auto iz = lo(center.z()); iz <= hi(center.z()); ++iz) {
        auto it = cells_.find(key_of(ix, iy, iz));
        if (it == cells_.end()) continue;
        for (LandmarkId id : it->second) {
          if ((landmarks_.at(id).position - center).squaredNorm() <= r2) out.push_back(id);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view to_string(MatchingMode mode) {
  return mode == MatchingMode::kProbability ? "probability" : "euclidean";
}

std::optional<MatchingMode> parse_matching_mode(std::string_view text) {
  if (text == "probability") return MatchingMode::kProbability;
  if (text == "euclidean") return MatchingMode::kEuclidean;
  return std::nullopt;
}

double match_density(const Vec3& landmark, const Vec3& point, const Mat3& covariance) {
  const Eigen::LLT<Mat3> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("match covariance is not positive definite");
  }
  const Vec3 whitened = llt.matrixL().solve(landmark - point);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return std::exp(-0.5 * whitened.squaredNorm() - 0.5 * log_det -
                  1.5 * std::log(2.0 * std::numbers::pi));
}

WorldPoint to_world(const PolarPoint& p, const NavState& pose, const Extrinsics& ext,
                    const PointCovariance& sigma) {
  const Vec3 body = ext.rotation * polar_to_cartesian(p) + ext.translation;
  return {pose.orientation * body + pose.position, point_residual_covariance(pose, ext, sigma)};
}

MatchResult associate(const WorldPoint& point, const LandmarkMap& map, double margin) {
  MatchResult result;
  if (map.empty()) return result;
  const Eigen::LLT<Mat3> llt(point.covariance);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("point covariance is not positive definite");
  }
  const double lambda_max =
      Eigen::SelfAdjointEigenSolver<Mat3>(point.covariance, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .maxCoeff();
  const double radius = kGateSigmas * std::sqrt(lambda_max) + margin;
  const Mat3 l = llt.matrixL();
  const double log_norm = -l.diagonal().array().log().sum() - 1.5 * std::log(2.0 * std::numbers::pi);

  double best_m2 = std::numeric_limits<double>::infinity();
  for (LandmarkId id : map.within(point.position, radius)) {
    const Vec3 offset = map.at(id).position - point.position;
    const double m2 = llt.matrixL().solve(offset).squaredNorm();
    // Density is monotone in m2 for a fixed covariance; ids arrive ascending.
    if (m2 < best_m2) {
      best_m2 = m2;
      result.landmark = id;
      result.distance = offset.norm();
    }
  }
  if (!result.landmark) return result;
  result.mahalanobis = std::sqrt(best_m2);
  result.density = std::exp(log_norm - 0.5 * best_m2);
  if (result.mahalanobis > kGateSigmas) result.landmark.reset();
  return result;
}

MatchResult associate(const PolarPoint& p, const NavState& pose, const Extrinsics& ext,
                      const PointCovariance& sigma, const LandmarkMap& map, double margin) {
  return associate(to_world(p, pose, ext, sigma), map, margin);
}

MatchResult associate_euclidean(const Vec3& point_world, const LandmarkMap& map, double radius) {
  MatchResult result;
  double best = std::numeric_limits<double>::infinity();
  for (LandmarkId id : map.within(point_world, radius)) {
    const double d = (map.at(id).position - point_world).norm();
    if (d < best) {
      best = d;
      result.landmark = id;
    }
  }
  if (result.landmark) result.distance = best;
  return result;
}

MatchResult associate_euclidean(const PolarPoint& p, const NavState& pose, const Extrinsics& ext,
                                const LandmarkMap& map, double radius) {
  const Vec3 body = ext.rotation * polar_to_cartesian(p) + ext.translation;
  return associate_euclidean(pose.orientation * body + pose.position, map, radius);
}

std::vector<LandmarkId> update_map(LandmarkMap& map, std::span<const NewPoint> unmatched,
                                   std::int64_t frame, const MapPolicy& policy) {
  std::vector<LandmarkId> stale;
  for (const auto& [id, lm] : map.landmarks()) {
    if (frame - lm.last_seen_frame >= policy.retire_after_frames &&
        lm.observations <= policy.min_observations) {
      stale.push_back(id);
    }
  }
  for (LandmarkId id : stale) map.remove(id);

  std::vector<LandmarkId> spawned;
  spawned.reserve(unmatched.size());
  for (const NewPoint& p : unmatched) spawned.push_back(map.add(p.position, frame, p.truth_label));
  return spawned;
}

std::vector<LandmarkId> update_map(LandmarkMap& map, std::span<const PolarPoint> unmatched,
                                   const NavState& pose, const Extrinsics& ext,
                                   std::int64_t frame, const MapPolicy& policy) {
  std::vector<NewPoint> points;
  points.reserve(unmatched.size());
  for (const PolarPoint& p : unmatched) {
    const Vec3 body = ext.rotation * polar_to_cartesian(p) + ext.translation;
    points.push_back({pose.orientation * body + pose.position, -1});
  }
  return update_map(map, points, frame, policy);
}

}  // namespace rio
