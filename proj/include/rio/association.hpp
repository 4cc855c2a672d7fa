#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "rio/factors.hpp"
#include "rio/radar_model.hpp"

namespace rio {

using LandmarkId = std::int64_t;

struct Landmark {
  LandmarkId id = 0;
  Vec3 position = Vec3::Zero();  // world frame, m
  int observations = 0;
  std::int64_t last_seen_frame = 0;
  /// Simulator label of the point that spawned this landmark, -1 if unknown.
  std::int64_t truth_label = -1;
};

/// Landmark store with a uniform-grid spatial index for radius queries.
class LandmarkMap {
 public:
  explicit LandmarkMap(double cell_size = 1.0);

  LandmarkId add(const Vec3& position, std::int64_t frame, std::int64_t truth_label = -1);
  void remove(LandmarkId id);
  void set_position(LandmarkId id, const Vec3& position);
  void observe(LandmarkId id, std::int64_t frame);

  bool contains(LandmarkId id) const { return landmarks_.count(id) != 0; }
  const Landmark& at(LandmarkId id) const { return landmarks_.at(id); }
  std::size_t size() const { return landmarks_.size(); }
  bool empty() const { return landmarks_.empty(); }

  /// Ordered by id.
  const std::map<LandmarkId, Landmark>& landmarks() const { return landmarks_; }

  /// Ids of every landmark within `radius` of `center`, ascending.
  std::vector<LandmarkId> within(const Vec3& center, double radius) const;

 private:
  using CellKey = std::int64_t;
  CellKey key_of(const Vec3& p) const;
  CellKey key_of(std::int64_t ix, std::int64_t iy, std::int64_t iz) const;
  void index_insert(LandmarkId id, const Vec3& p);
  void index_erase(LandmarkId id, const Vec3& p);

  double cell_size_;
  LandmarkId next_id_ = 0;
  std::map<LandmarkId, Landmark> landmarks_;
  std::unordered_map<CellKey, std::vector<LandmarkId>> cells_;
};

enum class MatchingMode { kProbability, kEuclidean };

std::string_view to_string(MatchingMode mode);
std::optional<MatchingMode> parse_matching_mode(std::string_view text);

struct MatchResult {
  std::size_t point_index = 0;
  std::optional<LandmarkId> landmark;
  /// Gaussian density of the best candidate (m^-3); 0 when there was none.
  double density = 0.0;
  /// Mahalanobis distance of the best candidate; infinity when there was none.
  double mahalanobis = std::numeric_limits<double>::infinity();
  /// Euclidean distance of the best candidate; infinity when there was none.
  double distance = std::numeric_limits<double>::infinity();
};

inline constexpr double kGateSigmas = 3.0;

class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trivariate Gaussian density of `landmark` under N(point, covariance).
/// Throws SingularCovarianceError if the covariance is not positive definite.
double match_density(const Vec3& landmark, const Vec3& point, const Mat3& covariance);

/// Point and covariance carried into the world frame.
struct WorldPoint {
  Vec3 position;
  Mat3 covariance;
};
WorldPoint to_world(const PolarPoint& p, const NavState& pose, const Extrinsics& ext,
                    const PointCovariance& sigma);

/// Highest-density landmark among those gathered within
/// 3 sqrt(lambda_max) + margin, kept only if its Mahalanobis distance is <= 3.
/// Equal densities resolve to the lower id.
MatchResult associate(const WorldPoint& point, const LandmarkMap& map, double margin = 0.1);
MatchResult associate(const PolarPoint& p, const NavState& pose, const Extrinsics& ext,
                      const PointCovariance& sigma, const LandmarkMap& map, double margin = 0.1);

/// Nearest landmark within `radius` (m).
MatchResult associate_euclidean(const Vec3& point_world, const LandmarkMap& map, double radius);
MatchResult associate_euclidean(const PolarPoint& p, const NavState& pose, const Extrinsics& ext,
                                const LandmarkMap& map, double radius);

struct MapPolicy {
  /// Frames a landmark may go unobserved before it is eligible for retirement.
  int retire_after_frames = 10;
  /// Landmarks with at most this many observations are retired when stale.
  int min_observations = 1;
};

struct NewPoint {
  Vec3 position;
  std::int64_t truth_label = -1;
};

/// Spawns a landmark for every unmatched point and retires stale, rarely
/// observed landmarks. Returns the ids of the spawned landmarks in input order.
std::vector<LandmarkId> update_map(LandmarkMap& map, std::span<const NewPoint> unmatched,
                                   std::int64_t frame, const MapPolicy& policy);
std::vector<LandmarkId> update_map(LandmarkMap& map, std::span<const PolarPoint> unmatched,
                                   const NavState& pose, const Extrinsics& ext,
                                   std::int64_t frame, const MapPolicy& policy);

}  // namespace rio
