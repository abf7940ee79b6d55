#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srgnet/error.hpp"

namespace srgnet {

using Vec3 = Eigen::Vector3d;

/// Per-point positions with optional unit normals.
struct PointCloud {
  std::vector<Vec3> positions;
  std::optional<std::vector<Vec3>> normals;
  std::string source_id;

  std::size_t size() const noexcept { return positions.size(); }
  bool has_normals() const noexcept { return normals.has_value(); }
};

/// Returns the first violated invariant, or nothing when the cloud is valid.
std::optional<Error> validate_cloud(const PointCloud& cloud);

/// Throws the error reported by validate_cloud.
void require_valid(const PointCloud& cloud);

/// One dense label in [0, num_labels) per point.
struct LabelMap {
  std::vector<int> labels;
  int num_labels = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool operator==(const LabelMap&) const = default;
};

/// Builds a LabelMap from arbitrary non-negative ids, relabeling them densely
/// in order of first occurrence.
LabelMap compact_labels(std::span<const int> raw);

/// Number of labels that actually occur.
int count_distinct(const LabelMap& labels);

/// Throws when an entry is outside [0, num_labels) or, if expected_size is
/// given, when the length differs.
void check_labels(const LabelMap& labels, std::optional<std::size_t> expected_size = std::nullopt);

/// Fixed-k neighbor lists, rows sorted by (distance, index), self excluded.
class NeighborGraph {
 public:
  NeighborGraph() = default;
  NeighborGraph(std::size_t n, std::size_t k, std::vector<std::int32_t> neighbors,
                std::vector<double> distances);

  std::size_t size() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

  std::span<const std::int32_t> neighbors(std::size_t i) const {
    return {neighbors_.data() + i * k_, k_};
  }
  std::span<const double> distances(std::size_t i) const { return {distances_.data() + i * k_, k_}; }

  const std::vector<std::int32_t>& flat_neighbors() const noexcept { return neighbors_; }
  const std::vector<double>& flat_distances() const noexcept { return distances_; }

  /// Undirected adjacency: i~j if j is a neighbor of i or i a neighbor of j.
  /// Each list is sorted ascending and duplicate-free.
  std::vector<std::vector<std::int32_t>> symmetrized() const;

  bool operator==(const NeighborGraph&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::int32_t> neighbors_;
  std::vector<double> distances_;
};

}  // namespace srgnet
