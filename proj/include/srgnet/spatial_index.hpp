#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srgnet/types.hpp"

namespace srgnet {

struct Neighbor {
  std::int32_t index;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// Static kd-tree over 3D points answering exact k-nearest-neighbor queries.
///
/// Splits on the axis of largest spread at the median (ties ordered by point
/// index); leaves hold at most `leaf_size` points. Results are ordered by
/// ascending distance with ties broken by ascending index, which matches
/// knn_bruteforce exactly.
class KdTree {
 public:
  struct Node {
    std::int32_t begin = 0;  // range into index_
    std::int32_t end = 0;
    std::int32_t left = -1;  // -1 on leaves
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;

    bool is_leaf() const noexcept { return left < 0; }
  };

  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 16);

  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t leaf_size() const noexcept { return leaf_size_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  /// Point indices in leaf order; node ranges index into this.
  const std::vector<std::int32_t>& indices() const noexcept { return index_; }

 private:
  std::int32_t build_node(std::int32_t begin, std::int32_t end);

  std::vector<Vec3> points_;
  std::vector<std::int32_t> index_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

/// Full scan with the same ordering and tie rule as KdTree::knn.
std::vector<Neighbor> knn_bruteforce(std::span<const Vec3> points, const Vec3& query, std::size_t k);

/// Row i holds the k nearest other points of point i.
NeighborGraph knn_graph(const PointCloud& cloud, std::size_t k);
NeighborGraph knn_graph(std::span<const Vec3> points, std::size_t k);

/// Exact KNN graph in an arbitrary feature space (rows of a row-major N x dim
/// matrix), self excluded, ties by ascending index. Used by the network to
/// rebuild neighborhoods from layer activations.
NeighborGraph knn_graph_features(std::span<const double> features, std::size_t n, std::size_t dim,
                                 std::size_t k);

/// Empty string when the graph satisfies its invariants, otherwise a reason.
std::string graph_violation(const NeighborGraph& graph);

}  // namespace srgnet
