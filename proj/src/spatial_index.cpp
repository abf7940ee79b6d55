#include "srgnet/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace srgnet {
namespace {

// Shared by the tree and the brute-force scan so both produce bit-identical
// distances.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

using Candidate = std::pair<double, std::int32_t>;  // (squared distance, index)

class BoundedHeap {
 public:
  explicit BoundedHeap(std::size_t k) : k_(k) {}

  bool full() const { return heap_.size() >= k_; }
  double worst() const { return heap_.top().first; }

  void offer(double d2, std::int32_t idx) {
    const Candidate c{d2, idx};
    if (!full()) {
      heap_.push(c);
    } else if (c < heap_.top()) {
      heap_.pop();
      heap_.push(c);
    }
  }

  std::vector<Neighbor> sorted() {
    std::vector<Candidate> items;
    items.reserve(heap_.size());
    while (!heap_.empty()) {
      items.push_back(heap_.top());
      heap_.pop();
    }
    std::sort(items.begin(), items.end());
    std::vector<Neighbor> out;
    out.reserve(items.size());
    for (const auto& [d2, idx] : items) out.push_back({idx, std::sqrt(d2)});
    return out;
  }

 private:
  std::size_t k_;
  std::priority_queue<Candidate> heap_;
};

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n)
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " with " + std::to_string(n) + " points");
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.empty()) throw Error(ErrorCode::EmptyCloud, "cannot build a kd-tree over zero points");
  index_.resize(points_.size());
  std::iota(index_.begin(), index_.end(), 0);
  nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
  build_node(0, static_cast<std::int32_t>(points_.size()));
}

std::int32_t KdTree::build_node(std::int32_t begin, std::int32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (static_cast<std::size_t>(end - begin) <= leaf_size_) return id;

  Vec3 lo = points_[index_[begin]];
  Vec3 hi = lo;
  for (std::int32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[index_[i]]);
    hi = hi.cwiseMax(points_[index_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const std::int32_t mid = begin + (end - begin) / 2;
  auto by_axis = [&](std::int32_t a, std::int32_t b) {
    const double ca = points_[a][axis];
    const double cb = points_[b][axis];
    return ca < cb || (ca == cb && a < b);
  };
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end, by_axis);

  nodes_[id].axis = axis;
  nodes_[id].split = points_[index_[mid]][axis];
  const std::int32_t left = build_node(begin, mid);
  const std::int32_t right = build_node(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  check_k(k, points_.size());
  BoundedHeap heap(k);

  // Explicit stack; each entry carries the squared distance from the query to
  // the splitting plane that separates it, used to prune on pop.
  std::vector<std::pair<std::int32_t, double>> stack;
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [node_id, plane_d2] = stack.back();
    stack.pop_back();
    if (heap.full() && plane_d2 > heap.worst()) continue;
    const Node& node = nodes_[node_id];
    if (node.is_leaf()) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const std::int32_t idx = index_[i];
        heap.offer(squared_distance(points_[idx], query), idx);
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(plane_d2, diff * diff));
    stack.emplace_back(near, plane_d2);
  }
  return heap.sorted();
}

std::vector<Neighbor> knn_bruteforce(std::span<const Vec3> points, const Vec3& query, std::size_t k) {
  check_k(k, points.size());
  std::vector<Candidate> all(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    all[i] = {squared_distance(points[i], query), static_cast<std::int32_t>(i)};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
  return out;
}

NeighborGraph knn_graph(std::span<const Vec3> points, std::size_t k) {
  const std::size_t n = points.size();
  if (n == 0) throw Error(ErrorCode::EmptyCloud, "knn graph over zero points");
  if (k < 1 || k + 1 > n)
    throw Error(ErrorCode::KTooLarge, "graph k=" + std::to_string(k) + " needs more than " + std::to_string(n) +
                                          " points");
  const KdTree tree(points);
  std::vector<std::int32_t> nbrs;
  std::vector<double> dists;
  nbrs.reserve(n * k);
  dists.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto found = tree.knn(points[i], k + 1);
    std::size_t taken = 0;
    for (const auto& nb : found) {
      if (taken == k) break;
      if (nb.index == static_cast<std::int32_t>(i)) continue;
      nbrs.push_back(nb.index);
      dists.push_back(nb.distance);
      ++taken;
    }
  }
  return NeighborGraph(n, k, std::move(nbrs), std::move(dists));
}

NeighborGraph knn_graph(const PointCloud& cloud, std::size_t k) { return knn_graph(cloud.positions, k); }

NeighborGraph knn_graph_features(std::span<const double> features, std::size_t n, std::size_t dim,
                                 std::size_t k) {
  if (features.size() != n * dim) throw Error(ErrorCode::ShapeMismatch, "feature matrix size != n*dim");
  if (n == 0) throw Error(ErrorCode::EmptyCloud, "knn graph over zero points");
  if (k < 1 || k + 1 > n) throw Error(ErrorCode::KTooLarge, "graph k=" + std::to_string(k));

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> x(features.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  const RowMat gram = x * x.transpose();

  std::vector<std::int32_t> nbrs(n * k);
  std::vector<double> dists(n * k);
  std::vector<Candidate> row;
  row.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = sq[static_cast<Eigen::Index>(i)] + sq[static_cast<Eigen::Index>(j)] -
                        2.0 * gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      row.emplace_back(std::max(d2, 0.0), static_cast<std::int32_t>(j));
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    for (std::size_t s = 0; s < k; ++s) {
      nbrs[i * k + s] = row[s].second;
      dists[i * k + s] = std::sqrt(row[s].first);
    }
  }
  return NeighborGraph(n, k, std::move(nbrs), std::move(dists));
}

std::string graph_violation(const NeighborGraph& graph) {
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto nb = graph.neighbors(i);
    const auto d = graph.distances(i);
    for (std::size_t s = 0; s < graph.k(); ++s) {
      if (nb[s] < 0 || static_cast<std::size_t>(nb[s]) >= graph.size())
        return "row " + std::to_string(i) + " has out-of-range neighbor";
      if (static_cast<std::size_t>(nb[s]) == i) return "row " + std::to_string(i) + " contains itself";
      if (d[s] < 0.0) return "row " + std::to_string(i) + " has negative distance";
      if (s > 0 && (d[s] < d[s - 1] || (d[s] == d[s - 1] && nb[s] < nb[s - 1])))
        return "row " + std::to_string(i) + " is not sorted by (distance, index)";
    }
  }
  return {};
}

}  // namespace srgnet
