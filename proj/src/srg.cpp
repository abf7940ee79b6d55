#include "srgnet/srg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <utility>

#include "srgnet/normals.hpp"
#include "srgnet/rng.hpp"

#include <Eigen/Eigenvalues>

namespace srgnet {

void check_srg_params(const SrgParams& params) {
  if (!(params.d_max > 0.0)) throw Error(ErrorCode::InvalidConfig, "srg d_max must be > 0");
  if (!(params.theta_max > 0.0) || params.theta_max > std::numbers::pi / 2 + 1e-12)
    throw Error(ErrorCode::InvalidConfig, "srg theta_max must be in (0, pi/2]");
  if (params.target_k < 1) throw Error(ErrorCode::InvalidConfig, "srg target_k must be >= 1");
  if (params.min_cluster < 0) throw Error(ErrorCode::InvalidConfig, "srg min_cluster must be >= 0");
}

double normal_affinity(const Vec3& na, const Vec3& nb) {
  return std::clamp(1.0 - std::abs(na.dot(nb)), 0.0, 1.0);
}

std::vector<double> surface_variation(const PointCloud& cloud, const NeighborGraph& graph) {
  if (graph.size() != cloud.size()) throw Error(ErrorCode::ShapeMismatch, "graph built over a different cloud");
  std::vector<double> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Sym3 c = neighborhood_covariance(cloud.positions, i, graph.neighbors(i));
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(c.full(), Eigen::EigenvaluesOnly);
    const double trace = solver.eigenvalues().sum();
    out[i] = trace > 0.0 ? std::max(solver.eigenvalues()[0], 0.0) / trace : 0.0;
  }
  return out;
}

namespace {

// Set of point ids with O(1) removal and uniform random pick.
class IndexPool {
 public:
  void add(std::size_t id, std::vector<std::size_t>& slot) {
    slot[id] = items_.size();
    items_.push_back(id);
  }
  void remove(std::size_t id, std::vector<std::size_t>& slot) {
    const std::size_t s = slot[id];
    const std::size_t last = items_.back();
    items_[s] = last;
    slot[last] = s;
    items_.pop_back();
  }
  bool empty() const { return items_.empty(); }
  std::size_t pick(Rng& rng) const { return items_[rng.uniform_index(items_.size())]; }

 private:
  std::vector<std::size_t> items_;
};

}  // namespace

LabelMap grow(const PointCloud& cloud, const NeighborGraph& graph, const SrgParams& params) {
  require_valid(cloud);
  if (!cloud.normals) throw Error(ErrorCode::MissingNormals, "seed region growing needs normals");
  if (graph.size() != cloud.size()) throw Error(ErrorCode::ShapeMismatch, "graph built over a different cloud");
  check_srg_params(params);

  const std::size_t n = cloud.size();
  const auto& normals = *cloud.normals;
  const double max_affinity = 1.0 - std::cos(params.theta_max);
  const auto variation = surface_variation(cloud, graph);
  std::vector<char> expands(n);
  for (std::size_t i = 0; i < n; ++i) expands[i] = variation[i] <= params.max_surface_variation;
  const std::vector<char> smooth_point = expands;

  // Unassigned points, split by whether they may extend a region.
  std::vector<std::size_t> slot(n);
  IndexPool smooth, rough;
  for (std::size_t i = 0; i < n; ++i) (expands[i] ? smooth : rough).add(i, slot);
  auto take = [&](std::size_t p) { (smooth_point[p] ? smooth : rough).remove(p, slot); };

  Rng rng(params.rng_seed);
  std::vector<int> labels(n, -1);
  int region = 0;
  std::deque<std::size_t> frontier;
  auto grow_from = [&](std::size_t seed) {
    take(seed);
    labels[seed] = region;
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::size_t a = frontier.front();
      frontier.pop_front();
      if (!expands[a]) continue;
      const auto nbrs = graph.neighbors(a);
      const auto dists = graph.distances(a);
      for (std::size_t s = 0; s < nbrs.size(); ++s) {
        const auto b = static_cast<std::size_t>(nbrs[s]);
        if (labels[b] != -1) continue;
        if (dists[s] > params.d_max) continue;
        if (normal_affinity(normals[a], normals[b]) > max_affinity) continue;
        labels[b] = region;
        take(b);
        frontier.push_back(b);
      }
    }
    ++region;
  };
  while (!smooth.empty()) grow_from(smooth.pick(rng));

  // Rough points nobody accepted join the closest region reachable through
  // the graph (multi-source Dijkstra over edges within d_max).
  if (!rough.empty() && region > 0) {
    const auto adj = graph.symmetrized();
    using Item = std::tuple<double, std::size_t, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::vector<double> reach(n, 0.0);
    auto relax = [&](std::size_t from) {
      for (std::int32_t j : adj[from]) {
        const auto b = static_cast<std::size_t>(j);
        if (labels[b] != -1) continue;
        const double d = (cloud.positions[from] - cloud.positions[b]).norm();
        if (d <= params.d_max) heap.emplace(reach[from] + d, b, labels[from]);
      }
    };
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] != -1) relax(i);
    while (!heap.empty()) {
      const auto [d, b, l] = heap.top();
      heap.pop();
      if (labels[b] != -1) continue;
      labels[b] = l;
      reach[b] = d;
      take(b);
      relax(b);
    }
  }

  // Whatever is left has no smooth region nearby; grow it ungated.
  std::fill(expands.begin(), expands.end(), 1);
  while (!rough.empty()) grow_from(rough.pick(rng));
  return LabelMap{std::move(labels), region};
}

namespace {

struct ClusterStats {
  std::size_t size = 0;
  Vec3 normal_sum = Vec3::Zero();
  Vec3 position_sum = Vec3::Zero();
  std::set<int> adjacent;
  bool alive = false;

  Vec3 mean_normal() const { return normal_sum / static_cast<double>(size); }
  Vec3 centroid() const { return position_sum / static_cast<double>(size); }
};

int pick_merge_partner(const std::vector<ClusterStats>& clusters, int victim) {
  const ClusterStats& v = clusters[victim];
  int best = -1;
  if (!v.adjacent.empty()) {
    // Mean normals are averages of unit vectors, so clusters with incoherent
    // normals score low against everything.
    double best_score = -1.0;
    const Vec3 m = v.mean_normal();
    for (int other : v.adjacent) {  // ascending ids, strict > keeps the lowest on ties
      const double score = std::abs(m.dot(clusters[other].mean_normal()));
      if (score > best_score) {
        best_score = score;
        best = other;
      }
    }
    return best;
  }
  double best_d2 = std::numeric_limits<double>::infinity();
  const Vec3 c = v.centroid();
  for (int other = 0; other < static_cast<int>(clusters.size()); ++other) {
    if (other == victim || !clusters[other].alive) continue;
    const double d2 = (clusters[other].centroid() - c).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = other;
    }
  }
  return best;
}

}  // namespace

LabelMap merge_to_target(const PointCloud& cloud, const LabelMap& labels, const NeighborGraph& graph,
                         int target_k, int min_cluster) {
  require_valid(cloud);
  check_labels(labels, cloud.size());
  if (!cloud.normals) throw Error(ErrorCode::MissingNormals, "cluster merging compares mean normals");
  if (graph.size() != cloud.size()) throw Error(ErrorCode::ShapeMismatch, "graph built over a different cloud");
  if (target_k < 1) throw Error(ErrorCode::InvalidConfig, "target_k must be >= 1");

  const auto& normals = *cloud.normals;
  std::vector<ClusterStats> clusters(static_cast<std::size_t>(labels.num_labels));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto& c = clusters[static_cast<std::size_t>(labels.labels[i])];
    c.alive = true;
    ++c.size;
    c.normal_sum += normals[i];
    c.position_sum += cloud.positions[i];
  }
  int alive = 0;
  std::size_t smallest = cloud.size();
  for (const auto& c : clusters) {
    if (!c.alive) continue;
    ++alive;
    smallest = std::min(smallest, c.size);
  }
  const auto floor_size = static_cast<std::size_t>(std::max(min_cluster, 0));
  if (alive <= target_k && (alive <= 1 || smallest >= floor_size)) return labels;

  const auto adj = graph.symmetrized();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int li = labels.labels[i];
    for (std::int32_t j : adj[i]) {
      const int lj = labels.labels[static_cast<std::size_t>(j)];
      if (lj != li) clusters[li].adjacent.insert(lj);
    }
  }

  std::set<std::pair<std::size_t, int>> by_size;
  for (int id = 0; id < static_cast<int>(clusters.size()); ++id)
    if (clusters[id].alive) by_size.emplace(clusters[id].size, id);

  std::vector<int> parent(clusters.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);

  auto merge_smallest = [&] {
    const int victim = by_size.begin()->second;
    const int into = pick_merge_partner(clusters, victim);
    ClusterStats& v = clusters[victim];
    ClusterStats& t = clusters[into];
    by_size.erase(by_size.begin());
    by_size.erase({t.size, into});
    t.size += v.size;
    t.normal_sum += v.normal_sum;
    t.position_sum += v.position_sum;
    for (int a : v.adjacent) {
      clusters[a].adjacent.erase(victim);
      if (a != into) {
        clusters[a].adjacent.insert(into);
        t.adjacent.insert(a);
      }
    }
    v.adjacent.clear();
    v.alive = false;
    parent[victim] = into;
    by_size.emplace(t.size, into);
    --alive;
  };

  // Undersized clusters go first, even below the target count.
  while (alive > 1 && by_size.begin()->first < floor_size) merge_smallest();
  while (alive > target_k) merge_smallest();

  auto root = [&](int id) {
    while (parent[id] != id) id = parent[id];
    return id;
  };
  // Order-preserving compaction of surviving ids.
  std::vector<int> dense(clusters.size(), -1);
  int next = 0;
  for (std::size_t id = 0; id < clusters.size(); ++id)
    if (clusters[id].alive) dense[id] = next++;
  LabelMap out;
  out.num_labels = next;
  out.labels.reserve(cloud.size());
  for (int l : labels.labels) out.labels.push_back(dense[root(l)]);
  return out;
}

SrgParams auto_thresholds(const NeighborGraph& graph, SrgParams base, const ThresholdOverrides& overrides) {
  if (overrides.d_max) {
    base.d_max = *overrides.d_max;
  } else {
    if (graph.size() == 0 || graph.k() == 0) throw Error(ErrorCode::EmptyCloud, "auto thresholds need a graph");
    std::vector<double> nearest(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) nearest[i] = graph.distances(i)[0];
    const auto mid = nearest.begin() + static_cast<std::ptrdiff_t>((nearest.size() - 1) / 2);
    std::nth_element(nearest.begin(), mid, nearest.end());
    base.d_max = 2.5 * *mid;
  }
  base.theta_max = overrides.theta_max.value_or(20.0 * std::numbers::pi / 180.0);
  return base;
}

LabelMap segment_srg(const PointCloud& cloud, const NeighborGraph& graph, const SrgParams& params) {
  return merge_to_target(cloud, grow(cloud, graph, params), graph, params.target_k, params.min_cluster);
}

}  // namespace srgnet
