#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "helpers.hpp"
#include "srgnet/evaluation.hpp"
#include "srgnet/fixtures.hpp"
#include "srgnet/normals.hpp"
#include "srgnet/rng.hpp"
#include "srgnet/spatial_index.hpp"
#include "srgnet/srg.hpp"

using namespace srgnet;
using testing::error_of;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SrgParams params(double d_max, double theta_deg, int target, int min_cluster = 0, std::uint64_t seed = 0) {
  SrgParams p;
  p.d_max = d_max;
  p.theta_max = theta_deg * kDeg;
  p.target_k = target;
  p.min_cluster = min_cluster;
  p.rng_seed = seed;
  return p;
}

PointCloud with_normals(const PointCloud& c, std::size_t k = 20) { return estimate_normals(c, knn_graph(c, k)).cloud; }

double min_purity(const LabelMap& pred, const LabelMap& gt) {
  const auto p = cluster_purity(pred, gt);
  double worst = 1.0;
  for (int l = 0; l < pred.num_labels; ++l)
    if (std::count(pred.labels.begin(), pred.labels.end(), l) > 0) worst = std::min(worst, p[static_cast<std::size_t>(l)]);
  return worst;
}

}  // namespace

TEST_CASE("normal affinity") {
  CHECK(normal_affinity(Vec3(0, 0, 1), Vec3(0, 0, 1)) == 0.0);
  CHECK(normal_affinity(Vec3(0, 0, 1), Vec3(0, 0, -1)) == 0.0);
  CHECK(normal_affinity(Vec3(0, 0, 1), Vec3(1, 0, 0)) == 1.0);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 b = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    CHECK(normal_affinity(a, b) == normal_affinity(b, a));
    CHECK(normal_affinity(a, b) == normal_affinity(-a, b));
  }
}

TEST_CASE("surface variation is zero on a plane") {
  const PointCloud plane = fixtures::plane_grid(8, 8, 1.0);
  for (double s : surface_variation(plane, knn_graph(plane, 8))) CHECK(s < 1e-12);
}

TEST_CASE("flat plane grows into one region") {
  const PointCloud plane = fixtures::plane_grid(20, 20, 0.5);
  const auto g = knn_graph(plane, 8);
  const auto labels = grow(plane, g, params(1.5, 20, 6));
  CHECK(labels.num_labels == 1);
}

TEST_CASE("parallel planes separate by distance") {
  const auto f = fixtures::parallel_planes(15, 15, 1.0, 10.0);
  const auto g = knn_graph(f.cloud, 8);
  const auto labels = grow(f.cloud, g, params(3.0, 20, 6));
  CHECK(labels.num_labels == 2);
  CHECK(min_purity(labels, f.labels) == 1.0);
}

TEST_CASE("dihedral grows into its two faces") {
  const auto f = fixtures::dihedral(4000, 0);
  const PointCloud c = with_normals(f.cloud);
  const auto g = knn_graph(c, 20);
  const auto p = auto_thresholds(g, params(0, 20, 2, 10));
  const auto labels = segment_srg(c, g, p);
  CHECK(labels.num_labels == 2);
  CHECK(min_purity(labels, f.labels) >= 0.99);
}

TEST_CASE("flipping normal signs does not change the regions") {
  const auto f = fixtures::dihedral(1500, 3);
  PointCloud c = with_normals(f.cloud);
  const auto g = knn_graph(c, 20);
  const auto p = auto_thresholds(g, params(0, 20, 2, 10, 9));
  const auto before = grow(c, g, p);
  Rng rng(5);
  for (auto& n : *c.normals)
    if (rng.uniform01() < 0.5) n = -n;
  CHECK(grow(c, g, p) == before);
}

TEST_CASE("regions are connected in the symmetrized graph") {
  const auto f = fixtures::three_part_figure(3000, 1);
  const PointCloud c = with_normals(f.cloud);
  const auto g = knn_graph(c, 20);
  const auto labels = grow(c, g, auto_thresholds(g, params(0, 20, 3, 10, 1)));
  const auto adj = g.symmetrized();
  // BFS restricted to each label must reach every member.
  std::vector<char> seen(c.size(), 0);
  std::set<int> started;
  for (std::size_t s = 0; s < c.size(); ++s) {
    if (seen[s]) continue;
    CHECK(started.insert(labels.labels[s]).second);
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (auto j : adj[i])
        if (!seen[static_cast<std::size_t>(j)] && labels.labels[static_cast<std::size_t>(j)] == labels.labels[i]) {
          seen[static_cast<std::size_t>(j)] = 1;
          stack.push_back(static_cast<std::size_t>(j));
        }
    }
  }
}

TEST_CASE("growing is reproducible") {
  const auto f = fixtures::dihedral(2000, 1);
  const PointCloud c = with_normals(f.cloud);
  const auto g = knn_graph(c, 20);
  const auto p = auto_thresholds(g, params(0, 20, 2, 10, 77));
  const auto a = segment_srg(c, g, p);
  CHECK(segment_srg(c, g, p) == a);
  CHECK(segment_srg(c, g, p) == a);
}

TEST_CASE("merge with target equal to the count is a no-op") {
  const auto f = fixtures::parallel_planes(6, 6, 1.0, 10.0);
  const auto g = knn_graph(f.cloud, 6);
  LabelMap three = f.labels;
  for (std::size_t i = 0; i < 10; ++i) three.labels[i] = 2;
  three.num_labels = 3;
  CHECK(merge_to_target(f.cloud, three, g, 3) == three);
}

TEST_CASE("a small cluster folds into its only neighbor") {
  // A: 10x10 grid; B: 5 points just beyond A's edge; C: 10x10 grid far away.
  PointCloud c;
  LabelMap labels;
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y) {
      c.positions.emplace_back(x, y, 0);
      labels.labels.push_back(0);
    }
  for (int y = 0; y < 5; ++y) {
    c.positions.emplace_back(10, y * 2, 0);
    labels.labels.push_back(1);
  }
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y) {
      c.positions.emplace_back(100 + x, y, 0);
      labels.labels.push_back(2);
    }
  c.normals = std::vector<Vec3>(c.size(), Vec3(0, 0, 1));
  labels.num_labels = 3;
  const auto g = knn_graph(c, 4);
  const auto merged = merge_to_target(c, labels, g, 2);
  CHECK(merged.num_labels == 2);
  for (std::size_t i = 0; i < 105; ++i) CHECK(merged.labels[i] == merged.labels[0]);
  for (std::size_t i = 105; i < c.size(); ++i) CHECK(merged.labels[i] != merged.labels[0]);
}

TEST_CASE("clusters below min_cluster are absorbed even under the target") {
  const auto f = fixtures::parallel_planes(6, 6, 1.0, 10.0);
  const auto g = knn_graph(f.cloud, 6);
  LabelMap l = f.labels;
  l.labels[0] = 2;
  l.labels[1] = 2;
  l.num_labels = 3;
  const auto merged = merge_to_target(f.cloud, l, g, 6, 5);
  CHECK(merged.num_labels == 2);
  CHECK(merged.labels[0] == merged.labels[5]);
}

TEST_CASE("over-segmented dihedral merges back to its faces") {
  const auto f = fixtures::dihedral(4000, 2);
  const PointCloud c = with_normals(f.cloud);
  const auto g = knn_graph(c, 20);
  double xmax = 0;
  for (const auto& p : c.positions) xmax = std::max(xmax, p.x());
  // Floor in 4 stripes, wall in 3, cut along the crease direction.
  LabelMap seven{std::vector<int>(c.size()), 7};
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double t = c.positions[i].x() / (xmax + 1e-9);
    seven.labels[i] = f.labels.labels[i] == 0 ? std::min(3, static_cast<int>(t * 4)) : 4 + std::min(2, static_cast<int>(t * 3));
  }
  const auto merged = merge_to_target(c, seven, g, 2);
  CHECK(merged.num_labels == 2);
  CHECK(min_purity(merged, f.labels) >= 0.95);
}

TEST_CASE("automatic thresholds") {
  const PointCloud grid = fixtures::plane_grid(10, 10, 1.0);
  const auto p = auto_thresholds(knn_graph(grid, 4));
  CHECK(p.d_max == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(p.theta_max == doctest::Approx(20 * kDeg).epsilon(1e-12));

  PointCloud two = fixtures::plane_grid(6, 6, 1.0);
  const PointCloud wide = fixtures::plane_grid(6, 6, 2.0);
  for (const auto& q : wide.positions) two.positions.push_back(q + Vec3(1000, 0, 0));
  two.normals.reset();
  CHECK(auto_thresholds(knn_graph(two, 4)).d_max == doctest::Approx(2.5).epsilon(1e-12));

  ThresholdOverrides o;
  o.d_max = 0.7;
  o.theta_max = 0.1;
  const auto q = auto_thresholds(knn_graph(grid, 4), {}, o);
  CHECK(q.d_max == 0.7);
  CHECK(q.theta_max == 0.1);
}

TEST_CASE("grow needs normals and valid parameters") {
  const PointCloud grid = fixtures::plane_grid(4, 4, 1.0);
  PointCloud bare = grid;
  bare.normals.reset();
  const auto g = knn_graph(grid, 3);
  CHECK(error_of([&] { grow(bare, g, params(2, 20, 2)); }) == ErrorCode::MissingNormals);
  CHECK(error_of([&] { grow(grid, g, params(-1, 20, 2)); }) == ErrorCode::InvalidConfig);
}
