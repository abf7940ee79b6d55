#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "srgnet/evaluation.hpp"
#include "srgnet/fixtures.hpp"
#include "srgnet/kmeans.hpp"
#include "srgnet/rng.hpp"

using namespace srgnet;
using testing::error_of;

namespace {

Eigen::MatrixXd rows_of(const PointCloud& c) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(c.size()), 3);
  for (std::size_t i = 0; i < c.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = c.positions[i].transpose();
  return m;
}

void check_monotone(const KmeansResult& r) {
  for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
    CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] * (1.0 + 1e-12));
}

}  // namespace

TEST_CASE("one point per cluster gives zero inertia") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 5, 5;
  const auto r = kmeans(x, 4);
  CHECK(r.inertia == 0.0);
  CHECK(count_distinct(r.labels) == 4);
}

TEST_CASE("three blobs are recovered") {
  const std::vector<Vec3> centers{Vec3(0, 0, 0), Vec3(1.5, 0, 0), Vec3(0, 1.5, 0.5)};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = fixtures::gaussian_blobs(centers, 200, 0.05, seed);
    KmeansOptions o;
    o.seed = seed;
    const auto r = kmeans(rows_of(f.cloud), 3, o);
    CHECK(miou(r.labels, f.labels).miou >= 0.97);
    check_monotone(r);
    CHECK(r.inertia == doctest::Approx(kmeans_inertia(rows_of(f.cloud), r.centroids, r.labels)).epsilon(1e-12));
  }
}

TEST_CASE("six points, two clusters: optimal against exhaustive search") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd x(6, 2);
    for (Eigen::Index i = 0; i < 6; ++i) x.row(i) << rng.normal(), rng.normal();
    // Every bipartition; the best one is Voronoi-induced by its own means.
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < 63; ++mask) {
      double total = 0.0;
      for (int side = 0; side < 2; ++side) {
        Eigen::RowVector2d mean = Eigen::RowVector2d::Zero();
        int count = 0;
        for (int i = 0; i < 6; ++i)
          if (((mask >> i) & 1) == side) {
            mean += x.row(i);
            ++count;
          }
        mean /= count;
        for (int i = 0; i < 6; ++i)
          if (((mask >> i) & 1) == side) total += (x.row(i) - mean).squaredNorm();
      }
      best = std::min(best, total);
    }
    double found = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      KmeansOptions o;
      o.seed = seed;
      const auto r = kmeans(x, 2, o);
      check_monotone(r);
      found = std::min(found, r.inertia);
    }
    CHECK(std::abs(found - best) < 1e-9);
  }
}

TEST_CASE("kmeans is deterministic per seed") {
  const auto c = fixtures::random_cube(300, 3);
  KmeansOptions o;
  o.seed = 99;
  const auto a = kmeans(rows_of(c), 5, o);
  const auto b = kmeans(rows_of(c), 5, o);
  CHECK(a.labels == b.labels);
  CHECK(a.inertia_history == b.inertia_history);
  check_monotone(a);
}

TEST_CASE("duplicate points force reseeding without breaking monotonicity") {
  Eigen::MatrixXd x(12, 1);
  x << 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 2;
  const auto r = kmeans(x, 3);
  check_monotone(r);
  CHECK(r.labels.num_labels == 3);
}

TEST_CASE("kmeans errors") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  CHECK(error_of([&] { kmeans(x, 4); }) == ErrorCode::KTooLarge);
  CHECK(error_of([&] { kmeans(Eigen::MatrixXd(0, 2), 1); }) == ErrorCode::EmptyCloud);
  x(1, 1) = std::numeric_limits<double>::infinity();
  CHECK(error_of([&] { kmeans(x, 2); }) == ErrorCode::NonFinite);
}

TEST_CASE("point features are centered and scaled per block") {
  const PointCloud s = fixtures::sphere(200, 4.0, Vec3(10, 0, -3));
  const auto f = point_features(s);
  REQUIRE(f.cols() == 6);
  for (int block = 0; block < 2; ++block) {
    const Eigen::MatrixXd b = f.middleCols(block * 3, 3);
    CHECK(b.colwise().mean().norm() < 1e-12);
    CHECK(std::sqrt(b.rowwise().squaredNorm().mean()) == doctest::Approx(1.0).epsilon(1e-12));
  }
  PointCloud bare = s;
  bare.normals.reset();
  CHECK(error_of([&] { point_features(bare); }) == ErrorCode::MissingNormals);
}
