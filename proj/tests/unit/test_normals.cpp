#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "srgnet/fixtures.hpp"
#include "srgnet/normals.hpp"
#include "srgnet/rng.hpp"
#include "srgnet/spatial_index.hpp"

using namespace srgnet;

namespace {

double angle(const Vec3& a, const Vec3& b) { return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)); }

}  // namespace

TEST_CASE("covariance of hand cases") {
  const std::vector<Vec3> one{Vec3(1, 2, 3)};
  CHECK(neighborhood_covariance(one).full().isZero(0.0));
  const std::vector<Vec3> pair{Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  const Eigen::Matrix3d expected = Eigen::Vector3d(1, 0, 0).asDiagonal();
  CHECK(neighborhood_covariance(pair).full().isApprox(expected, 1e-15));
}

TEST_CASE("covariance matches a double-loop reference") {
  Rng rng(4);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(rng.normal(), 3 * rng.normal() + 1, rng.uniform(-2, 5));
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= 50.0;
  Eigen::Matrix3d ref = Eigen::Matrix3d::Zero();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double s = 0;
      for (const auto& p : pts) s += (p[a] - mean[a]) * (p[b] - mean[b]);
      ref(a, b) = s / 50.0;
    }
  CHECK((neighborhood_covariance(pts).full() - ref).cwiseAbs().maxCoeff() < 1e-12);

  // Indexed overload: center plus neighbors.
  const std::vector<std::int32_t> nbrs{3, 7, 9};
  const std::vector<Vec3> subset{pts[0], pts[3], pts[7], pts[9]};
  CHECK((neighborhood_covariance(pts, 0, nbrs).full() - neighborhood_covariance(subset).full()).cwiseAbs().maxCoeff() <
        1e-14);
}

TEST_CASE("smallest eigenvector") {
  Sym3 d;
  d.v = {2, 0, 0, 1, 0, 0};
  const auto r = smallest_eigenvector(d);
  CHECK(r.vector.isApprox(Vec3(0, 0, 1), 1e-12));
  CHECK(std::abs(r.eigenvalue) < 1e-15);
  CHECK_FALSE(r.degenerate);

  const Sym3 id = Sym3::from_full(Eigen::Matrix3d::Identity());
  const auto ri = smallest_eigenvector(id);
  CHECK(ri.degenerate);
  CHECK(std::abs(ri.vector.norm() - 1.0) < 1e-12);
  CHECK((id.full() * ri.vector - ri.vector).norm() < 1e-12);

  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rng.normal();
    const Eigen::Matrix3d q = Eigen::HouseholderQR<Eigen::Matrix3d>(m).householderQ();
    const Eigen::Matrix3d c = q * Eigen::Vector3d(3, 2, 1).asDiagonal() * q.transpose();
    const auto e = smallest_eigenvector(Sym3::from_full(c));
    CHECK(std::abs(std::abs(e.vector.dot(q.col(2))) - 1.0) < 1e-8);
    CHECK(e.eigenvalue == doctest::Approx(1.0).epsilon(1e-10));
    // Sign rule: largest-magnitude component positive.
    Eigen::Index arg;
    e.vector.cwiseAbs().maxCoeff(&arg);
    CHECK(e.vector[arg] > 0);
  }
}

TEST_CASE("plane normals are exact") {
  PointCloud plane = fixtures::plane_grid(10, 10, 0.1);
  plane.normals.reset();
  const auto est = estimate_normals(plane, knn_graph(plane, 8));
  REQUIRE(est.cloud.normals);
  for (const auto& n : *est.cloud.normals) CHECK(std::min(angle(n, Vec3(0, 0, 1)), angle(n, Vec3(0, 0, -1))) < 1e-6);
}

TEST_CASE("sphere normals point outward and are accurate") {
  PointCloud s = fixtures::sphere(2048);
  s.normals.reset();
  const auto est = estimate_normals(s, knn_graph(s, 16));
  std::vector<double> errs;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3& n = (*est.cloud.normals)[i];
    CHECK(n.dot(s.positions[i]) > 0.0);
    errs.push_back(angle(n, s.positions[i]));
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] < 5.0 * std::numbers::pi / 180.0);
}

TEST_CASE("collinear neighborhoods are flagged degenerate") {
  PointCloud line;
  for (int i = 0; i < 10; ++i) line.positions.emplace_back(i, 0, 0);
  const auto est = estimate_normals(line, knn_graph(line, 3));
  CHECK(est.degenerate_points.size() == 10);
  for (const auto& n : *est.cloud.normals) CHECK(std::abs(n.norm() - 1.0) < 1e-12);
}
