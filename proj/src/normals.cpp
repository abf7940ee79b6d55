#include "srgnet/normals.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace srgnet {

Eigen::Matrix3d Sym3::full() const {
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
  return m;
}

std::array<double, 9> Sym3::vectorized() const {
  return {v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]};
}

Sym3 Sym3::from_full(const Eigen::Matrix3d& m) {
  return Sym3{{m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)), m(1, 1),
               0.5 * (m(1, 2) + m(2, 1)), m(2, 2)}};
}

namespace {

template <typename PointAt>
Sym3 covariance_of(std::size_t m, PointAt point_at) {
  Vec3 mean = Vec3::Zero();
  for (std::size_t i = 0; i < m; ++i) mean += point_at(i);
  mean /= static_cast<double>(m);
  Sym3 c;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3 d = point_at(i) - mean;
    c.v[0] += d.x() * d.x();
    c.v[1] += d.x() * d.y();
    c.v[2] += d.x() * d.z();
    c.v[3] += d.y() * d.y();
    c.v[4] += d.y() * d.z();
    c.v[5] += d.z() * d.z();
  }
  for (double& e : c.v) e /= static_cast<double>(m);
  return c;
}

}  // namespace

Sym3 neighborhood_covariance(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "covariance of zero points");
  return covariance_of(points.size(), [&](std::size_t i) -> const Vec3& { return points[i]; });
}

Sym3 neighborhood_covariance(std::span<const Vec3> points, std::size_t center,
                             std::span<const std::int32_t> nbrs) {
  return covariance_of(nbrs.size() + 1, [&](std::size_t i) -> const Vec3& {
    return i == 0 ? points[center] : points[static_cast<std::size_t>(nbrs[i - 1])];
  });
}

EigenvectorResult smallest_eigenvector(const Sym3& c) {
  const Eigen::Matrix3d m = c.full();
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, "covariance has non-finite entries");

  // Eigenvalues come back in increasing order.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m);
  EigenvectorResult out;
  out.eigenvalue = solver.eigenvalues()[0];
  out.vector = solver.eigenvectors().col(0).normalized();
  const double gap = solver.eigenvalues()[1] - solver.eigenvalues()[0];
  out.degenerate = gap < 1e-12 * std::abs(c.trace()) || (c.trace() == 0.0);

  int largest = 0;
  out.vector.cwiseAbs().maxCoeff(&largest);
  if (out.vector[largest] < 0.0) out.vector = -out.vector;
  return out;
}

NormalEstimate estimate_normals(const PointCloud& cloud, const NeighborGraph& graph) {
  require_valid(cloud);
  if (graph.size() != cloud.size()) throw Error(ErrorCode::ShapeMismatch, "graph built over a different cloud");
  if (graph.k() < 3) throw Error(ErrorCode::InvalidConfig, "normal estimation needs k >= 3");

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud.positions) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  NormalEstimate out;
  out.cloud.positions = cloud.positions;
  out.cloud.source_id = cloud.source_id;
  std::vector<Vec3> normals(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto eig = smallest_eigenvector(neighborhood_covariance(cloud.positions, i, graph.neighbors(i)));
    Vec3 n = eig.vector;
    if (n.dot(cloud.positions[i] - centroid) < 0.0) n = -n;
    normals[i] = n;
    if (eig.degenerate) out.degenerate_points.push_back(i);
  }
  out.cloud.normals = std::move(normals);
  return out;
}

}  // namespace srgnet
