#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "srgnet/types.hpp"

namespace srgnet {

/// Symmetric 3x3 matrix stored as its six unique entries
/// (xx, xy, xz, yy, yz, zz).
struct Sym3 {
  std::array<double, 6> v{};

  double xx() const { return v[0]; }
  double xy() const { return v[1]; }
  double xz() const { return v[2]; }
  double yy() const { return v[3]; }
  double yz() const { return v[4]; }
  double zz() const { return v[5]; }

  Eigen::Matrix3d full() const;
  double trace() const { return v[0] + v[3] + v[5]; }
  /// Row-major 9-vector of the full matrix.
  std::array<double, 9> vectorized() const;

  static Sym3 from_full(const Eigen::Matrix3d& m);
};

/// Population covariance (1/m) * sum (p - mean)(p - mean)^T.
Sym3 neighborhood_covariance(std::span<const Vec3> points);

/// Covariance of point `center` together with its graph neighbors.
Sym3 neighborhood_covariance(std::span<const Vec3> points, std::size_t center, std::span<const std::int32_t> nbrs);

struct EigenvectorResult {
  Vec3 vector;
  double eigenvalue = 0.0;
  /// Set when the two smallest eigenvalues are closer than 1e-12 * trace; the
  /// returned vector is then one arbitrary member of the eigenplane.
  bool degenerate = false;
};

/// Unit eigenvector of the smallest eigenvalue, sign chosen so that the
/// component of largest magnitude is positive.
EigenvectorResult smallest_eigenvector(const Sym3& c);

struct NormalEstimate {
  PointCloud cloud;  // input positions with normals attached
  std::vector<std::size_t> degenerate_points;
};

/// PCA normals over {i} plus the graph neighborhood of i, oriented away from
/// the cloud centroid.
NormalEstimate estimate_normals(const PointCloud& cloud, const NeighborGraph& graph);

}  // namespace srgnet
