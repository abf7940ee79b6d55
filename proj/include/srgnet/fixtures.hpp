#pragma once

#include <cstddef>
#include <cstdint>

#include "srgnet/types.hpp"

// Synthetic point clouds with known part membership, used by the tests, the
// acceptance suite and the bundled sample data.
namespace srgnet::fixtures {

struct LabeledCloud {
  PointCloud cloud;
  LabelMap labels;
};

/// nx x ny grid on z = 0 with the given spacing; normals (0,0,1).
PointCloud plane_grid(std::size_t nx, std::size_t ny, double spacing);

/// Two copies of plane_grid at z = 0 (label 0) and z = gap (label 1).
LabeledCloud parallel_planes(std::size_t nx, std::size_t ny, double spacing, double gap);

/// Two half-planes meeting at a right angle along the x axis: the floor
/// {z = 0, y >= 0} (label 0) and the wall {y = 0, z > 0} (label 1). Points
/// are jittered grid samples, so the cloud has no exact distance ties.
LabeledCloud dihedral(std::size_t n_points, std::uint64_t seed);

/// Fibonacci-lattice sample of a sphere, normals set to the analytic ones.
PointCloud sphere(std::size_t n_points, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Isotropic Gaussian blobs; label = generating blob.
LabeledCloud gaussian_blobs(std::span<const Vec3> centers, std::size_t per_blob, double sigma, std::uint64_t seed);

/// Sphere head on a cylinder body on a box base, surfaces only, hidden parts
/// removed. Labels: 0 head, 1 body, 2 base. No normals attached.
LabeledCloud three_part_figure(std::size_t n_points, std::uint64_t seed);

/// Uniform random points in the unit cube (general position with
/// probability one).
PointCloud random_cube(std::size_t n_points, std::uint64_t seed);

}  // namespace srgnet::fixtures
