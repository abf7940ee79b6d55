#include "srgnet/fixtures.hpp"

#include <cmath>
#include <numbers>

#include "srgnet/rng.hpp"

namespace srgnet::fixtures {

PointCloud plane_grid(std::size_t nx, std::size_t ny, double spacing) {
  PointCloud cloud;
  cloud.source_id = "plane_grid";
  std::vector<Vec3> normals;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      cloud.positions.emplace_back(spacing * static_cast<double>(i), spacing * static_cast<double>(j), 0.0);
      normals.emplace_back(0.0, 0.0, 1.0);
    }
  }
  cloud.normals = std::move(normals);
  return cloud;
}

LabeledCloud parallel_planes(std::size_t nx, std::size_t ny, double spacing, double gap) {
  LabeledCloud out;
  out.cloud = plane_grid(nx, ny, spacing);
  out.cloud.source_id = "parallel_planes";
  const std::size_t half = out.cloud.size();
  for (std::size_t i = 0; i < half; ++i) {
    out.cloud.positions.push_back(out.cloud.positions[i] + Vec3(0.0, 0.0, gap));
    out.cloud.normals->push_back(Vec3(0.0, 0.0, 1.0));
  }
  out.labels.num_labels = 2;
  out.labels.labels.assign(half, 0);
  out.labels.labels.resize(2 * half, 1);
  return out;
}

LabeledCloud dihedral(std::size_t n_points, std::uint64_t seed) {
  Rng rng(seed);
  LabeledCloud out;
  out.cloud.source_id = "dihedral";
  const std::size_t per_side = n_points / 2;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(per_side) * 1.25)));
  const double jitter = 0.15;
  for (int side = 0; side < 2; ++side) {
    const std::size_t count = side == 0 ? per_side : n_points - per_side;
    for (std::size_t k = 0; k < count; ++k) {
      const double u = static_cast<double>(k % cols) + rng.uniform(-jitter, jitter);
      const double v = static_cast<double>(k / cols) + 0.5 + rng.uniform(-jitter, jitter);
      out.cloud.positions.push_back(side == 0 ? Vec3(u, v, 0.0) : Vec3(u, 0.0, v));
      out.labels.labels.push_back(side);
    }
  }
  out.labels.num_labels = 2;
  return out;
}

PointCloud sphere(std::size_t n_points, double radius, const Vec3& center) {
  PointCloud cloud;
  cloud.source_id = "sphere";
  std::vector<Vec3> normals;
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n_points; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n_points);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    const Vec3 n(r * std::cos(phi), r * std::sin(phi), z);
    cloud.positions.push_back(center + radius * n);
    normals.push_back(n.normalized());
  }
  cloud.normals = std::move(normals);
  return cloud;
}

LabeledCloud gaussian_blobs(std::span<const Vec3> centers, std::size_t per_blob, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  LabeledCloud out;
  out.cloud.source_id = "blobs";
  for (std::size_t b = 0; b < centers.size(); ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      const double x = rng.normal();
      const double y = rng.normal();
      const double z = rng.normal();
      out.cloud.positions.push_back(centers[b] + sigma * Vec3(x, y, z));
      out.labels.labels.push_back(static_cast<int>(b));
    }
  }
  out.labels.num_labels = static_cast<int>(centers.size());
  return out;
}

namespace {

// Figure dimensions, model units.
constexpr double kBoxHalf = 0.75;
constexpr double kBoxHeight = 0.35;
constexpr double kBodyRadius = 0.45;
constexpr double kBodyTop = 1.8;
constexpr double kHeadRadius = 0.6;
const Vec3 kHeadCenter(0.0, 0.0, 2.3);

bool inside_head(const Vec3& p) { return (p - kHeadCenter).norm() < kHeadRadius; }
bool inside_body(const Vec3& p) {
  return p.z() > kBoxHeight && p.z() < kBodyTop && std::hypot(p.x(), p.y()) < kBodyRadius;
}

Vec3 sample_head(Rng& rng) {
  Vec3 d;
  do {
    d = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (d.norm() < 1e-9);
  return kHeadCenter + kHeadRadius * d.normalized();
}

Vec3 sample_body(Rng& rng) {
  const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return {kBodyRadius * std::cos(t), kBodyRadius * std::sin(t), rng.uniform(kBoxHeight, kBodyTop)};
}

Vec3 sample_base(Rng& rng) {
  // Faces in proportion to area: top, bottom, four sides.
  const double cap = (2 * kBoxHalf) * (2 * kBoxHalf);
  const double side = (2 * kBoxHalf) * kBoxHeight;
  const double total = 2 * cap + 4 * side;
  const double pick = rng.uniform(0.0, total);
  const double a = rng.uniform(-kBoxHalf, kBoxHalf);
  if (pick < cap) return {a, rng.uniform(-kBoxHalf, kBoxHalf), kBoxHeight};
  if (pick < 2 * cap) return {a, rng.uniform(-kBoxHalf, kBoxHalf), 0.0};
  const double h = rng.uniform(0.0, kBoxHeight);
  const int face = static_cast<int>((pick - 2 * cap) / side);
  switch (face) {
    case 0: return {a, -kBoxHalf, h};
    case 1: return {a, kBoxHalf, h};
    case 2: return {-kBoxHalf, a, h};
    default: return {kBoxHalf, a, h};
  }
}

}  // namespace

LabeledCloud three_part_figure(std::size_t n_points, std::uint64_t seed) {
  Rng rng(seed);
  const double head_area = 4 * std::numbers::pi * kHeadRadius * kHeadRadius;
  const double body_area = 2 * std::numbers::pi * kBodyRadius * (kBodyTop - kBoxHeight);
  const double base_area = 2 * (2 * kBoxHalf) * (2 * kBoxHalf) + 4 * (2 * kBoxHalf) * kBoxHeight;
  const double total = head_area + body_area + base_area;

  LabeledCloud out;
  out.cloud.source_id = "three_part_figure";
  // Rejection keeps the surviving density uniform across parts.
  while (out.cloud.size() < n_points) {
    const double pick = rng.uniform(0.0, total);
    Vec3 p;
    int part;
    if (pick < head_area) {
      p = sample_head(rng);
      part = 0;
      if (inside_body(p)) continue;
    } else if (pick < head_area + body_area) {
      p = sample_body(rng);
      part = 1;
      if (inside_head(p)) continue;
    } else {
      p = sample_base(rng);
      part = 2;
      if (p.z() == kBoxHeight && std::hypot(p.x(), p.y()) < kBodyRadius) continue;
    }
    out.cloud.positions.push_back(p);
    out.labels.labels.push_back(part);
  }
  out.labels.num_labels = 3;
  return out;
}

PointCloud random_cube(std::size_t n_points, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.source_id = "random_cube";
  for (std::size_t i = 0; i < n_points; ++i) cloud.positions.emplace_back(rng.uniform01(), rng.uniform01(), rng.uniform01());
  return cloud;
}

}  // namespace srgnet::fixtures
