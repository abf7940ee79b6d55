#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "srgnet/types.hpp"

namespace srgnet {

struct KmeansOptions {
  int max_iter = 100;
  double tol = 1e-7;  // relative inertia change
  std::uint64_t seed = 0;
};

struct KmeansResult {
  LabelMap labels;  // centroid ids, num_labels = k
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  std::vector<int> reseeded;            // centroid ids reseeded after going empty
};

/// k-means++ seeding followed by Lloyd iterations. Features are rows.
/// Assignment ties go to the lowest centroid id; an empty cluster is reseeded
/// at the point farthest from its current centroid.
KmeansResult kmeans(const Eigen::MatrixXd& features, int k, const KmeansOptions& options = {});

/// Sum of squared distances from each row to its assigned centroid.
double kmeans_inertia(const Eigen::MatrixXd& features, const Eigen::MatrixXd& centroids, const LabelMap& labels);

/// N x 6 rows (x, y, z, nx, ny, nz); the position and normal blocks are each
/// shifted to zero mean and scaled to unit RMS norm.
Eigen::MatrixXd point_features(const PointCloud& cloud);

}  // namespace srgnet
