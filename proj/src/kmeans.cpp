#include "srgnet/kmeans.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "srgnet/rng.hpp"

namespace srgnet {

namespace {

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  c.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    c.row(j) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
  }
  return c;
}

}  // namespace

double kmeans_inertia(const Eigen::MatrixXd& features, const Eigen::MatrixXd& centroids, const LabelMap& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    total += (features.row(i) - centroids.row(labels.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return total;
}

KmeansResult kmeans(const Eigen::MatrixXd& features, int k, const KmeansOptions& options) {
  const Eigen::Index n = features.rows();
  if (n == 0) throw Error(ErrorCode::EmptyCloud, "kmeans on zero points");
  if (features.cols() < 1) throw Error(ErrorCode::ShapeMismatch, "kmeans needs at least one feature column");
  if (k < 1 || k > n)
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " with " + std::to_string(n) + " points");
  if (!features.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite kmeans feature");
  if (options.max_iter < 1) throw Error(ErrorCode::InvalidConfig, "kmeans max_iter must be >= 1");

  Rng rng(options.seed);
  KmeansResult r;
  r.centroids = plus_plus_init(features, k, rng);
  r.labels.num_labels = k;
  r.labels.labels.assign(static_cast<std::size_t>(n), -1);

  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int it = 0; it < options.max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d2 = (features.row(i) - r.centroids.row(j)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = j;
        }
      }
      int& slot = r.labels.labels[static_cast<std::size_t>(i)];
      if (slot != best) changed = true;
      slot = best;
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, features.cols());
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = r.labels.labels[static_cast<std::size_t>(i)];
      sums.row(l) += features.row(i);
      ++counts[static_cast<std::size_t>(l)];
    }
    for (int j = 0; j < k; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0) r.centroids.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];

    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) continue;
      // Steal the worst-served point from a cluster that can spare it.
      Eigen::Index far = -1;
      double far_d2 = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = r.labels.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(l)] < 2) continue;
        const double d2 = (features.row(i) - r.centroids.row(l)).squaredNorm();
        if (d2 > far_d2) {
          far_d2 = d2;
          far = i;
        }
      }
      if (far < 0) break;
      int& slot = r.labels.labels[static_cast<std::size_t>(far)];
      --counts[static_cast<std::size_t>(slot)];
      slot = j;
      counts[static_cast<std::size_t>(j)] = 1;
      r.centroids.row(j) = features.row(far);
      r.reseeded.push_back(j);
      changed = true;
    }

    const double inertia = kmeans_inertia(features, r.centroids, r.labels);
    const double prev = r.inertia_history.empty() ? std::numeric_limits<double>::infinity() : r.inertia_history.back();
    r.inertia_history.push_back(inertia);
    r.iterations = it + 1;
    r.inertia = inertia;
    if (!changed || prev - inertia <= options.tol * prev) break;
  }
  return r;
}

Eigen::MatrixXd point_features(const PointCloud& cloud) {
  require_valid(cloud);
  if (!cloud.normals) throw Error(ErrorCode::MissingNormals, "point features need normals");
  const auto n = static_cast<Eigen::Index>(cloud.size());
  Eigen::MatrixXd f(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.block<1, 3>(i, 0) = cloud.positions[static_cast<std::size_t>(i)].transpose();
    f.block<1, 3>(i, 3) = (*cloud.normals)[static_cast<std::size_t>(i)].transpose();
  }
  for (Eigen::Index b = 0; b < 6; b += 3) {
    auto block = f.middleCols(b, 3);
    const Eigen::RowVector3d mean = block.colwise().mean();
    block.rowwise() -= mean;
    const double rms = std::sqrt(block.rowwise().squaredNorm().mean());
    if (rms > 0.0) block /= rms;
  }
  return f;
}

}  // namespace srgnet
