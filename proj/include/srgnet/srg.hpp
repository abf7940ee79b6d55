#pragma once

#include <cstdint>
#include <optional>

#include "srgnet/types.hpp"

namespace srgnet {

struct SrgParams {
  double d_max = 0.0;         // max Euclidean step between grown neighbors
  double theta_max = 0.0;     // max normal angle between grown neighbors, radians
  int target_k = 6;
  int min_cluster = 10;
  /// Points whose neighborhood surface variation lambda_min / trace exceeds
  /// this may join a region but do not extend it. Values >= 1/3 disable the
  /// gate.
  double max_surface_variation = 0.04;
  std::uint64_t rng_seed = 0;
};

void check_srg_params(const SrgParams& params);

/// 1 - |na . nb|: zero for parallel or antiparallel normals, one for
/// orthogonal ones.
double normal_affinity(const Vec3& na, const Vec3& nb);

/// lambda_min / (lambda_0 + lambda_1 + lambda_2) of the covariance over each
/// point and its graph neighbors; 0 on planes, up to 1/3 for isotropic
/// neighborhoods.
std::vector<double> surface_variation(const PointCloud& cloud, const NeighborGraph& graph);

/// Seed region growing over the KNN graph. Regions start at uniformly random
/// unassigned points (low surface variation points first) and expand
/// breadth-first, visiting each frontier point's neighbors in ascending
/// distance order; a neighbor joins when it is within d_max and its normal is
/// within theta_max (sign-insensitive). Joined points whose surface variation
/// exceeds max_surface_variation are not pushed onto the frontier, which stops
/// growth from creeping across creases where PCA normals blend. Labels are
/// numbered in region creation order.
LabelMap grow(const PointCloud& cloud, const NeighborGraph& graph, const SrgParams& params);

/// Reduces the cluster count to target_k by repeatedly folding the smallest
/// cluster into the adjacent cluster with the most similar mean normal.
/// Clusters smaller than min_cluster are folded first, even when the count is
/// already at or below target_k.
LabelMap merge_to_target(const PointCloud& cloud, const LabelMap& labels, const NeighborGraph& graph,
                         int target_k, int min_cluster = 0);

struct ThresholdOverrides {
  std::optional<double> d_max;
  std::optional<double> theta_max;
};

/// Fills d_max (2.5 x median nearest-neighbor distance, lower median) and
/// theta_max (20 degrees) unless overridden. Other fields pass through.
SrgParams auto_thresholds(const NeighborGraph& graph, SrgParams base = {}, const ThresholdOverrides& overrides = {});

/// grow followed by merge_to_target.
LabelMap segment_srg(const PointCloud& cloud, const NeighborGraph& graph, const SrgParams& params);

}  // namespace srgnet
