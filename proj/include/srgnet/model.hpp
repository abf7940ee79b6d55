#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srgnet/autodiff.hpp"
#include "srgnet/types.hpp"

namespace srgnet {

struct ModelConfig {
  int k_graph = 20;
  std::vector<int> edge_widths{64, 64, 64};
  int bottleneck_dim = 512;
  std::vector<int> head_widths{256, 128};
  int out_labels = 6;
  bool dynamic_recompute = true;
  /// Center positions on their centroid and scale to unit max radius before
  /// anything else sees them.
  bool normalize_input = true;
  /// Subtract the per-channel mean over points from per-point hidden
  /// features (no scaling).
  bool center_features = true;

  // Fixed sub-network shapes; exposed for small test models.
  int transformer_width = 64;
  int transformer_hidden = 128;
  std::vector<int> cov_widths{64, 64, 64};
  std::vector<int> graph_widths{128, 256};
  std::vector<int> post_widths{128, 256};  // followed by bottleneck_dim
  double slope = 0.2;

  bool operator==(const ModelConfig&) const = default;
};

/// Throws InvalidConfig on non-positive widths or counts.
void check_model_config(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  ad::ParamGroup params;
};

/// He-normal weights, zero biases, zero transformer output layer (so the
/// predicted transform starts at the identity).
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardResult {
  ad::Tensor logits;      // N x K
  ad::Tensor bottleneck;  // 1 x bottleneck_dim
  ad::Tensor transform;   // 3 x 3
  ad::Tensor features;    // N x last head width, input of the output layer
  std::vector<std::pair<std::string, double>> layer_norms;  // Frobenius norm per stage
};

/// The full network on one cloud (normals required, at least 2 points).
/// Neighborhoods hold min(k_graph, N - 1) points.
ForwardResult forward(ad::Tape& tape, const PointCloud& cloud, const ModelParams& model);

/// Forward on a throwaway tape; returns the N x K logits.
ad::Mat predict_logits(const PointCloud& cloud, const ModelParams& model);

/// Positions shifted to their centroid and scaled to unit max radius; normals
/// untouched.
PointCloud normalize_positions(const PointCloud& cloud);

/// Per-point neighborhood covariance, row-major 9 values per point.
ad::Mat covariance_features(const PointCloud& cloud, const NeighborGraph& graph);

void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace srgnet
