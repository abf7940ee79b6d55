#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srgnet/model.hpp"
#include "srgnet/types.hpp"

namespace srgnet {

struct TrainConfig {
  int iterations = 2000;
  double lr = 0.005;
  double momentum = 0.9;
  int min_labels = 2;  // stop once fewer distinct labels are predicted
  std::uint64_t seed = 0;
  /// Before the first step, shift the output bias so every class has zero
  /// mean logit over the cloud; otherwise the shared offset of the untrained
  /// network picks the same label for every point.
  bool center_output_bias = true;
  /// Before the first step, refit the output layer so that every SRG cluster
  /// starts with its own predicted label (see warm_start_output). Without it,
  /// clusters that happen to share a majority label under the random
  /// initialization are merged by the first refinement and never separate.
  bool warm_start = true;

  bool operator==(const TrainConfig&) const = default;
};

void check_train_config(const TrainConfig& config);

struct TrainRecord {
  int iteration = 0;
  double loss = 0.0;
  int n_labels = 0;
  double agreement = 0.0;  // fraction of points whose prediction equals its refined target

  bool operator==(const TrainRecord&) const = default;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
  bool collapse_stop = false;

  bool operator==(const TrainHistory&) const = default;
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Within each SRG cluster, every point's target becomes the most frequent
/// predicted label of the cluster (ties to the smallest label).
LabelMap refine_targets(const LabelMap& pred, const LabelMap& srg_clusters);

struct TrainResult {
  ModelParams model;
  TrainHistory history;
  LabelMap labels;  // compacted final prediction
};

/// Matches clusters to distinct output labels (Hungarian on summed logits of
/// the current model) and replaces the output layer by the cluster-balanced
/// ridge regression of the last hidden features onto those one-hot labels.
/// Requires out_labels >= number of occurring clusters.
void warm_start_output(ModelParams& model, const PointCloud& cloud, const LabelMap& clusters);

/// Per-cloud self-training: forward, argmax, refine against the SRG clusters,
/// cross-entropy, SGD with momentum.
TrainResult train(const PointCloud& cloud, const LabelMap& srg_labels, const ModelConfig& model_config,
                  const TrainConfig& train_config);

/// Forward, rowwise argmax, compaction.
LabelMap infer(const ModelParams& model, const PointCloud& cloud);

}  // namespace srgnet
