#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "srgnet/evaluation.hpp"
#include "srgnet/io.hpp"
#include "srgnet/kmeans.hpp"
#include "srgnet/model.hpp"
#include "srgnet/self_train.hpp"
#include "srgnet/srg.hpp"

namespace srgnet {

/// Every tunable of the command-line front end. One seed drives all random
/// choices (downsampling, region seeds, k-means, weight init).
struct RunConfig {
  std::size_t n_points = 2048;  // 0 keeps every point
  std::string downsample = "fps";
  int normal_k = 20;
  int graph_k = 20;

  std::optional<double> d_max;
  std::optional<double> theta_max_deg;
  int srg_target_k = 6;
  int min_cluster = 10;
  double max_surface_variation = 0.04;

  int kmeans_k = 6;
  int kmeans_max_iter = 100;

  ModelConfig model;
  TrainConfig train;

  int latency_reps = 0;  // 0 skips timing
  std::uint64_t seed = 0;
};

/// Applies one `key = value` setting. Unknown keys and malformed values throw
/// InvalidConfig.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin = "config");

/// Validates ranges; throws InvalidConfig.
void check_run_config(const RunConfig& config);

/// Fully resolved configuration, keys as accepted by set_config_value.
nlohmann::ordered_json config_json(const RunConfig& config);

/// Cloud after optional downsampling and normal estimation, plus the indices
/// of the kept input points.
struct PreparedCloud {
  PointCloud cloud;
  std::vector<std::size_t> kept;
};

PreparedCloud prepare_cloud(const PointCloud& raw, const RunConfig& config);
LabelMap run_srg(const PointCloud& cloud, const RunConfig& config);
KmeansResult run_kmeans(const PointCloud& cloud, const RunConfig& config);
LabelMap select_labels(const LabelMap& labels, const std::vector<std::size_t>& kept);

// Subcommands. Each reads and writes files only.
void cmd_normals(const std::filesystem::path& in, const std::filesystem::path& out, const RunConfig& config);
LabelMap cmd_srg(const std::filesystem::path& in, const std::filesystem::path& out_labels,
                 const std::optional<std::filesystem::path>& out_ply, const RunConfig& config);
LabelMap cmd_kmeans(const std::filesystem::path& in, const std::filesystem::path& out_labels,
                    const std::optional<std::filesystem::path>& out_ply, const RunConfig& config);
TrainResult cmd_train(const std::filesystem::path& in, const std::optional<std::filesystem::path>& srg_labels,
                      const std::filesystem::path& out_model, const std::filesystem::path& out_labels,
                      const std::optional<std::filesystem::path>& out_history, const RunConfig& config);
LabelMap cmd_infer(const std::filesystem::path& model, const std::filesystem::path& in,
                   const std::filesystem::path& out_labels, const std::optional<std::filesystem::path>& out_ply,
                   const RunConfig& config);
MiouResult cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt,
                    const std::optional<std::filesystem::path>& out_json);

struct PipelineResult {
  LabelMap labels;
  LabelMap srg_labels;
  TrainHistory history;
  nlohmann::ordered_json metrics;
};

/// downsample -> normals -> SRG -> self-training -> exports. The run
/// directory receives points.xyz, srg_labels.txt, srg.ply, kmeans_labels.txt,
/// model.txt, history.csv, labels.txt, segmentation.ply, metrics.json and
/// manifest.json.
PipelineResult cmd_pipeline(const std::filesystem::path& in, const std::optional<std::filesystem::path>& gt,
                            const std::filesystem::path& out_dir, const RunConfig& config);

}  // namespace srgnet
