#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "srgnet/types.hpp"

namespace srgnet {

/// counts(p, g) = points with predicted label p and ground-truth label g.
struct ConfusionMatrix {
  int predicted = 0;
  int truth = 0;
  std::vector<std::int64_t> counts;  // row-major predicted x truth

  std::int64_t at(int p, int g) const { return counts[static_cast<std::size_t>(p * truth + g)]; }
  std::int64_t total() const;
};

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt);

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, column), ascending rows
  double total = 0.0;
};

/// Minimum-cost assignment of min(rows, cols) pairs. Among optimal
/// assignments returns the one whose column sequence (by row) is
/// lexicographically smallest.
Assignment hungarian(const Eigen::MatrixXd& cost);

struct MiouResult {
  double miou = 0.0;
  std::vector<std::pair<int, double>> per_part;  // (ground-truth label, IoU) for labels present
  std::vector<std::pair<int, int>> matching;     // (predicted, ground-truth)
};

/// Predicted labels are matched to ground-truth parts by maximum total
/// intersection; unmatched parts score 0. Averages over ground-truth labels
/// that occur.
MiouResult miou(const LabelMap& pred, const LabelMap& gt);

/// Fraction of each predicted cluster taken by its dominant ground-truth
/// label, indexed by predicted label (0 for empty clusters).
std::vector<double> cluster_purity(const LabelMap& pred, const LabelMap& gt);

struct LatencyStats {
  double median_ms = 0.0;
  double mean_ms = 0.0;
  std::vector<double> samples_ms;
};

/// Wall-clock timing over `repetitions` calls after one untimed warm-up.
LatencyStats latency(const std::function<void()>& op, int repetitions);

/// {miou, per_part, matching, latency_ms, n_points, config}; latency_ms is
/// null when no timing was taken.
nlohmann::ordered_json metrics_json(const MiouResult& result, const std::optional<LatencyStats>& timing,
                                    std::size_t n_points, const nlohmann::ordered_json& config);

}  // namespace srgnet
