#include "srgnet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace srgnet {

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt) {
  if (pred.size() != gt.size())
    throw Error(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) + " points, ground truth " +
                                               std::to_string(gt.size()));
  check_labels(pred);
  check_labels(gt);
  ConfusionMatrix m{pred.num_labels, gt.num_labels, {}};
  m.counts.assign(static_cast<std::size_t>(pred.num_labels) * static_cast<std::size_t>(gt.num_labels), 0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    ++m.counts[static_cast<std::size_t>(pred.labels[i] * gt.num_labels + gt.labels[i])];
  return m;
}

namespace {

// Augmenting-path search restricted to allowed edges.
bool try_augment(int row, const std::vector<std::vector<char>>& allowed, std::vector<int>& col_owner,
                 std::vector<char>& seen) {
  const int n = static_cast<int>(allowed.size());
  for (int j = 0; j < n; ++j) {
    if (!allowed[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] || seen[static_cast<std::size_t>(j)]) continue;
    seen[static_cast<std::size_t>(j)] = 1;
    if (col_owner[static_cast<std::size_t>(j)] < 0 ||
        try_augment(col_owner[static_cast<std::size_t>(j)], allowed, col_owner, seen)) {
      col_owner[static_cast<std::size_t>(j)] = row;
      return true;
    }
  }
  return false;
}

bool has_perfect_matching(const std::vector<std::vector<char>>& allowed) {
  const std::size_t n = allowed.size();
  std::vector<int> owner(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<char> seen(n, 0);
    if (!try_augment(static_cast<int>(i), allowed, owner, seen)) return false;
  }
  return true;
}

}  // namespace

Assignment hungarian(const Eigen::MatrixXd& cost) {
  const auto rows = static_cast<int>(cost.rows());
  const auto cols = static_cast<int>(cost.cols());
  Assignment out;
  if (rows == 0 || cols == 0) return out;
  if (!cost.allFinite()) throw Error(ErrorCode::NonFinite, "hungarian cost must be finite");
  const int n = std::max(rows, cols);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  c.topLeftCorner(rows, cols) = cost;

  // Shortest augmenting path with potentials, 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  // Optimal assignments are exactly the perfect matchings on tight edges;
  // pick the lexicographically smallest one row by row.
  const double eps = 1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff());
  std::vector<std::vector<char>> tight(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      tight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          std::abs(c(i, j) - u[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(j + 1)]) <= eps;

  std::vector<int> chosen(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!tight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      auto trial = tight;
      for (int jj = 0; jj < n; ++jj) trial[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)] = jj == j;
      for (int ii = 0; ii < n; ++ii)
        if (ii != i) trial[static_cast<std::size_t>(ii)][static_cast<std::size_t>(j)] = 0;
      if (has_perfect_matching(trial)) {
        chosen[static_cast<std::size_t>(i)] = j;
        tight = std::move(trial);
        break;
      }
    }
  }
  for (int i = 0; i < rows; ++i) {
    const int j = chosen[static_cast<std::size_t>(i)];
    if (j >= 0 && j < cols) {
      out.pairs.emplace_back(i, j);
      out.total += cost(i, j);
    }
  }
  return out;
}

MiouResult miou(const LabelMap& pred, const LabelMap& gt) {
  const ConfusionMatrix m = confusion(pred, gt);
  Eigen::MatrixXd cost(m.predicted, m.truth);
  std::vector<std::int64_t> pred_size(static_cast<std::size_t>(m.predicted), 0), gt_size(static_cast<std::size_t>(m.truth), 0);
  for (int p = 0; p < m.predicted; ++p) {
    for (int g = 0; g < m.truth; ++g) {
      cost(p, g) = -static_cast<double>(m.at(p, g));
      pred_size[static_cast<std::size_t>(p)] += m.at(p, g);
      gt_size[static_cast<std::size_t>(g)] += m.at(p, g);
    }
  }
  const Assignment a = hungarian(cost);
  std::vector<int> match_of_gt(static_cast<std::size_t>(m.truth), -1);
  for (auto [p, g] : a.pairs) match_of_gt[static_cast<std::size_t>(g)] = p;

  MiouResult r;
  double total = 0.0;
  for (int g = 0; g < m.truth; ++g) {
    if (gt_size[static_cast<std::size_t>(g)] == 0) continue;
    const int p = match_of_gt[static_cast<std::size_t>(g)];
    double iou = 0.0;
    if (p >= 0) {
      const auto inter = m.at(p, g);
      const auto uni = pred_size[static_cast<std::size_t>(p)] + gt_size[static_cast<std::size_t>(g)] - inter;
      iou = static_cast<double>(inter) / static_cast<double>(uni);
      r.matching.emplace_back(p, g);
    }
    r.per_part.emplace_back(g, iou);
    total += iou;
  }
  if (r.per_part.empty()) throw Error(ErrorCode::EmptyCloud, "miou on zero points");
  r.miou = total / static_cast<double>(r.per_part.size());
  std::sort(r.matching.begin(), r.matching.end());
  return r;
}

std::vector<double> cluster_purity(const LabelMap& pred, const LabelMap& gt) {
  const ConfusionMatrix m = confusion(pred, gt);
  std::vector<double> out(static_cast<std::size_t>(m.predicted), 0.0);
  for (int p = 0; p < m.predicted; ++p) {
    std::int64_t size = 0, top = 0;
    for (int g = 0; g < m.truth; ++g) {
      size += m.at(p, g);
      top = std::max(top, m.at(p, g));
    }
    if (size > 0) out[static_cast<std::size_t>(p)] = static_cast<double>(top) / static_cast<double>(size);
  }
  return out;
}

LatencyStats latency(const std::function<void()>& op, int repetitions) {
  if (repetitions < 3) throw Error(ErrorCode::InvalidConfig, "latency needs at least 3 repetitions");
  op();
  LatencyStats s;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    op();
    const auto t1 = std::chrono::steady_clock::now();
    s.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = s.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  return s;
}

nlohmann::ordered_json metrics_json(const MiouResult& result, const std::optional<LatencyStats>& timing,
                                    std::size_t n_points, const nlohmann::ordered_json& config) {
  nlohmann::ordered_json j;
  j["miou"] = result.miou;
  auto& parts = j["per_part"] = nlohmann::ordered_json::array();
  for (auto [g, iou] : result.per_part) parts.push_back({{"part", g}, {"iou", iou}});
  auto& matching = j["matching"] = nlohmann::ordered_json::array();
  for (auto [p, g] : result.matching) matching.push_back({{"predicted", p}, {"part", g}});
  if (timing)
    j["latency_ms"] = {{"median", timing->median_ms}, {"mean", timing->mean_ms}, {"repetitions", timing->samples_ms.size()}};
  else
    j["latency_ms"] = nullptr;
  j["n_points"] = n_points;
  j["config"] = config;
  return j;
}

}  // namespace srgnet
