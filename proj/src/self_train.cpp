#include "srgnet/self_train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Dense>

#include "srgnet/evaluation.hpp"

namespace srgnet {

void check_train_config(const TrainConfig& c) {
  if (c.iterations < 1) throw Error(ErrorCode::InvalidConfig, "iterations must be >= 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw Error(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
  if (c.min_labels < 1) throw Error(ErrorCode::InvalidConfig, "min_labels must be >= 1");
}

std::string TrainHistory::to_csv() const {
  std::string out = "iteration,loss,n_labels,agreement\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.17g\n", r.iteration, r.loss, r.n_labels, r.agreement);
    out += buf;
  }
  return out;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << to_csv();
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

LabelMap refine_targets(const LabelMap& pred, const LabelMap& srg_clusters) {
  if (pred.size() != srg_clusters.size())
    throw Error(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) + " points, clusters " +
                                               std::to_string(srg_clusters.size()));
  check_labels(pred);
  check_labels(srg_clusters);
  const auto k = static_cast<std::size_t>(pred.num_labels);
  std::vector<int> counts(static_cast<std::size_t>(srg_clusters.num_labels) * k, 0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    ++counts[static_cast<std::size_t>(srg_clusters.labels[i]) * k + static_cast<std::size_t>(pred.labels[i])];
  std::vector<int> mode(static_cast<std::size_t>(srg_clusters.num_labels), 0);
  for (std::size_t c = 0; c < mode.size(); ++c) {
    int best = 0;
    for (std::size_t l = 1; l < k; ++l)
      if (counts[c * k + l] > counts[c * k + static_cast<std::size_t>(best)]) best = static_cast<int>(l);
    mode[c] = best;
  }
  LabelMap out;
  out.num_labels = pred.num_labels;
  out.labels.reserve(pred.size());
  for (int c : srg_clusters.labels) out.labels.push_back(mode[static_cast<std::size_t>(c)]);
  return out;
}

void warm_start_output(ModelParams& model, const PointCloud& cloud, const LabelMap& clusters) {
  check_labels(clusters, cloud.size());
  const int k = model.config.out_labels;
  ad::Tape tape;
  const ForwardResult fr = forward(tape, cloud, model);
  const ad::Mat& h = fr.features.value();
  const ad::Mat& z = fr.logits.value();
  const Eigen::Index n = h.rows(), d = h.cols();

  std::vector<int> row_of(static_cast<std::size_t>(clusters.num_labels), -1);
  std::vector<double> size;
  for (int c : clusters.labels)
    if (row_of[static_cast<std::size_t>(c)] < 0) {
      row_of[static_cast<std::size_t>(c)] = static_cast<int>(size.size());
      size.push_back(0.0);
    }
  const auto used = static_cast<Eigen::Index>(size.size());
  if (used > k)
    throw Error(ErrorCode::InvalidConfig,
                std::to_string(used) + " clusters do not fit in " + std::to_string(k) + " output labels");

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(used, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = row_of[static_cast<std::size_t>(clusters.labels[static_cast<std::size_t>(i)])];
    size[static_cast<std::size_t>(r)] += 1.0;
    cost.row(r) -= z.row(i);
  }
  std::vector<int> label_of(static_cast<std::size_t>(used), 0);
  for (const auto& [r, l] : hungarian(cost).pairs) label_of[static_cast<std::size_t>(r)] = l;

  // Weighted least squares with an unpenalized bias column.
  Eigen::MatrixXd a(n, d + 1);
  a.leftCols(d) = h;
  a.col(d).setOnes();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = row_of[static_cast<std::size_t>(clusters.labels[static_cast<std::size_t>(i)])];
    y(i, label_of[static_cast<std::size_t>(r)]) = 1.0;
    w(i) = 1.0 / size[static_cast<std::size_t>(r)];
  }
  Eigen::MatrixXd gram = a.transpose() * w.asDiagonal() * a;
  const double ridge = 1e-3 * std::max(gram.diagonal().head(d).mean(), 1e-12);
  for (Eigen::Index j = 0; j < d; ++j) gram(j, j) += ridge;
  const Eigen::MatrixXd x = gram.ldlt().solve(a.transpose() * w.asDiagonal() * y);
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "output warm start produced non-finite weights");
  model.params.at("head.out.w").value() = x.topRows(d);
  model.params.at("head.out.b").value() = x.bottomRows(1);
}

TrainResult train(const PointCloud& cloud, const LabelMap& srg_labels, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  require_valid(cloud);
  if (!cloud.normals) throw Error(ErrorCode::MissingNormals, "training consumes normals");
  check_labels(srg_labels, cloud.size());
  check_train_config(train_config);
  check_model_config(model_config);
  if (model_config.out_labels < count_distinct(srg_labels))
    throw Error(ErrorCode::InvalidConfig, "out_labels " + std::to_string(model_config.out_labels) + " below the " +
                                              std::to_string(count_distinct(srg_labels)) + " SRG clusters");

  TrainResult r{init_model(model_config, train_config.seed), {}, {}};
  const int k = model_config.out_labels;
  if (train_config.center_output_bias) {
    const ad::Mat logits = predict_logits(cloud, r.model);
    r.model.params.at("head.out.b").value() -= logits.colwise().mean();
  }
  if (train_config.warm_start) warm_start_output(r.model, cloud, srg_labels);
  for (int it = 0; it < train_config.iterations; ++it) {
    ad::Tape tape;
    const ForwardResult fr = forward(tape, cloud, r.model);
    LabelMap pred{ad::argmax_rows(fr.logits.value()), k};
    const int distinct = count_distinct(pred);
    if (distinct < train_config.min_labels) {
      r.history.collapse_stop = true;
      break;
    }
    const LabelMap target = refine_targets(pred, srg_labels);
    const ad::Tensor loss = ad::softmax_cross_entropy(tape, fr.logits, target.labels);
    const double loss_value = loss.value()(0, 0);
    if (!std::isfinite(loss_value))
      throw Error(ErrorCode::NonFinite, "loss became non-finite at iteration " + std::to_string(it));
    tape.backward(loss);
    ad::sgd_step(r.model.params, train_config.lr, train_config.momentum);
    for (const auto& [name, t] : r.model.params.entries())
      if (!t.value().allFinite())
        throw Error(ErrorCode::NonFinite, "parameter " + name + " became non-finite at iteration " + std::to_string(it));

    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) agree += pred.labels[i] == target.labels[i];
    r.history.records.push_back(
        {it, loss_value, distinct, static_cast<double>(agree) / static_cast<double>(pred.size())});
  }
  r.labels = infer(r.model, cloud);
  return r;
}

LabelMap infer(const ModelParams& model, const PointCloud& cloud) {
  const auto argmax = ad::argmax_rows(predict_logits(cloud, model));
  return compact_labels(argmax);
}

}  // namespace srgnet
