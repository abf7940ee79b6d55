#include "srgnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "srgnet/rng.hpp"

namespace srgnet::ad {

namespace {

Tensor make(Mat value, bool requires_grad, std::vector<std::size_t> shape = {}) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->shape = shape.empty() ? std::vector<std::size_t>{static_cast<std::size_t>(node->value.rows()),
                                                         static_cast<std::size_t>(node->value.cols())}
                              : std::move(shape);
  return Tensor(std::move(node));
}

std::string dims(const Mat& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace

Tensor Tensor::parameter(Mat value) { return make(std::move(value), true); }
Tensor Tensor::constant(Mat value) { return make(std::move(value), false); }

void Tensor::zero_grad() {
  node_->grad.setZero(node_->value.rows(), node_->value.cols());
  node_->has_grad = false;
}

void Tensor::accumulate(const Mat& g) const {
  if (!node_->has_grad) {
    if (node_->grad.rows() != node_->value.rows() || node_->grad.cols() != node_->value.cols())
      node_->grad.setZero(node_->value.rows(), node_->value.cols());
    node_->has_grad = true;
  }
  node_->grad += g;
}

void Tape::backward(const Tensor& loss) {
  require(loss.rows() == 1 && loss.cols() == 1, "backward needs a 1x1 loss, got " + dims(loss.value()));
  loss.accumulate(Mat::Ones(1, 1));
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

void Tape::record_pattern(std::span<const std::int32_t> values) {
  if (!track_) return;
  for (std::int32_t v : values) {
    hash_ ^= static_cast<std::uint32_t>(v);
    hash_ *= 1099511628211ULL;
  }
}

void Tape::record_pattern_bits(const Mat& x) {
  if (!track_) return;
  const double* p = x.data();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    hash_ ^= p[i] > 0.0 ? 0x9eULL : 0x37ULL;
    hash_ *= 1099511628211ULL;
  }
}

// ---- primitives -------------------------------------------------------

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.cols() == w.rows(), "linear: x " + dims(x.value()) + " vs W " + dims(w.value()));
  if (bias) require(bias.rows() == 1 && bias.cols() == w.cols(), "linear: bias " + dims(bias.value()));
  Mat y = x.value() * w.value();
  if (bias) y.rowwise() += bias.value().row(0);
  const bool rg = x.requires_grad() || w.requires_grad() || (bias && bias.requires_grad());
  Tensor out = make(std::move(y), rg);
  if (rg) {
    tape.push([out, x, w, bias] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      if (x.requires_grad()) x.accumulate(g * w.value().transpose());
      if (w.requires_grad()) w.accumulate(x.value().transpose() * g);
      if (bias && bias.requires_grad()) bias.accumulate(g.colwise().sum());
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) { return linear(tape, a, b, Tensor()); }

Tensor leaky_relu(Tape& tape, const Tensor& x, double slope) {
  tape.record_pattern_bits(x.value());
  Mat y = x.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  Tensor out = make(std::move(y), x.requires_grad(), x.shape());
  if (x.requires_grad()) {
    tape.push([out, x, slope] {
      if (!out.has_grad()) return;
      const Mat d = x.value().unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
      x.accumulate(out.grad().cwiseProduct(d));
    });
  }
  return out;
}

Tensor neighborhood_max_pool(Tape& tape, const Tensor& features, std::size_t k) {
  require(k >= 1 && features.rows() % static_cast<Eigen::Index>(k) == 0,
          "neighborhood_max_pool: " + std::to_string(features.rows()) + " rows not divisible by k=" + std::to_string(k));
  const Eigen::Index n = features.rows() / static_cast<Eigen::Index>(k);
  const Eigen::Index c = features.cols();
  const auto kk = static_cast<Eigen::Index>(k);
  const Mat& f = features.value();
  Mat y(n, c);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(n * c));
  for (Eigen::Index i = 0; i < n; ++i) {
    y.row(i) = f.row(i * kk);
    std::fill_n(arg.begin() + i * c, c, 0);
    for (Eigen::Index j = 1; j < kk; ++j) {
      const auto row = f.row(i * kk + j);
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        if (row[ch] > y(i, ch)) {
          y(i, ch) = row[ch];
          arg[static_cast<std::size_t>(i * c + ch)] = static_cast<std::int32_t>(j);
        }
      }
    }
  }
  tape.record_pattern(arg);
  Tensor out = make(std::move(y), features.requires_grad());
  if (features.requires_grad()) {
    tape.push([out, features, arg = std::move(arg), kk, n, c] {
      if (!out.has_grad()) return;
      Mat g = Mat::Zero(features.rows(), c);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index ch = 0; ch < c; ++ch) g(i * kk + arg[static_cast<std::size_t>(i * c + ch)], ch) = out.grad()(i, ch);
      features.accumulate(g);
    });
  }
  return out;
}

Tensor neighborhood_max_pool(Tape& tape, const Tensor& features, const NeighborGraph& graph) {
  require(static_cast<std::size_t>(features.rows()) == graph.size() * graph.k(),
          "neighborhood_max_pool: features do not match the graph");
  return neighborhood_max_pool(tape, features, graph.k());
}

Tensor global_max_pool(Tape& tape, const Tensor& x) {
  require(x.rows() >= 1, "global_max_pool on zero rows");
  const Eigen::Index c = x.cols();
  Mat y = x.value().row(0);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(c), 0);
  for (Eigen::Index i = 1; i < x.rows(); ++i) {
    for (Eigen::Index ch = 0; ch < c; ++ch) {
      if (x.value()(i, ch) > y(0, ch)) {
        y(0, ch) = x.value()(i, ch);
        arg[static_cast<std::size_t>(ch)] = static_cast<std::int32_t>(i);
      }
    }
  }
  tape.record_pattern(arg);
  Tensor out = make(std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x, arg = std::move(arg)] {
      if (!out.has_grad()) return;
      Mat g = Mat::Zero(x.rows(), x.cols());
      for (std::size_t ch = 0; ch < arg.size(); ++ch)
        g(arg[ch], static_cast<Eigen::Index>(ch)) = out.grad()(0, static_cast<Eigen::Index>(ch));
      x.accumulate(g);
    });
  }
  return out;
}

Mat softmax_rows(const Mat& logits) {
  Mat p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index k = logits.cols();
  require(static_cast<Eigen::Index>(targets.size()) == n,
          "softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(n) + " rows");
  require(n >= 1, "softmax_cross_entropy on zero rows");
  for (int t : targets)
    if (t < 0 || t >= k)
      throw Error(ErrorCode::TargetOutOfRange, "target " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");

  const Mat& z = logits.value();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    total += lse - z(i, targets[static_cast<std::size_t>(i)]);
  }
  Mat y(1, 1);
  y(0, 0) = total / static_cast<double>(n);
  Tensor out = make(std::move(y), logits.requires_grad());
  if (logits.requires_grad()) {
    std::vector<int> t(targets.begin(), targets.end());
    tape.push([out, logits, t = std::move(t), n] {
      if (!out.has_grad()) return;
      Mat g = softmax_rows(logits.value());
      for (Eigen::Index i = 0; i < n; ++i) g(i, t[static_cast<std::size_t>(i)]) -= 1.0;
      g *= out.grad()(0, 0) / static_cast<double>(n);
      logits.accumulate(g);
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels with no inputs");
  const Eigen::Index n = parts.front().rows();
  Eigen::Index total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    require(p.rows() == n, "concat_channels: row counts differ (" + std::to_string(p.rows()) + " vs " +
                               std::to_string(n) + ")");
    total += p.cols();
    rg = rg || p.requires_grad();
  }
  Mat y(n, total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  Tensor out = make(std::move(y), rg);
  if (rg) {
    tape.push([out, parts] {
      if (!out.has_grad()) return;
      Eigen::Index at = 0;
      for (const auto& p : parts) {
        if (p.requires_grad()) p.accumulate(out.grad().middleCols(at, p.cols()));
        at += p.cols();
      }
    });
  }
  return out;
}

Tensor edge_features(Tape& tape, const Tensor& x, const NeighborGraph& graph) {
  require(static_cast<std::size_t>(x.rows()) == graph.size(), "edge_features: graph built over a different point count");
  const auto n = x.rows();
  const auto c = x.cols();
  const auto k = static_cast<Eigen::Index>(graph.k());
  const Mat& v = x.value();
  Mat y(n * k, 2 * c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < k; ++j) {
      y.block(i * k + j, 0, 1, c) = v.row(i);
      y.block(i * k + j, c, 1, c) = v.row(i) - v.row(nbrs[static_cast<std::size_t>(j)]);
    }
  }
  Tensor out = make(std::move(y), x.requires_grad(), {static_cast<std::size_t>(n), graph.k(), static_cast<std::size_t>(2 * c)});
  if (x.requires_grad()) {
    tape.push([out, x, graph, n, c, k] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      Mat dx = Mat::Zero(n, c);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto nbrs = graph.neighbors(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < k; ++j) {
          const auto left = g.block(i * k + j, 0, 1, c);
          const auto right = g.block(i * k + j, c, 1, c);
          dx.row(i) += left + right;
          dx.row(nbrs[static_cast<std::size_t>(j)]) -= right;
        }
      }
      x.accumulate(dx);
    });
  }
  return out;
}

Tensor edge_conv(Tape& tape, const Tensor& x, const NeighborGraph& graph, const Tensor& w, const Tensor& bias,
                 double slope) {
  const auto n = x.rows();
  const auto c = x.cols();
  require(static_cast<std::size_t>(n) == graph.size(), "edge_conv: graph built over a different point count");
  require(w.rows() == 2 * c, "edge_conv: W " + dims(w.value()) + " for " + std::to_string(c) + " input channels");
  require(bias.rows() == 1 && bias.cols() == w.cols(), "edge_conv: bias " + dims(bias.value()));
  const auto out_c = w.cols();
  const auto k = static_cast<Eigen::Index>(graph.k());

  // slot (i, j): x_i (W_top + W_bot) + b - x_j W_bot = a_i - b_j
  const Mat w_sum = w.value().topRows(c) + w.value().bottomRows(c);
  Mat a = x.value() * w_sum;
  a.rowwise() += bias.value().row(0);
  const Mat b = x.value() * w.value().bottomRows(c);

  Mat pre(n, out_c);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(n * out_c));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(static_cast<std::size_t>(i));
    for (Eigen::Index ch = 0; ch < out_c; ++ch) {
      double best = -std::numeric_limits<double>::infinity();
      std::int32_t who = 0;
      for (Eigen::Index j = 0; j < k; ++j) {
        const double v = -b(nbrs[static_cast<std::size_t>(j)], ch);
        if (v > best) {
          best = v;
          who = static_cast<std::int32_t>(j);
        }
      }
      pre(i, ch) = a(i, ch) + best;
      arg[static_cast<std::size_t>(i * out_c + ch)] = who;
    }
  }
  tape.record_pattern(arg);
  tape.record_pattern_bits(pre);
  Mat y = pre.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  const bool rg = x.requires_grad() || w.requires_grad() || bias.requires_grad();
  Tensor out = make(std::move(y), rg);
  if (rg) {
    tape.push([out, x, w, bias, graph, pre = std::move(pre), arg = std::move(arg), slope, n, c, out_c] {
      if (!out.has_grad()) return;
      const Mat da = out.grad().cwiseProduct(pre.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
      Mat db = Mat::Zero(n, out_c);  // gradient wrt b (enters with a minus sign)
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto nbrs = graph.neighbors(static_cast<std::size_t>(i));
        for (Eigen::Index ch = 0; ch < out_c; ++ch)
          db(nbrs[static_cast<std::size_t>(arg[static_cast<std::size_t>(i * out_c + ch)])], ch) -= da(i, ch);
      }
      if (w.requires_grad()) {
        Mat gw(2 * c, out_c);
        gw.topRows(c) = x.value().transpose() * da;
        gw.bottomRows(c) = x.value().transpose() * (da + db);
        w.accumulate(gw);
      }
      if (bias.requires_grad()) bias.accumulate(da.colwise().sum());
      if (x.requires_grad()) {
        const Mat w_sum = w.value().topRows(c) + w.value().bottomRows(c);
        x.accumulate(da * w_sum.transpose() + db * w.value().bottomRows(c).transpose());
      }
    });
  }
  return out;
}

Tensor neighbor_max(Tape& tape, const Tensor& x, const NeighborGraph& graph) {
  require(static_cast<std::size_t>(x.rows()) == graph.size(), "neighbor_max: graph built over a different point count");
  const auto n = x.rows();
  const auto c = x.cols();
  const auto k = graph.k();
  require(k >= 1, "neighbor_max needs k >= 1");
  const Mat& v = x.value();
  Mat y(n, c);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(n * c));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(static_cast<std::size_t>(i));
    y.row(i) = v.row(nbrs[0]);
    std::fill_n(arg.begin() + i * c, c, nbrs[0]);
    for (std::size_t j = 1; j < k; ++j) {
      const auto row = v.row(nbrs[j]);
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        if (row[ch] > y(i, ch)) {
          y(i, ch) = row[ch];
          arg[static_cast<std::size_t>(i * c + ch)] = nbrs[j];
        }
      }
    }
  }
  tape.record_pattern(arg);
  Tensor out = make(std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x, arg = std::move(arg), n, c] {
      if (!out.has_grad()) return;
      Mat g = Mat::Zero(n, c);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index ch = 0; ch < c; ++ch) g(arg[static_cast<std::size_t>(i * c + ch)], ch) += out.grad()(i, ch);
      x.accumulate(g);
    });
  }
  return out;
}

Tensor center_rows(Tape& tape, const Tensor& x) {
  require(x.rows() >= 1, "center_rows on zero rows");
  Mat y = x.value().rowwise() - x.value().colwise().mean();
  Tensor out = make(std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x] {
      if (out.has_grad()) x.accumulate(out.grad().rowwise() - out.grad().colwise().mean());
    });
  }
  return out;
}

Tensor replicate_rows(Tape& tape, const Tensor& row, Eigen::Index n) {
  require(row.rows() == 1, "replicate_rows needs a single row, got " + dims(row.value()));
  Mat y = row.value().replicate(n, 1);
  Tensor out = make(std::move(y), row.requires_grad());
  if (row.requires_grad()) {
    tape.push([out, row] {
      if (out.has_grad()) row.accumulate(out.grad().colwise().sum());
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1;
  require(a.cols() == b.cols() && (a.rows() == b.rows() || broadcast),
          "add: " + dims(a.value()) + " + " + dims(b.value()));
  Mat y = a.value();
  if (broadcast)
    y.rowwise() += b.value().row(0);
  else
    y += b.value();
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make(std::move(y), rg);
  if (rg) {
    tape.push([out, a, b, broadcast] {
      if (!out.has_grad()) return;
      if (a.requires_grad()) a.accumulate(out.grad());
      if (b.requires_grad()) b.accumulate(broadcast ? Mat(out.grad().colwise().sum()) : out.grad());
    });
  }
  return out;
}

Tensor add_constant(Tape& tape, const Tensor& x, const Mat& c) {
  require(x.rows() == c.rows() && x.cols() == c.cols(), "add_constant: " + dims(x.value()) + " + " + dims(c));
  Tensor out = make(x.value() + c, x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x] {
      if (out.has_grad()) x.accumulate(out.grad());
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == x.value().size(), "reshape: " + dims(x.value()) + " to " + std::to_string(rows) + "x" +
                                               std::to_string(cols));
  Mat y = Eigen::Map<const Mat>(x.value().data(), rows, cols);
  Tensor out = make(std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x] {
      if (out.has_grad()) x.accumulate(Eigen::Map<const Mat>(out.grad().data(), x.rows(), x.cols()));
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.cols(), "slice_cols out of range");
  Tensor out = make(x.value().middleCols(start, count), x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x, start, count] {
      if (!out.has_grad()) return;
      Mat g = Mat::Zero(x.rows(), x.cols());
      g.middleCols(start, count) = out.grad();
      x.accumulate(g);
    });
  }
  return out;
}

Tensor weighted_sum(Tape& tape, const Tensor& x, const Mat& weights) {
  require(x.rows() == weights.rows() && x.cols() == weights.cols(), "weighted_sum: " + dims(x.value()) + " vs " + dims(weights));
  Mat y(1, 1);
  y(0, 0) = x.value().cwiseProduct(weights).sum();
  Tensor out = make(std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.push([out, x, weights] {
      if (out.has_grad()) x.accumulate(weights * out.grad()(0, 0));
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) { return weighted_sum(tape, x, Mat::Ones(x.rows(), x.cols())); }

std::vector<int> argmax_rows(const Mat& x) {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < x.cols(); ++j)
      if (x(i, j) > x(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// ---- parameters -------------------------------------------------------

Tensor& ParamGroup::add(const std::string& name, Mat value) {
  if (index_.contains(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter name " + name);
  index_[name] = entries_.size();
  velocity_[name] = Mat::Zero(value.rows(), value.cols());
  entries_.emplace_back(name, Tensor::parameter(std::move(value)));
  return entries_.back().second;
}

Tensor& ParamGroup::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::ShapeMismatch, "no parameter named " + name);
  return entries_[it->second].second;
}

const Tensor& ParamGroup::at(const std::string& name) const { return const_cast<ParamGroup*>(this)->at(name); }

bool ParamGroup::contains(const std::string& name) const { return index_.contains(name); }

std::vector<Tensor> ParamGroup::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

std::size_t ParamGroup::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : entries_) total += static_cast<std::size_t>(t.value().size());
  return total;
}

Mat& ParamGroup::velocity(const std::string& name) {
  auto it = velocity_.find(name);
  if (it == velocity_.end()) throw Error(ErrorCode::ShapeMismatch, "no parameter named " + name);
  return it->second;
}

void ParamGroup::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void sgd_step(ParamGroup& params, double lr, double momentum) {
  for (const auto& [name, t] : params.entries())
    if (!t.has_grad()) throw Error(ErrorCode::MissingGrad, "parameter " + name + " has no gradient");
  for (auto [name, t] : params.entries()) {  // handles share the underlying node
    Mat& v = params.velocity(name);
    v = momentum * v + t.grad();
    t.value() -= lr * v;
    t.zero_grad();
  }
}

// ---- verification -----------------------------------------------------

GradCheckResult gradient_check(const std::function<Tensor(Tape&)>& fn, const std::vector<Tensor>& params,
                               const GradCheckOptions& options) {
  for (auto t : params) t.zero_grad();
  std::uint64_t base_pattern;
  {
    Tape tape;
    tape.set_track_patterns(true);
    Tensor loss = fn(tape);
    tape.backward(loss);
    base_pattern = tape.pattern_hash();
  }
  std::vector<Mat> analytic;
  for (const auto& t : params) analytic.push_back(t.has_grad() ? t.grad() : Mat::Zero(t.rows(), t.cols()));
  for (auto t : params) t.zero_grad();

  auto probe = [&](std::uint64_t& pattern) {
    Tape tape;
    tape.set_track_patterns(true);
    const double v = fn(tape).value()(0, 0);
    pattern = tape.pattern_hash();
    return v;
  };

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor t = params[p];
    const auto size = static_cast<std::size_t>(t.value().size());
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < size; ++i) std::swap(order[i], order[i + rng.uniform_index(size - i)]);
    const std::size_t want = std::min(size, options.coords_per_tensor);
    std::size_t done = 0, skipped = 0;
    for (std::size_t idx : order) {
      if (done == want || skipped > options.max_resamples) break;
      double& slot = t.value().data()[idx];
      const double orig = slot;
      std::uint64_t plus_pattern, minus_pattern;
      slot = orig + options.h;
      const double f_plus = probe(plus_pattern);
      slot = orig - options.h;
      const double f_minus = probe(minus_pattern);
      slot = orig;
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
        ++skipped;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * options.h);
      const double a = analytic[p].data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++done;
    }
    result.checked += done;
    result.resampled += skipped;
  }
  return result;
}

}  // namespace srgnet::ad
