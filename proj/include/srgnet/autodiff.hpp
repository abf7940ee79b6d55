#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srgnet/types.hpp"

namespace srgnet::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major 64-bit storage. Everything is held as a matrix; 3-D
/// tensors (points x slots x channels) use rows = points * slots.
struct Node {
  Mat value;
  Mat grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::size_t> shape;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Trainable leaf.
  static Tensor parameter(Mat value);
  /// Untracked leaf.
  static Tensor constant(Mat value);

  const Mat& value() const { return node_->value; }
  Mat& value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  /// Adds g into the gradient buffer (allocating it on first use).
  void accumulate(const Mat& g) const;

 private:
  std::shared_ptr<Node> node_;
};

/// Records executed ops; backward replays them in reverse order.
class Tape {
 public:
  /// Registers a backward closure for an op that produced a tracked output.
  void push(std::function<void()> backward) { records_.push_back(std::move(backward)); }

  /// Seeds d(loss)/d(loss) = 1 and runs every record in reverse order.
  /// loss must be 1 x 1.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return records_.size(); }

  /// Discrete decisions taken during the forward pass (activation signs,
  /// pooling winners, neighbor lists) are folded into a hash when enabled, so
  /// callers can tell whether a perturbation changed the piecewise branch.
  void set_track_patterns(bool on) { track_ = on; }
  bool tracking_patterns() const { return track_; }
  void record_pattern(std::span<const std::int32_t> values);
  void record_pattern_bits(const Mat& x);  // sign bits, x > 0
  std::uint64_t pattern_hash() const { return hash_; }

 private:
  std::vector<std::function<void()>> records_;
  bool track_ = false;
  std::uint64_t hash_ = 1469598103934665603ULL;
};

// ---- primitives -------------------------------------------------------

/// y = x W + bias (bias optional: pass an empty Tensor).
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor leaky_relu(Tape& tape, const Tensor& x, double slope = 0.2);

/// features: (N*k) x c, slot j of point i at row i*k + j. Out N x c.
/// Gradient goes to the winning slot, ties to the lowest slot.
Tensor neighborhood_max_pool(Tape& tape, const Tensor& features, std::size_t k);
Tensor neighborhood_max_pool(Tape& tape, const Tensor& features, const NeighborGraph& graph);

/// Columnwise max over rows, 1 x c; ties to the lowest row.
Tensor global_max_pool(Tape& tape, const Tensor& x);

/// Mean negative log-likelihood, 1 x 1.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets);
Mat softmax_rows(const Mat& logits);

Tensor concat_channels(Tape& tape, const std::vector<Tensor>& parts);

/// (N*k) x 2c with slot (i, j) = [x_i, x_i - x_{n_ij}].
Tensor edge_features(Tape& tape, const Tensor& x, const NeighborGraph& graph);

/// leaky(max_j ([x_i, x_i - x_j] W + b)), computed without materializing the
/// edge tensor. W is 2c x out. Same value and gradient as
/// neighborhood_max_pool(leaky_relu(linear(edge_features(x)))).
Tensor edge_conv(Tape& tape, const Tensor& x, const NeighborGraph& graph, const Tensor& w, const Tensor& bias,
                 double slope = 0.2);

/// out_i = max over graph neighbors j of x_j (self not included).
Tensor neighbor_max(Tape& tape, const Tensor& x, const NeighborGraph& graph);

/// x minus its column means (each channel centered over the rows).
Tensor center_rows(Tape& tape, const Tensor& x);

/// 1 x c row repeated n times.
Tensor replicate_rows(Tape& tape, const Tensor& row, Eigen::Index n);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_constant(Tape& tape, const Tensor& x, const Mat& c);
Tensor reshape(Tape& tape, const Tensor& x, Eigen::Index rows, Eigen::Index cols);
Tensor slice_cols(Tape& tape, const Tensor& x, Eigen::Index start, Eigen::Index count);
/// sum(x .* weights), 1 x 1.
Tensor weighted_sum(Tape& tape, const Tensor& x, const Mat& weights);
Tensor sum(Tape& tape, const Tensor& x);

/// Rowwise argmax, ties to the lowest column.
std::vector<int> argmax_rows(const Mat& x);

// ---- parameters and optimization --------------------------------------

class ParamGroup {
 public:
  /// Throws InvalidConfig on duplicate names.
  Tensor& add(const std::string& name, Mat value);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// Insertion order.
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  Mat& velocity(const std::string& name);
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, Mat> velocity_;
};

/// v <- momentum v + g; p <- p - lr v; grads zeroed. Throws MissingGrad when
/// a parameter has no gradient from the last backward pass.
void sgd_step(ParamGroup& params, double lr, double momentum);

// ---- verification -----------------------------------------------------

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t coords_per_tensor = 50;  // all coordinates when the tensor is smaller
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
  std::size_t max_resamples = 200;  // per tensor
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t resampled = 0;  // coordinates whose +-h probe changed a kink branch
};

/// Compares backward against central differences. fn builds a scalar loss on
/// the tape it is given. Coordinates whose probes flip any recorded
/// activation or pooling decision are replaced by fresh random ones.
GradCheckResult gradient_check(const std::function<Tensor(Tape&)>& fn, const std::vector<Tensor>& params,
                               const GradCheckOptions& options = {});

}  // namespace srgnet::ad
