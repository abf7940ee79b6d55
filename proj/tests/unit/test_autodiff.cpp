#include <cmath>
#include <memory>

#include "helpers.hpp"
#include "srgnet/autodiff.hpp"
#include "srgnet/fixtures.hpp"
#include "srgnet/rng.hpp"
#include "srgnet/spatial_index.hpp"

using namespace srgnet;
using namespace srgnet::ad;
using testing::error_of;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Random weighting turns any tensor into a scalar with a generic gradient.
Tensor probe_loss(Tape& tape, const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return weighted_sum(tape, y, random_mat(y.rows(), y.cols(), rng));
}

NeighborGraph small_graph(std::size_t n, std::size_t k, std::uint64_t seed) {
  return knn_graph(fixtures::random_cube(n, seed), k);
}

}  // namespace

TEST_CASE("linear forward") {
  Tape tape;
  Mat w(2, 2);
  w << 1, 2, 3, 4;
  const auto y = linear(tape, Tensor::constant(Mat::Identity(2, 2)), Tensor::constant(w), Tensor());
  CHECK(y.value() == w);
  Mat b(1, 3);
  b << 1, -2, 0.5;
  const auto z = linear(tape, Tensor::constant(Mat::Zero(4, 2)), Tensor::constant(Mat::Ones(2, 3)), Tensor::constant(b));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(z.value().row(i) == b);
  CHECK(error_of([&] { linear(tape, Tensor::constant(Mat::Zero(4, 3)), Tensor::constant(w), Tensor()); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("leaky relu slope") {
  Tape tape;
  Mat x(1, 2);
  x << 1, -1;
  const auto y = leaky_relu(tape, Tensor::constant(x));
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(0, 1) == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("neighborhood max pool") {
  Tape tape;
  Mat f(3, 1);
  f << 3, 1, 2;
  const auto x = Tensor::parameter(f);
  const auto y = neighborhood_max_pool(tape, x, 3);
  CHECK(y.value()(0, 0) == 3.0);
  tape.backward(sum(tape, y));
  CHECK(x.grad()(0, 0) == 1.0);
  CHECK(x.grad()(1, 0) == 0.0);
  CHECK(x.grad()(2, 0) == 0.0);

  Rng rng(3);
  const Mat r = random_mat(8 * 5, 4, rng);
  Tape t2;
  const auto p = neighborhood_max_pool(t2, Tensor::constant(r), 5);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index c = 0; c < 4; ++c) {
      double m = r(i * 5, c);
      for (Eigen::Index j = 1; j < 5; ++j) m = std::max(m, r(i * 5 + j, c));
      CHECK(p.value()(i, c) == m);
    }
  Tape t3;
  const auto id = neighborhood_max_pool(t3, Tensor::constant(r), 1);
  CHECK(id.value() == r);
}

TEST_CASE("global max pool") {
  Tape tape;
  Mat x(2, 1);
  x << -1, -5;
  CHECK(global_max_pool(tape, Tensor::constant(x)).value()(0, 0) == -1.0);
}

TEST_CASE("softmax cross entropy") {
  Tape tape;
  const std::vector<int> t{0, 1, 2, 3};
  const auto l = softmax_cross_entropy(tape, Tensor::constant(Mat::Zero(4, 4)), t);
  CHECK(l.value()(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  Mat sharp = Mat::Zero(1, 3);
  sharp(0, 1) = 50;
  const std::vector<int> one{1};
  CHECK(softmax_cross_entropy(tape, Tensor::constant(sharp), one).value()(0, 0) < 1e-20);
  const std::vector<int> bad{3};
  CHECK(error_of([&] { softmax_cross_entropy(tape, Tensor::constant(sharp), bad); }) == ErrorCode::TargetOutOfRange);
  Rng rng(1);
  const Mat p = softmax_rows(random_mat(5, 3, rng) * 10.0);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("concat channels") {
  Tape tape;
  Mat a(2, 1), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  const auto c = concat_channels(tape, {Tensor::constant(a), Tensor::constant(b)});
  Mat expected(2, 2);
  expected << 1, 3, 2, 4;
  CHECK(c.value() == expected);
  CHECK(concat_channels(tape, {Tensor::constant(a)}).value() == a);
}

TEST_CASE("edge features by hand") {
  Tape tape;
  Mat x(2, 1);
  x << 0, 1;
  const NeighborGraph g(2, 1, {1, 0}, {1.0, 1.0});
  const auto e = edge_features(tape, Tensor::constant(x), g);
  Mat expected(2, 2);
  expected << 0, -1, 1, 1;
  CHECK(e.value() == expected);

  const Mat constant = Mat::Constant(6, 3, 2.5);
  const auto ec = edge_features(tape, Tensor::constant(constant), small_graph(6, 3, 4));
  CHECK(ec.value().rightCols(3).isZero(0.0));
}

TEST_CASE("fused edge conv equals the literal composition") {
  Rng rng(6);
  const auto g = small_graph(20, 5, 8);
  Tensor x = Tensor::parameter(random_mat(20, 4, rng));
  Tensor w = Tensor::parameter(random_mat(8, 6, rng));
  Tensor b = Tensor::parameter(random_mat(1, 6, rng));
  Tape t1, t2;
  const auto fused = edge_conv(t1, x, g, w, b);
  const auto literal = neighborhood_max_pool(t2, leaky_relu(t2, linear(t2, edge_features(t2, x, g), w, b)), g);
  CHECK((fused.value() - literal.value()).cwiseAbs().maxCoeff() < 1e-12);

  t1.backward(probe_loss(t1, fused, 1));
  const Mat gx = x.grad(), gw = w.grad(), gb = b.grad();
  x.zero_grad();
  w.zero_grad();
  b.zero_grad();
  t2.backward(probe_loss(t2, literal, 1));
  CHECK((gx - x.grad()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((gw - w.grad()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((gb - b.grad()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("neighbor max excludes self") {
  Tape tape;
  Mat x(3, 1);
  x << 10, 1, 2;
  const NeighborGraph g(3, 1, {1, 0, 1}, {1.0, 1.0, 1.0});
  const auto y = neighbor_max(tape, Tensor::constant(x), g);
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(1, 0) == 10.0);
  CHECK(y.value()(2, 0) == 1.0);
}

TEST_CASE("center rows removes column means") {
  Rng rng(2);
  Tape tape;
  const auto y = center_rows(tape, Tensor::constant(random_mat(7, 3, rng) + Mat::Constant(7, 3, 4.0)));
  CHECK(y.value().colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient checks on primitives") {
  Rng rng(10);
  const auto g = small_graph(12, 4, 2);
  const Tensor x = Tensor::parameter(random_mat(12, 3, rng));
  const Tensor w = Tensor::parameter(random_mat(3, 5, rng));
  const Tensor w2 = Tensor::parameter(random_mat(6, 4, rng));
  const Tensor b = Tensor::parameter(random_mat(1, 5, rng));
  const Tensor b2 = Tensor::parameter(random_mat(1, 4, rng));
  std::vector<int> targets;
  for (int i = 0; i < 12; ++i) targets.push_back(i % 5);

  struct Case {
    const char* name;
    std::function<Tensor(Tape&)> fn;
    std::vector<Tensor> params;
  };
  const std::vector<Case> cases{
      {"linear", [&](Tape& t) { return probe_loss(t, linear(t, x, w, b), 1); }, {x, w, b}},
      {"matmul", [&](Tape& t) { return probe_loss(t, matmul(t, x, w), 2); }, {x, w}},
      {"leaky", [&](Tape& t) { return probe_loss(t, leaky_relu(t, x), 3); }, {x}},
      {"global max", [&](Tape& t) { return probe_loss(t, global_max_pool(t, x), 4); }, {x}},
      {"cross entropy", [&](Tape& t) { return softmax_cross_entropy(t, linear(t, x, w, b), targets); }, {x, w, b}},
      {"concat", [&](Tape& t) { return probe_loss(t, concat_channels(t, {x, linear(t, x, w, b), x}), 5); }, {x, w, b}},
      {"edge features", [&](Tape& t) { return probe_loss(t, edge_features(t, x, g), 6); }, {x}},
      {"edge conv", [&](Tape& t) { return probe_loss(t, edge_conv(t, x, g, w2, b2), 7); }, {x, w2, b2}},
      {"pool", [&](Tape& t) { return probe_loss(t, neighborhood_max_pool(t, edge_features(t, x, g), g), 8); }, {x}},
      {"neighbor max", [&](Tape& t) { return probe_loss(t, neighbor_max(t, x, g), 9); }, {x}},
      {"center", [&](Tape& t) { return probe_loss(t, center_rows(t, x), 10); }, {x}},
      {"replicate", [&](Tape& t) { return probe_loss(t, replicate_rows(t, b, 6), 11); }, {b}},
      {"add broadcast", [&](Tape& t) { return probe_loss(t, add(t, matmul(t, x, w), b), 12); }, {x, w, b}},
      {"reshape", [&](Tape& t) { return probe_loss(t, reshape(t, x, 4, 9), 13); }, {x}},
      {"slice", [&](Tape& t) { return probe_loss(t, slice_cols(t, x, 1, 2), 14); }, {x}},
      {"sum", [&](Tape& t) { return sum(t, leaky_relu(t, x)); }, {x}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto r = gradient_check(c.fn, c.params);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("gradient check of a linear function is exact") {
  Rng rng(4);
  const Tensor x = Tensor::parameter(random_mat(5, 3, rng));
  const auto r = gradient_check([&](Tape& t) { return probe_loss(t, x, 3); }, {x});
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("a corrupted backward is flagged") {
  Rng rng(5);
  const Tensor x = Tensor::parameter(random_mat(4, 2, rng));
  auto flipped = [&](Tape& t) {
    auto node = std::make_shared<Node>();
    node->value = 2.0 * x.value();
    node->requires_grad = true;
    node->shape = {4, 2};
    Tensor y(node);
    t.push([y, x] {
      if (y.has_grad()) x.accumulate(-2.0 * y.grad());
    });
    return probe_loss(t, y, 1);
  };
  CHECK(gradient_check(flipped, {x}).max_rel_error > 0.5);
}

TEST_CASE("sgd with momentum") {
  ParamGroup g;
  g.add("p", Mat::Constant(1, 1, 1.0));
  g.at("p").accumulate(Mat::Constant(1, 1, 0.5));
  sgd_step(g, 0.1, 0.0);
  CHECK(g.at("p").value()(0, 0) == doctest::Approx(0.95).epsilon(1e-15));

  // Hand-unrolled recurrence over two steps.
  ParamGroup h;
  h.add("q", Mat::Constant(1, 1, 2.0));
  const double g1 = 0.3, g2 = -0.7, lr = 0.05, m = 0.9;
  h.at("q").accumulate(Mat::Constant(1, 1, g1));
  sgd_step(h, lr, m);
  h.at("q").accumulate(Mat::Constant(1, 1, g2));
  sgd_step(h, lr, m);
  const double v1 = g1, p1 = 2.0 - lr * v1;
  const double v2 = m * v1 + g2, p2 = p1 - lr * v2;
  CHECK(std::abs(h.at("q").value()(0, 0) - p2) < 1e-12);
  CHECK(std::abs(h.velocity("q")(0, 0) - v2) < 1e-12);

  h.at("q").accumulate(Mat::Zero(1, 1));
  sgd_step(h, lr, m);
  CHECK(std::abs(h.velocity("q")(0, 0) - m * v2) < 1e-12);
}

TEST_CASE("parameter group bookkeeping") {
  ParamGroup g;
  g.add("a", Mat::Zero(2, 3));
  g.add("b", Mat::Zero(1, 3));
  CHECK(g.size() == 2);
  CHECK(g.scalar_count() == 9);
  CHECK(g.entries()[0].first == "a");
  CHECK(error_of([&] { g.add("a", Mat::Zero(1, 1)); }) == ErrorCode::InvalidConfig);
  CHECK(error_of([&] { sgd_step(g, 0.1, 0.9); }) == ErrorCode::MissingGrad);
}

TEST_CASE("argmax ties go to the lowest column") {
  Mat x(2, 3);
  x << 1, 3, 3, 0, 0, 0;
  CHECK(argmax_rows(x) == std::vector<int>{1, 0});
}
