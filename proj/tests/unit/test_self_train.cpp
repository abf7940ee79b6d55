#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "srgnet/rng.hpp"
#include "srgnet/self_train.hpp"
#include "srgnet/srg.hpp"
#include "tiny.hpp"

using namespace srgnet;
using testing::error_of;
using testing::tiny_config;

namespace {

struct Dihedral {
  PointCloud cloud;
  LabelMap truth;
};

Dihedral small_dihedral(std::size_t n, std::uint64_t seed) {
  const auto f = fixtures::dihedral(n, seed);
  return {estimate_normals(f.cloud, knn_graph(f.cloud, 12)).cloud, f.labels};
}

double agreement(const LabelMap& a, const LabelMap& b) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a.labels[i] == b.labels[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("refinement examples") {
  const LabelMap constant{{3, 3, 3, 3}, 4};
  const LabelMap two{{0, 0, 1, 1}, 2};
  CHECK(refine_targets(constant, two).labels == constant.labels);
  CHECK(refine_targets(LabelMap{{0, 0, 1}, 2}, LabelMap{{0, 0, 0}, 1}).labels == std::vector<int>{0, 0, 0});
  CHECK(refine_targets(LabelMap{{1, 0}, 2}, LabelMap{{0, 0}, 1}).labels == std::vector<int>{0, 0});
  CHECK(error_of([] { refine_targets(LabelMap{{0}, 1}, LabelMap{{0, 0}, 1}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("refinement properties") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LabelMap pred{std::vector<int>(40), 5};
    LabelMap clusters{std::vector<int>(40), 6};
    for (int i = 0; i < 40; ++i) {
      pred.labels[i] = static_cast<int>(rng.uniform_index(5));
      clusters.labels[i] = static_cast<int>(rng.uniform_index(6));
    }
    const auto once = refine_targets(pred, clusters);
    CHECK(refine_targets(once, clusters) == once);
    for (int t : once.labels) CHECK(std::find(pred.labels.begin(), pred.labels.end(), t) != pred.labels.end());
    LabelMap singletons{std::vector<int>(40), 40};
    std::iota(singletons.labels.begin(), singletons.labels.end(), 0);
    CHECK(refine_targets(pred, singletons) == pred);
  }
}

TEST_CASE("warm start gives every cluster its own label") {
  const auto d = small_dihedral(300, 1);
  auto cfg = tiny_config();
  auto model = init_model(cfg, 2);
  warm_start_output(model, d.cloud, d.truth);
  const LabelMap pred{ad::argmax_rows(predict_logits(d.cloud, model)), cfg.out_labels};
  CHECK(count_distinct(refine_targets(pred, d.truth)) == 2);
  cfg.out_labels = 1;
  auto narrow = init_model(cfg, 2);
  CHECK(error_of([&] { warm_start_output(narrow, d.cloud, d.truth); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("training on the dihedral reproduces its clusters") {
  const auto d = small_dihedral(600, 2);
  const auto g = knn_graph(d.cloud, 20);
  SrgParams p;
  p.target_k = 2;
  p.rng_seed = 2;
  const LabelMap srg = segment_srg(d.cloud, g, auto_thresholds(g, p));
  REQUIRE(count_distinct(srg) == 2);

  auto cfg = tiny_config();
  cfg.out_labels = 2;
  TrainConfig tc;
  tc.iterations = 300;
  tc.seed = 5;
  const auto r = train(d.cloud, srg, cfg, tc);
  CHECK_FALSE(r.history.collapse_stop);
  REQUIRE(r.history.records.size() == 300);
  CHECK(std::max(agreement(r.labels, srg), 1.0 - agreement(r.labels, srg)) >= 0.95);

  double first = 0, last = 0;
  for (int i = 0; i < 50; ++i) {
    first += r.history.records[static_cast<std::size_t>(i)].loss;
    last += r.history.records[r.history.records.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  CHECK(last <= first);
  CHECK(infer(r.model, d.cloud) == r.labels);

  // Translation only moves the centroid that input normalization removes.
  PointCloud moved = d.cloud;
  for (auto& q : moved.positions) q += Vec3(5, -3, 2);
  CHECK(agreement(infer(r.model, moved), r.labels) >= 0.99);
}

TEST_CASE("training is deterministic") {
  const auto d = small_dihedral(200, 3);
  TrainConfig tc;
  tc.iterations = 15;
  tc.seed = 8;
  const auto a = train(d.cloud, d.truth, tiny_config(), tc);
  const auto b = train(d.cloud, d.truth, tiny_config(), tc);
  CHECK(a.history == b.history);
  CHECK(a.labels == b.labels);
  CHECK(a.history.to_csv() == b.history.to_csv());
}

TEST_CASE("collapse guard and history format") {
  const auto d = small_dihedral(200, 4);
  TrainConfig tc;
  tc.iterations = 5;
  tc.min_labels = 5;  // more than the 4 outputs can ever show
  const auto r = train(d.cloud, d.truth, tiny_config(), tc);
  CHECK(r.history.collapse_stop);
  CHECK(r.history.records.empty());
  CHECK(r.history.to_csv() == "iteration,loss,n_labels,agreement\n");

  tc.min_labels = 1;
  tc.iterations = 2;
  const auto s = train(d.cloud, d.truth, tiny_config(), tc);
  const std::string csv = s.history.to_csv();
  CHECK(csv.rfind("iteration,loss,n_labels,agreement\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("training preconditions") {
  const auto d = small_dihedral(100, 5);
  TrainConfig tc;
  tc.iterations = 0;
  CHECK(error_of([&] { train(d.cloud, d.truth, tiny_config(), tc); }) == ErrorCode::InvalidConfig);
  tc.iterations = 1;
  LabelMap many{std::vector<int>(100), 100};
  std::iota(many.labels.begin(), many.labels.end(), 0);
  CHECK(error_of([&] { train(d.cloud, many, tiny_config(), tc); }) == ErrorCode::InvalidConfig);
  PointCloud bare = d.cloud;
  bare.normals.reset();
  CHECK(error_of([&] { train(bare, d.truth, tiny_config(), tc); }) == ErrorCode::MissingNormals);
}
