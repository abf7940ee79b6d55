#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "srgnet/rng.hpp"
#include "srgnet/types.hpp"

using namespace srgnet;
using testing::error_of;

TEST_CASE("three coplanar points without normals are valid") {
  PointCloud c;
  c.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK_FALSE(validate_cloud(c).has_value());
}

TEST_CASE("cloud invariants") {
  PointCloud c;
  CHECK(error_of([&] { require_valid(c); }) == ErrorCode::EmptyCloud);
  c.positions = {Vec3(0, 0, 0), Vec3(std::numeric_limits<double>::quiet_NaN(), 0, 0)};
  CHECK(error_of([&] { require_valid(c); }) == ErrorCode::NonFinite);
  c.positions = {Vec3(0, 0, 0)};
  c.normals = std::vector<Vec3>{Vec3(0, 0, 2)};
  CHECK(error_of([&] { require_valid(c); }) == ErrorCode::NormalLengthViolation);
  c.normals = std::vector<Vec3>{};
  CHECK(error_of([&] { require_valid(c); }) == ErrorCode::NormalLengthViolation);
}

TEST_CASE("error message carries the code name") {
  const Error e(ErrorCode::KTooLarge, "k=5");
  CHECK(std::string(e.what()) == "KTooLarge: k=5");
  CHECK(error_code_name(ErrorCode::MissingGrad) == "MissingGrad");
}

TEST_CASE("compact_labels relabels by first occurrence") {
  const std::vector<int> raw{7, 3, 7, 9, 3};
  const LabelMap m = compact_labels(raw);
  CHECK(m.labels == std::vector<int>{0, 1, 0, 2, 1});
  CHECK(m.num_labels == 3);
  CHECK(count_distinct(m) == 3);
  const std::vector<int> bad{0, -1};
  CHECK(error_of([&] { compact_labels(bad); }) == ErrorCode::NegativeLabel);
}

TEST_CASE("count_distinct ignores unused label ids") {
  const LabelMap m{{0, 4, 4}, 6};
  CHECK(count_distinct(m) == 2);
}

TEST_CASE("check_labels") {
  const LabelMap m{{0, 1, 2}, 3};
  CHECK_NOTHROW(check_labels(m, 3));
  CHECK(error_of([&] { check_labels(m, 4); }) == ErrorCode::LengthMismatch);
  const LabelMap out_of_range{{0, 3}, 3};
  CHECK(error_of([&] { check_labels(out_of_range); }) == ErrorCode::TargetOutOfRange);
}

TEST_CASE("symmetrized adjacency is sorted and unique") {
  // 0 -> 1, 1 -> 0, 2 -> 1
  const NeighborGraph g(3, 1, {1, 0, 1}, {1.0, 1.0, 1.0});
  const auto adj = g.symmetrized();
  CHECK(adj[0] == std::vector<std::int32_t>{1});
  CHECK(adj[1] == std::vector<std::int32_t>{0, 2});
  CHECK(adj[2] == std::vector<std::int32_t>{1});
}

TEST_CASE("rng is reproducible and bounded") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.uniform_index(7);
    CHECK(x == b.uniform_index(7));
    CHECK(x < 7);
    const double u = a.uniform01();
    CHECK(u == b.uniform01());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(1);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}
