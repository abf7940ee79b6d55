#include "srgnet/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace srgnet {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NormalLengthViolation: return "NormalLengthViolation";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MixedArity: return "MixedArity";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::PaletteTooSmall: return "PaletteTooSmall";
    case ErrorCode::NegativeLabel: return "NegativeLabel";
    case ErrorCode::NoLabels: return "NoLabels";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::MissingNormals: return "MissingNormals";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code), detail_(detail) {}

std::optional<Error> validate_cloud(const PointCloud& cloud) {
  if (cloud.positions.empty()) return Error(ErrorCode::EmptyCloud, "cloud has no points");
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    if (!cloud.positions[i].allFinite())
      return Error(ErrorCode::NonFinite, "non-finite coordinate at point " + std::to_string(i));
  }
  if (cloud.normals) {
    const auto& normals = *cloud.normals;
    if (normals.size() != cloud.positions.size())
      return Error(ErrorCode::NormalLengthViolation, "normal count differs from point count");
    for (std::size_t i = 0; i < normals.size(); ++i) {
      if (!normals[i].allFinite())
        return Error(ErrorCode::NonFinite, "non-finite normal at point " + std::to_string(i));
      if (std::abs(normals[i].norm() - 1.0) > 1e-6)
        return Error(ErrorCode::NormalLengthViolation, "normal at point " + std::to_string(i) + " is not unit");
    }
  }
  return std::nullopt;
}

void require_valid(const PointCloud& cloud) {
  if (auto err = validate_cloud(cloud)) throw *err;
}

LabelMap compact_labels(std::span<const int> raw) {
  LabelMap out;
  out.labels.reserve(raw.size());
  std::unordered_map<int, int> remap;
  for (int id : raw) {
    if (id < 0) throw Error(ErrorCode::NegativeLabel, "label " + std::to_string(id));
    auto [it, inserted] = remap.try_emplace(id, out.num_labels);
    if (inserted) ++out.num_labels;
    out.labels.push_back(it->second);
  }
  return out;
}

int count_distinct(const LabelMap& labels) {
  std::vector<char> seen(static_cast<std::size_t>(std::max(labels.num_labels, 0)), 0);
  int count = 0;
  for (int l : labels.labels) {
    if (l >= 0 && l < labels.num_labels && !seen[l]) {
      seen[l] = 1;
      ++count;
    }
  }
  return count;
}

void check_labels(const LabelMap& labels, std::optional<std::size_t> expected_size) {
  if (expected_size && labels.size() != *expected_size)
    throw Error(ErrorCode::LengthMismatch, "label count " + std::to_string(labels.size()) + " vs " +
                                               std::to_string(*expected_size) + " points");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels.labels[i];
    if (l < 0) throw Error(ErrorCode::NegativeLabel, "label at " + std::to_string(i));
    if (l >= labels.num_labels)
      throw Error(ErrorCode::TargetOutOfRange,
                  "label " + std::to_string(l) + " >= " + std::to_string(labels.num_labels));
  }
}

NeighborGraph::NeighborGraph(std::size_t n, std::size_t k, std::vector<std::int32_t> neighbors,
                             std::vector<double> distances)
    : n_(n), k_(k), neighbors_(std::move(neighbors)), distances_(std::move(distances)) {
  if (neighbors_.size() != n * k || distances_.size() != n * k)
    throw Error(ErrorCode::ShapeMismatch, "neighbor graph storage does not match n*k");
}

std::vector<std::vector<std::int32_t>> NeighborGraph::symmetrized() const {
  std::vector<std::vector<std::int32_t>> adj(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::int32_t j : neighbors(i)) {
      adj[i].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(static_cast<std::int32_t>(i));
    }
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

}  // namespace srgnet
