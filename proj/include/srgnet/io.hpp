#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "srgnet/types.hpp"

namespace srgnet {

using Rgb = std::array<std::uint8_t, 3>;

/// Ordered label colors; entry i colors label i.
struct Palette {
  std::vector<Rgb> colors;

  std::size_t size() const noexcept { return colors.size(); }
};

/// The fixed 12-color palette, extended past 12 entries by golden-ratio hue
/// stepping so every label gets a distinct color.
Palette default_palette(std::size_t min_size = 12);

/// Wavefront OBJ subset: `v` lines become points; `vn` lines become normals
/// when their count matches. Everything else is ignored.
PointCloud load_obj(const std::filesystem::path& path);

/// Whitespace text with 3 (xyz) or 6 (xyz + normal) columns per row.
PointCloud load_xyz(const std::filesystem::path& path);

/// Dispatches on extension: .obj, otherwise xyz text.
PointCloud load_cloud(const std::filesystem::path& path);

/// Writes xyz or xyz+normal rows with round-trip exact precision.
void write_xyz(const PointCloud& cloud, const std::filesystem::path& path);

enum class DownsampleMethod { Random, Fps };

DownsampleMethod parse_downsample_method(std::string_view name);

/// Indices picked by downsample, in output order.
std::vector<std::size_t> downsample_indices(const PointCloud& cloud, std::size_t n, DownsampleMethod method,
                                            std::uint64_t seed);

PointCloud downsample(const PointCloud& cloud, std::size_t n, DownsampleMethod method, std::uint64_t seed);

/// ASCII PLY with float xyz and uchar rgb taken from palette[label].
void export_ply_colored(const PointCloud& cloud, const LabelMap& labels, const Palette& palette,
                        const std::filesystem::path& path);

/// Positions of an ASCII PLY written by export_ply_colored.
std::vector<Vec3> read_ply_positions(const std::filesystem::path& path);

void write_labels(const LabelMap& labels, const std::filesystem::path& path);
LabelMap read_labels(const std::filesystem::path& path);

}  // namespace srgnet
