#include "srgnet/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "srgnet/rng.hpp"

namespace srgnet {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

double parse_real(std::string_view tok, const std::filesystem::path& path, std::size_t line_no) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw Error(ErrorCode::ParseError, where(path, line_no) + ": bad number '" + std::string(tok) + "'");
  return value;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

// Leaves vectors that are already unit to within roundoff bit-for-bit
// untouched, so xyz round trips stay exact.
Vec3 renormalized(const Vec3& n, const std::filesystem::path& path, std::size_t line_no) {
  const double len = n.norm();
  if (!(len > 0.0) || !std::isfinite(len))
    throw Error(ErrorCode::ParseError, where(path, line_no) + ": zero or non-finite normal");
  return std::abs(len - 1.0) <= 1e-12 ? n : Vec3(n / len);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Rgb hsv_to_rgb(double h, double s, double v) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  auto to_byte = [](double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); };
  return {to_byte(r), to_byte(g), to_byte(b)};
}

}  // namespace

Palette default_palette(std::size_t min_size) {
  Palette p{{
      {230, 25, 75},   {60, 180, 75},   {0, 130, 200},  {255, 225, 25},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
      {210, 245, 60},  {250, 190, 212}, {0, 128, 128},  {170, 110, 40},
  }};
  constexpr double golden = 0.61803398874989484820;
  double hue = 0.0;
  while (p.colors.size() < min_size) {
    hue = std::fmod(hue + golden, 1.0);
    const std::size_t round = p.colors.size() / 12;
    Rgb c = hsv_to_rgb(hue, 0.55 + 0.4 * static_cast<double>(round % 2), 0.95 - 0.25 * static_cast<double>((round / 2) % 2));
    // Distinctness is part of the palette contract; nudge on collision.
    while (std::find(p.colors.begin(), p.colors.end(), c) != p.colors.end()) {
      hue = std::fmod(hue + 1.0 / 997.0, 1.0);
      c = hsv_to_rgb(hue, 0.7, 0.85);
    }
    p.colors.push_back(c);
  }
  return p;
}

PointCloud load_obj(const std::filesystem::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  cloud.source_id = path.filename().string();
  std::vector<Vec3> normals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    const bool is_v = toks[0] == "v";
    const bool is_vn = toks[0] == "vn";
    if (!is_v && !is_vn) continue;
    // `v` may carry an optional w or per-vertex color after xyz.
    const bool arity_ok = is_v ? (toks.size() == 4 || toks.size() == 5 || toks.size() == 7) : toks.size() == 4;
    if (!arity_ok)
      throw Error(ErrorCode::ParseError, where(path, line_no) + ": expected 3 coordinates after '" +
                                             std::string(toks[0]) + "'");
    const Vec3 p(parse_real(toks[1], path, line_no), parse_real(toks[2], path, line_no),
                 parse_real(toks[3], path, line_no));
    if (is_v) {
      cloud.positions.push_back(p);
    } else {
      normals.push_back(renormalized(p, path, line_no));
    }
  }
  if (cloud.positions.empty()) throw Error(ErrorCode::EmptyCloud, path.string() + " has no vertices");
  if (!normals.empty() && normals.size() == cloud.positions.size()) cloud.normals = std::move(normals);
  require_valid(cloud);
  return cloud;
}

PointCloud load_xyz(const std::filesystem::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  cloud.source_id = path.filename().string();
  std::vector<Vec3> normals;
  std::size_t arity = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (toks.size() != 3 && toks.size() != 6)
      throw Error(ErrorCode::ParseError, where(path, line_no) + ": expected 3 or 6 columns, got " +
                                             std::to_string(toks.size()));
    if (arity == 0) arity = toks.size();
    if (toks.size() != arity)
      throw Error(ErrorCode::MixedArity, where(path, line_no) + ": row has " + std::to_string(toks.size()) +
                                             " columns, earlier rows have " + std::to_string(arity));
    cloud.positions.emplace_back(parse_real(toks[0], path, line_no), parse_real(toks[1], path, line_no),
                                 parse_real(toks[2], path, line_no));
    if (arity == 6) {
      const Vec3 n(parse_real(toks[3], path, line_no), parse_real(toks[4], path, line_no),
                   parse_real(toks[5], path, line_no));
      normals.push_back(renormalized(n, path, line_no));
    }
  }
  if (cloud.positions.empty()) throw Error(ErrorCode::EmptyCloud, path.string() + " has no points");
  if (arity == 6) cloud.normals = std::move(normals);
  require_valid(cloud);
  return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".obj" ? load_obj(path) : load_xyz(path);
}

void write_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    out << format_real(p.x()) << ' ' << format_real(p.y()) << ' ' << format_real(p.z());
    if (cloud.normals) {
      const Vec3& n = (*cloud.normals)[i];
      out << ' ' << format_real(n.x()) << ' ' << format_real(n.y()) << ' ' << format_real(n.z());
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

DownsampleMethod parse_downsample_method(std::string_view name) {
  if (name == "random") return DownsampleMethod::Random;
  if (name == "fps") return DownsampleMethod::Fps;
  throw Error(ErrorCode::InvalidConfig, "unknown downsample method '" + std::string(name) + "'");
}

std::vector<std::size_t> downsample_indices(const PointCloud& cloud, std::size_t n, DownsampleMethod method,
                                            std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "downsample size must be >= 1");
  const std::size_t total = cloud.size();
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  if (n >= total) return idx;

  if (method == DownsampleMethod::Random) {
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.uniform_index(total - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
  } else {
    std::vector<double> min_d2(total, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> picked{0};
    std::size_t last = 0;
    while (picked.size() < n) {
      std::size_t best = 0;
      double best_d2 = -1.0;
      for (std::size_t i = 0; i < total; ++i) {
        min_d2[i] = std::min(min_d2[i], (cloud.positions[i] - cloud.positions[last]).squaredNorm());
        if (min_d2[i] > best_d2) {
          best_d2 = min_d2[i];
          best = i;
        }
      }
      picked.push_back(best);
      last = best;
    }
    idx = std::move(picked);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

PointCloud downsample(const PointCloud& cloud, std::size_t n, DownsampleMethod method, std::uint64_t seed) {
  require_valid(cloud);
  if (n >= cloud.size()) return cloud;
  const auto idx = downsample_indices(cloud, n, method, seed);
  PointCloud out;
  out.source_id = cloud.source_id;
  out.positions.reserve(idx.size());
  for (std::size_t i : idx) out.positions.push_back(cloud.positions[i]);
  if (cloud.normals) {
    std::vector<Vec3> normals;
    normals.reserve(idx.size());
    for (std::size_t i : idx) normals.push_back((*cloud.normals)[i]);
    out.normals = std::move(normals);
  }
  return out;
}

void export_ply_colored(const PointCloud& cloud, const LabelMap& labels, const Palette& palette,
                        const std::filesystem::path& path) {
  check_labels(labels, cloud.size());
  if (palette.size() < static_cast<std::size_t>(labels.num_labels))
    throw Error(ErrorCode::PaletteTooSmall, std::to_string(palette.size()) + " colors for " +
                                                std::to_string(labels.num_labels) + " labels");
  auto out = open_out(path);
  out << "ply\n"
      << "format ascii 1.0\n"
      << "element vertex " << cloud.size() << '\n'
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "property uchar red\n"
      << "property uchar green\n"
      << "property uchar blue\n"
      << "end_header\n";
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Rgb& c = palette.colors[static_cast<std::size_t>(labels.labels[i])];
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %u %u %u\n", static_cast<double>(static_cast<float>(p.x())),
                  static_cast<double>(static_cast<float>(p.y())), static_cast<double>(static_cast<float>(p.z())),
                  unsigned{c[0]}, unsigned{c[1]}, unsigned{c[2]});
    out << buf;
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<Vec3> read_ply_positions(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.size() == 3 && toks[0] == "element" && toks[1] == "vertex")
      count = static_cast<std::size_t>(parse_real(toks[2], path, line_no));
    if (!toks.empty() && toks[0] == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw Error(ErrorCode::ParseError, path.string() + ": missing end_header");
  std::vector<Vec3> out;
  out.reserve(count);
  while (out.size() < count && std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.size() < 3) throw Error(ErrorCode::ParseError, where(path, line_no) + ": short vertex line");
    out.emplace_back(parse_real(toks[0], path, line_no), parse_real(toks[1], path, line_no),
                     parse_real(toks[2], path, line_no));
  }
  if (out.size() != count) throw Error(ErrorCode::ParseError, path.string() + ": truncated vertex list");
  return out;
}

void write_labels(const LabelMap& labels, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (int l : labels.labels) out << l << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

LabelMap read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  LabelMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 1) throw Error(ErrorCode::ParseError, where(path, line_no) + ": expected one label");
    long long value = 0;
    const auto tok = toks[0];
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw Error(ErrorCode::ParseError, where(path, line_no) + ": bad label '" + std::string(tok) + "'");
    if (value < 0) throw Error(ErrorCode::NegativeLabel, where(path, line_no) + ": " + std::string(tok));
    if (value > std::numeric_limits<int>::max() - 1)
      throw Error(ErrorCode::ParseError, where(path, line_no) + ": label too large");
    out.labels.push_back(static_cast<int>(value));
    out.num_labels = std::max(out.num_labels, static_cast<int>(value) + 1);
  }
  if (out.labels.empty()) throw Error(ErrorCode::NoLabels, path.string() + " contains no labels");
  return out;
}

}  // namespace srgnet
