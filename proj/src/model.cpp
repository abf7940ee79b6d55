#include "srgnet/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "srgnet/normals.hpp"
#include "srgnet/rng.hpp"
#include "srgnet/spatial_index.hpp"

namespace srgnet {

using ad::Mat;
using ad::Tape;
using ad::Tensor;

void check_model_config(const ModelConfig& c) {
  auto positive = [](const std::vector<int>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](int w) { return w >= 1; });
  };
  if (c.k_graph < 1) throw Error(ErrorCode::InvalidConfig, "k_graph must be >= 1");
  if (!positive(c.edge_widths)) throw Error(ErrorCode::InvalidConfig, "edge_widths must be non-empty and >= 1");
  if (c.bottleneck_dim < 1) throw Error(ErrorCode::InvalidConfig, "bottleneck_dim must be >= 1");
  if (!positive(c.head_widths)) throw Error(ErrorCode::InvalidConfig, "head_widths must be non-empty and >= 1");
  if (c.out_labels < 1) throw Error(ErrorCode::InvalidConfig, "out_labels must be >= 1");
  if (c.transformer_width < 1 || c.transformer_hidden < 1)
    throw Error(ErrorCode::InvalidConfig, "transformer widths must be >= 1");
  if (!positive(c.cov_widths) || !positive(c.graph_widths))
    throw Error(ErrorCode::InvalidConfig, "covariance branch widths must be non-empty and >= 1");
  if (!std::all_of(c.post_widths.begin(), c.post_widths.end(), [](int w) { return w >= 1; }))
    throw Error(ErrorCode::InvalidConfig, "post_widths must be >= 1");
  if (!(c.slope >= 0.0 && c.slope < 1.0)) throw Error(ErrorCode::InvalidConfig, "slope must be in [0, 1)");
}

namespace {

Mat he_normal(Rng& rng, int fan_in, int fan_out) {
  const double scale = std::sqrt(2.0 / fan_in);
  Mat m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

void add_dense(ad::ParamGroup& g, Rng& rng, const std::string& name, int in, int out, bool bias = true) {
  g.add(name + ".w", he_normal(rng, in, out));
  if (bias) g.add(name + ".b", Mat::Zero(1, out));
}

std::string edge_name(std::size_t l) { return "edge" + std::to_string(l); }

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  check_model_config(config);
  Rng rng(seed);
  ModelParams m{config, {}};
  auto& g = m.params;

  add_dense(g, rng, "transformer.edge", 12, config.transformer_width);
  add_dense(g, rng, "transformer.fc", config.transformer_width, config.transformer_hidden);
  g.add("transformer.out.w", Mat::Zero(config.transformer_hidden, 9));
  g.add("transformer.out.b", Mat::Zero(1, 9));

  int in = 6;
  for (std::size_t l = 0; l < config.edge_widths.size(); ++l) {
    add_dense(g, rng, edge_name(l), 2 * in, config.edge_widths[l]);
    in = config.edge_widths[l];
  }

  in = 12;
  for (std::size_t l = 0; l < config.cov_widths.size(); ++l) {
    add_dense(g, rng, "cov.mlp" + std::to_string(l), in, config.cov_widths[l]);
    in = config.cov_widths[l];
  }
  for (std::size_t l = 0; l < config.graph_widths.size(); ++l) {
    add_dense(g, rng, "cov.graph" + std::to_string(l), in, config.graph_widths[l], false);
    in = config.graph_widths[l];
  }
  std::vector<int> post = config.post_widths;
  post.push_back(config.bottleneck_dim);
  for (std::size_t l = 0; l < post.size(); ++l) {
    add_dense(g, rng, "cov.post" + std::to_string(l), in, post[l]);
    in = post[l];
  }

  // First head layer acts on [bottleneck replicated, D1, D2, ...]; its weight
  // is stored as the two row blocks.
  int local = 0;
  for (int w : config.edge_widths) local += w;
  const int fan_in = config.bottleneck_dim + local;
  const int h0 = config.head_widths[0];
  Mat w0 = he_normal(rng, fan_in, h0);
  g.add("head.fc0.w_global", w0.topRows(config.bottleneck_dim));
  g.add("head.fc0.w_local", w0.bottomRows(local));
  g.add("head.fc0.b", Mat::Zero(1, h0));
  in = h0;
  for (std::size_t l = 1; l < config.head_widths.size(); ++l) {
    add_dense(g, rng, "head.fc" + std::to_string(l), in, config.head_widths[l]);
    in = config.head_widths[l];
  }
  add_dense(g, rng, "head.out", in, config.out_labels);
  return m;
}

Mat covariance_features(const PointCloud& cloud, const NeighborGraph& graph) {
  Mat out(static_cast<Eigen::Index>(cloud.size()), 9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto v = neighborhood_covariance(cloud.positions, i, graph.neighbors(i)).vectorized();
    for (int j = 0; j < 9; ++j) out(static_cast<Eigen::Index>(i), j) = v[static_cast<std::size_t>(j)];
  }
  return out;
}

PointCloud normalize_positions(const PointCloud& cloud) {
  PointCloud out = cloud;
  if (cloud.size() == 0) return out;
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud.positions) centroid += p;
  centroid /= static_cast<double>(cloud.size());
  double radius = 0.0;
  for (auto& p : out.positions) {
    p -= centroid;
    radius = std::max(radius, p.norm());
  }
  if (radius > 0.0)
    for (auto& p : out.positions) p /= radius;
  return out;
}

ForwardResult forward(Tape& tape, const PointCloud& cloud, const ModelParams& model) {
  require_valid(cloud);
  if (!cloud.normals) throw Error(ErrorCode::MissingNormals, "the network consumes normals");
  if (cloud.size() < 2) throw Error(ErrorCode::EmptyCloud, "the network needs at least 2 points");
  const ModelConfig& cfg = model.config;
  const auto& p = model.params;
  const auto n = static_cast<Eigen::Index>(cloud.size());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k_graph), cloud.size() - 1);
  const double slope = cfg.slope;

  ForwardResult r;
  auto note = [&](const std::string& name, const Tensor& t) { r.layer_norms.emplace_back(name, t.value().norm()); };
  auto center = [&](const Tensor& x) { return cfg.center_features ? ad::center_rows(tape, x) : x; };
  auto dense = [&](const Tensor& x, const std::string& name, bool act, bool centered = false) {
    Tensor y = ad::linear(tape, x, p.at(name + ".w"), p.contains(name + ".b") ? p.at(name + ".b") : Tensor());
    if (centered) y = center(y);
    return act ? ad::leaky_relu(tape, y, slope) : y;
  };

  PointCloud scaled;
  if (cfg.normalize_input) scaled = normalize_positions(cloud);
  const PointCloud& in = cfg.normalize_input ? scaled : cloud;

  const NeighborGraph graph0 = knn_graph(in, k);
  tape.record_pattern(graph0.flat_neighbors());

  Mat raw(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw.block<1, 3>(i, 0) = in.positions[static_cast<std::size_t>(i)].transpose();
    raw.block<1, 3>(i, 3) = (*cloud.normals)[static_cast<std::size_t>(i)].transpose();
  }
  const Tensor x0 = Tensor::constant(raw);

  // Spatial transformer.
  Tensor t = ad::edge_conv(tape, x0, graph0, p.at("transformer.edge.w"), p.at("transformer.edge.b"), slope);
  note("transformer.edge", t);
  t = ad::global_max_pool(tape, t);
  t = dense(t, "transformer.fc", true);
  t = dense(t, "transformer.out", false);
  r.transform = ad::add_constant(tape, ad::reshape(tape, t, 3, 3), Mat::Identity(3, 3));
  const Tensor pos = ad::matmul(tape, ad::slice_cols(tape, x0, 0, 3), r.transform);
  const Tensor nrm = ad::matmul(tape, ad::slice_cols(tape, x0, 3, 3), r.transform);

  // Dynamic edge convolutions.
  std::vector<Tensor> local;
  Tensor x = ad::concat_channels(tape, {pos, nrm});
  for (std::size_t l = 0; l < cfg.edge_widths.size(); ++l) {
    NeighborGraph g = graph0;
    if (l > 0 && cfg.dynamic_recompute) {
      g = knn_graph_features({x.value().data(), static_cast<std::size_t>(x.value().size())}, cloud.size(),
                             static_cast<std::size_t>(x.cols()), k);
      tape.record_pattern(g.flat_neighbors());
    }
    x = center(ad::edge_conv(tape, x, g, p.at(edge_name(l) + ".w"), p.at(edge_name(l) + ".b"), slope));
    note(edge_name(l), x);
    local.push_back(x);
  }

  // Covariance branch down to the bottleneck.
  Tensor c = ad::concat_channels(tape, {pos, Tensor::constant(covariance_features(in, graph0))});
  for (std::size_t l = 0; l < cfg.cov_widths.size(); ++l) c = dense(c, "cov.mlp" + std::to_string(l), true, true);
  note("cov.mlp", c);
  for (std::size_t l = 0; l < cfg.graph_widths.size(); ++l) {
    c = ad::leaky_relu(tape, ad::neighbor_max(tape, c, graph0), slope);
    c = dense(c, "cov.graph" + std::to_string(l), false, true);
    note("cov.graph" + std::to_string(l), c);
  }
  const std::size_t post_layers = cfg.post_widths.size() + 1;
  for (std::size_t l = 0; l < post_layers; ++l) {
    const bool hidden = l + 1 < post_layers;
    c = dense(c, "cov.post" + std::to_string(l), hidden, hidden);
  }
  r.bottleneck = ad::global_max_pool(tape, c);
  note("bottleneck", r.bottleneck);

  // Segmenter head.
  const Tensor global = ad::matmul(tape, r.bottleneck, p.at("head.fc0.w_global"));
  Tensor h = ad::linear(tape, ad::concat_channels(tape, local), p.at("head.fc0.w_local"), p.at("head.fc0.b"));
  h = ad::leaky_relu(tape, ad::add(tape, h, global), slope);
  for (std::size_t l = 1; l < cfg.head_widths.size(); ++l) h = dense(h, "head.fc" + std::to_string(l), true, true);
  note("head", h);
  r.features = h;
  r.logits = dense(h, "head.out", false);
  return r;
}

Mat predict_logits(const PointCloud& cloud, const ModelParams& model) {
  Tape tape;
  return forward(tape, cloud, model).logits.value();
}

// ---- serialization ----------------------------------------------------

namespace {

constexpr const char* kMagic = "srgnet-model";

void write_ints(std::ostream& os, const char* key, const std::vector<int>& v) {
  os << "config " << key;
  for (int x : v) os << ' ' << x;
  os << '\n';
}

double parse_double(const std::string& token, const std::filesystem::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw Error(ErrorCode::ParseError, path.string() + ": bad number '" + token + "'");
  return v;
}

}  // namespace

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const ModelConfig& c = model.config;
  os << kMagic << " 1\n";
  os << "config k_graph " << c.k_graph << '\n';
  write_ints(os, "edge_widths", c.edge_widths);
  os << "config bottleneck_dim " << c.bottleneck_dim << '\n';
  write_ints(os, "head_widths", c.head_widths);
  os << "config out_labels " << c.out_labels << '\n';
  os << "config dynamic_recompute " << (c.dynamic_recompute ? 1 : 0) << '\n';
  os << "config normalize_input " << (c.normalize_input ? 1 : 0) << '\n';
  os << "config center_features " << (c.center_features ? 1 : 0) << '\n';
  os << "config transformer_width " << c.transformer_width << '\n';
  os << "config transformer_hidden " << c.transformer_hidden << '\n';
  write_ints(os, "cov_widths", c.cov_widths);
  write_ints(os, "graph_widths", c.graph_widths);
  write_ints(os, "post_widths", c.post_widths);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", c.slope);
  os << "config slope " << buf << '\n';
  for (const auto& [name, t] : model.params.entries()) {
    os << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", t.value()(i, j));
        os << (j ? " " : "") << buf;
      }
      os << '\n';
    }
  }
  os << "end\n";
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  auto fail = [&](const std::string& what) { return Error(ErrorCode::ParseError, path.string() + ": " + what); };
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic || version != 1) throw fail("not a model file");

  ModelConfig c;
  std::vector<std::pair<std::string, Mat>> tensors;
  std::string line;
  std::getline(is, line);
  bool ended = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "end") {
      ended = true;
      break;
    }
    if (kind == "config") {
      std::string key;
      ls >> key;
      std::vector<std::string> vals;
      for (std::string v; ls >> v;) vals.push_back(v);
      auto one_int = [&] {
        if (vals.size() != 1) throw fail("config " + key + " expects one value");
        return static_cast<int>(parse_double(vals[0], path));
      };
      auto ints = [&] {
        std::vector<int> out;
        for (const auto& v : vals) out.push_back(static_cast<int>(parse_double(v, path)));
        return out;
      };
      if (key == "k_graph") c.k_graph = one_int();
      else if (key == "edge_widths") c.edge_widths = ints();
      else if (key == "bottleneck_dim") c.bottleneck_dim = one_int();
      else if (key == "head_widths") c.head_widths = ints();
      else if (key == "out_labels") c.out_labels = one_int();
      else if (key == "dynamic_recompute") c.dynamic_recompute = one_int() != 0;
      else if (key == "center_features") c.center_features = one_int() != 0;
      else if (key == "normalize_input") c.normalize_input = one_int() != 0;
      else if (key == "transformer_width") c.transformer_width = one_int();
      else if (key == "transformer_hidden") c.transformer_hidden = one_int();
      else if (key == "cov_widths") c.cov_widths = ints();
      else if (key == "graph_widths") c.graph_widths = ints();
      else if (key == "post_widths") c.post_widths = ints();
      else if (key == "slope") c.slope = vals.size() == 1 ? parse_double(vals[0], path) : throw fail("bad slope");
      else throw fail("unknown config key " + key);
    } else if (kind == "tensor") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) throw fail("bad tensor header");
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(is, line)) throw fail("truncated tensor " + name);
        std::istringstream rs(line);
        for (Eigen::Index j = 0; j < cols; ++j) {
          std::string tok;
          if (!(rs >> tok)) throw fail("short row in tensor " + name);
          m(i, j) = parse_double(tok, path);
        }
      }
      if (!m.allFinite()) throw Error(ErrorCode::NonFinite, path.string() + ": non-finite value in " + name);
      tensors.emplace_back(name, std::move(m));
    } else {
      throw fail("unexpected line '" + line + "'");
    }
  }
  if (!ended) throw fail("missing end marker");

  // Validate shapes against a freshly built model.
  ModelParams ref = init_model(c, 0);
  if (tensors.size() != ref.params.size()) throw Error(ErrorCode::ShapeMismatch, path.string() + ": tensor count mismatch");
  ModelParams out{c, {}};
  for (const auto& [name, m] : tensors) {
    if (!ref.params.contains(name)) throw Error(ErrorCode::ShapeMismatch, path.string() + ": unexpected tensor " + name);
    const auto& expect = ref.params.at(name);
    if (expect.rows() != m.rows() || expect.cols() != m.cols())
      throw Error(ErrorCode::ShapeMismatch, path.string() + ": tensor " + name + " has the wrong shape");
    out.params.add(name, m);
  }
  return out;
}

}  // namespace srgnet
