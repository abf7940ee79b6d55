#include "srgnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "srgnet/kmeans.hpp"
#include "srgnet/normals.hpp"
#include "srgnet/spatial_index.hpp"

#ifndef SRGNET_VERSION
#define SRGNET_VERSION "0.0.0"
#endif

namespace srgnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw Error(ErrorCode::InvalidConfig, "'" + value + "' is not a valid " + expected + " for " + key);
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, v, "boolean");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(static_cast<int>(parse_int(key, trim(item))));
  if (out.empty()) bad_value(key, v, "comma-separated integer list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_points", [](RunConfig& c, auto& k, auto& v) {
         const auto n = parse_int(k, v);
         if (n < 0) bad_value(k, v, "non-negative integer");
         c.n_points = static_cast<std::size_t>(n);
       }},
      {"downsample", [](RunConfig& c, auto&, auto& v) { c.downsample = v; }},
      {"normal_k", [](RunConfig& c, auto& k, auto& v) { c.normal_k = static_cast<int>(parse_int(k, v)); }},
      {"graph_k", [](RunConfig& c, auto& k, auto& v) { c.graph_k = static_cast<int>(parse_int(k, v)); }},
      {"d_max", [](RunConfig& c, auto& k, auto& v) {
         if (v == "auto") c.d_max.reset();
         else c.d_max = parse_real(k, v);
       }},
      {"theta_max_deg", [](RunConfig& c, auto& k, auto& v) {
         if (v == "auto") c.theta_max_deg.reset();
         else c.theta_max_deg = parse_real(k, v);
       }},
      {"srg_target_k", [](RunConfig& c, auto& k, auto& v) { c.srg_target_k = static_cast<int>(parse_int(k, v)); }},
      {"min_cluster", [](RunConfig& c, auto& k, auto& v) { c.min_cluster = static_cast<int>(parse_int(k, v)); }},
      {"max_surface_variation", [](RunConfig& c, auto& k, auto& v) { c.max_surface_variation = parse_real(k, v); }},
      {"kmeans_k", [](RunConfig& c, auto& k, auto& v) { c.kmeans_k = static_cast<int>(parse_int(k, v)); }},
      {"kmeans_max_iter", [](RunConfig& c, auto& k, auto& v) { c.kmeans_max_iter = static_cast<int>(parse_int(k, v)); }},
      {"k_graph", [](RunConfig& c, auto& k, auto& v) { c.model.k_graph = static_cast<int>(parse_int(k, v)); }},
      {"edge_widths", [](RunConfig& c, auto& k, auto& v) { c.model.edge_widths = parse_int_list(k, v); }},
      {"bottleneck_dim", [](RunConfig& c, auto& k, auto& v) { c.model.bottleneck_dim = static_cast<int>(parse_int(k, v)); }},
      {"head_widths", [](RunConfig& c, auto& k, auto& v) { c.model.head_widths = parse_int_list(k, v); }},
      {"out_labels", [](RunConfig& c, auto& k, auto& v) { c.model.out_labels = static_cast<int>(parse_int(k, v)); }},
      {"dynamic_recompute", [](RunConfig& c, auto& k, auto& v) { c.model.dynamic_recompute = parse_bool(k, v); }},
      {"normalize_input", [](RunConfig& c, auto& k, auto& v) { c.model.normalize_input = parse_bool(k, v); }},
      {"center_features", [](RunConfig& c, auto& k, auto& v) { c.model.center_features = parse_bool(k, v); }},
      {"iterations", [](RunConfig& c, auto& k, auto& v) { c.train.iterations = static_cast<int>(parse_int(k, v)); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = parse_real(k, v); }},
      {"momentum", [](RunConfig& c, auto& k, auto& v) { c.train.momentum = parse_real(k, v); }},
      {"min_labels", [](RunConfig& c, auto& k, auto& v) { c.train.min_labels = static_cast<int>(parse_int(k, v)); }},
      {"center_output_bias", [](RunConfig& c, auto& k, auto& v) { c.train.center_output_bias = parse_bool(k, v); }},
      {"warm_start", [](RunConfig& c, auto& k, auto& v) { c.train.warm_start = parse_bool(k, v); }},
      {"latency_reps", [](RunConfig& c, auto& k, auto& v) { c.latency_reps = static_cast<int>(parse_int(k, v)); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) {
         const auto s = parse_int(k, v);
         if (s < 0) bad_value(k, v, "non-negative integer");
         c.seed = static_cast<std::uint64_t>(s);
       }},
  };
  return table;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

void export_ply(const PointCloud& cloud, const LabelMap& labels, const std::filesystem::path& path) {
  export_ply_colored(cloud, labels, default_palette(static_cast<std::size_t>(std::max(labels.num_labels, 12))), path);
}

}  // namespace

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(trim(key));
  if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + trim(key) + "'");
  it->second(config, it->first, trim(value));
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidConfig, origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), origin + ":" + std::to_string(lineno) + ": " + e.detail());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

void check_run_config(const RunConfig& c) {
  parse_downsample_method(c.downsample);
  if (c.normal_k < 3) throw Error(ErrorCode::InvalidConfig, "normal_k must be >= 3");
  if (c.graph_k < 1) throw Error(ErrorCode::InvalidConfig, "graph_k must be >= 1");
  if (c.d_max && !(*c.d_max > 0.0)) throw Error(ErrorCode::InvalidConfig, "d_max must be > 0");
  if (c.theta_max_deg && !(*c.theta_max_deg > 0.0 && *c.theta_max_deg <= 90.0))
    throw Error(ErrorCode::InvalidConfig, "theta_max_deg must be in (0, 90]");
  if (c.srg_target_k < 1) throw Error(ErrorCode::InvalidConfig, "srg_target_k must be >= 1");
  if (c.min_cluster < 0) throw Error(ErrorCode::InvalidConfig, "min_cluster must be >= 0");
  if (!(c.max_surface_variation > 0.0)) throw Error(ErrorCode::InvalidConfig, "max_surface_variation must be > 0");
  if (c.kmeans_k < 1) throw Error(ErrorCode::InvalidConfig, "kmeans_k must be >= 1");
  if (c.kmeans_max_iter < 1) throw Error(ErrorCode::InvalidConfig, "kmeans_max_iter must be >= 1");
  if (c.latency_reps != 0 && c.latency_reps < 3) throw Error(ErrorCode::InvalidConfig, "latency_reps must be 0 or >= 3");
  check_model_config(c.model);
  check_train_config(c.train);
}

nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["n_points"] = c.n_points;
  j["downsample"] = c.downsample;
  j["normal_k"] = c.normal_k;
  j["graph_k"] = c.graph_k;
  j["d_max"] = c.d_max ? nlohmann::ordered_json(*c.d_max) : nlohmann::ordered_json("auto");
  j["theta_max_deg"] = c.theta_max_deg ? nlohmann::ordered_json(*c.theta_max_deg) : nlohmann::ordered_json("auto");
  j["srg_target_k"] = c.srg_target_k;
  j["min_cluster"] = c.min_cluster;
  j["max_surface_variation"] = c.max_surface_variation;
  j["kmeans_k"] = c.kmeans_k;
  j["kmeans_max_iter"] = c.kmeans_max_iter;
  j["k_graph"] = c.model.k_graph;
  j["edge_widths"] = c.model.edge_widths;
  j["bottleneck_dim"] = c.model.bottleneck_dim;
  j["head_widths"] = c.model.head_widths;
  j["out_labels"] = c.model.out_labels;
  j["dynamic_recompute"] = c.model.dynamic_recompute;
  j["normalize_input"] = c.model.normalize_input;
  j["center_features"] = c.model.center_features;
  j["iterations"] = c.train.iterations;
  j["lr"] = c.train.lr;
  j["momentum"] = c.train.momentum;
  j["min_labels"] = c.train.min_labels;
  j["center_output_bias"] = c.train.center_output_bias;
  j["warm_start"] = c.train.warm_start;
  j["latency_reps"] = c.latency_reps;
  j["seed"] = c.seed;
  return j;
}

PreparedCloud prepare_cloud(const PointCloud& raw, const RunConfig& config) {
  require_valid(raw);
  PreparedCloud out;
  if (config.n_points > 0 && raw.size() > config.n_points) {
    out.kept = downsample_indices(raw, config.n_points, parse_downsample_method(config.downsample), config.seed);
  } else {
    out.kept.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out.kept[i] = i;
  }
  out.cloud.source_id = raw.source_id;
  out.cloud.positions.reserve(out.kept.size());
  for (std::size_t i : out.kept) out.cloud.positions.push_back(raw.positions[i]);
  if (raw.normals) {
    std::vector<Vec3> normals;
    normals.reserve(out.kept.size());
    for (std::size_t i : out.kept) normals.push_back((*raw.normals)[i]);
    out.cloud.normals = std::move(normals);
  } else {
    const auto graph = knn_graph(out.cloud, static_cast<std::size_t>(config.normal_k));
    out.cloud = estimate_normals(out.cloud, graph).cloud;
  }
  return out;
}

LabelMap run_srg(const PointCloud& cloud, const RunConfig& config) {
  const auto graph = knn_graph(cloud, static_cast<std::size_t>(config.graph_k));
  SrgParams base;
  base.target_k = config.srg_target_k;
  base.min_cluster = config.min_cluster;
  base.max_surface_variation = config.max_surface_variation;
  base.rng_seed = config.seed;
  ThresholdOverrides overrides;
  overrides.d_max = config.d_max;
  if (config.theta_max_deg) overrides.theta_max = *config.theta_max_deg * std::numbers::pi / 180.0;
  return segment_srg(cloud, graph, auto_thresholds(graph, base, overrides));
}

KmeansResult run_kmeans(const PointCloud& cloud, const RunConfig& config) {
  KmeansOptions options;
  options.max_iter = config.kmeans_max_iter;
  options.seed = config.seed;
  return kmeans(point_features(cloud), config.kmeans_k, options);
}

LabelMap select_labels(const LabelMap& labels, const std::vector<std::size_t>& kept) {
  LabelMap out;
  out.num_labels = labels.num_labels;
  out.labels.reserve(kept.size());
  for (std::size_t i : kept) {
    if (i >= labels.size()) throw Error(ErrorCode::LengthMismatch, "label file shorter than the cloud");
    out.labels.push_back(labels.labels[i]);
  }
  return out;
}

void cmd_normals(const std::filesystem::path& in, const std::filesystem::path& out, const RunConfig& config) {
  check_run_config(config);
  PointCloud raw = load_cloud(in);
  raw.normals.reset();  // always re-estimated here
  write_xyz(prepare_cloud(raw, config).cloud, out);
}

LabelMap cmd_srg(const std::filesystem::path& in, const std::filesystem::path& out_labels,
                 const std::optional<std::filesystem::path>& out_ply, const RunConfig& config) {
  check_run_config(config);
  const PreparedCloud prepared = prepare_cloud(load_cloud(in), config);
  LabelMap labels = run_srg(prepared.cloud, config);
  write_labels(labels, out_labels);
  if (out_ply) export_ply(prepared.cloud, labels, *out_ply);
  return labels;
}

LabelMap cmd_kmeans(const std::filesystem::path& in, const std::filesystem::path& out_labels,
                    const std::optional<std::filesystem::path>& out_ply, const RunConfig& config) {
  check_run_config(config);
  const PreparedCloud prepared = prepare_cloud(load_cloud(in), config);
  LabelMap labels = run_kmeans(prepared.cloud, config).labels;
  write_labels(labels, out_labels);
  if (out_ply) export_ply(prepared.cloud, labels, *out_ply);
  return labels;
}

TrainResult cmd_train(const std::filesystem::path& in, const std::optional<std::filesystem::path>& srg_labels,
                      const std::filesystem::path& out_model, const std::filesystem::path& out_labels,
                      const std::optional<std::filesystem::path>& out_history, const RunConfig& config) {
  check_run_config(config);
  const PreparedCloud prepared = prepare_cloud(load_cloud(in), config);
  LabelMap clusters;
  if (srg_labels) {
    clusters = read_labels(*srg_labels);
    if (clusters.size() != prepared.cloud.size())
      throw Error(ErrorCode::LengthMismatch, std::to_string(clusters.size()) + " SRG labels for " +
                                                 std::to_string(prepared.cloud.size()) + " points");
  } else {
    clusters = run_srg(prepared.cloud, config);
  }
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  TrainResult r = train(prepared.cloud, clusters, config.model, tc);
  save_model(r.model, out_model);
  write_labels(r.labels, out_labels);
  if (out_history) r.history.write_csv(*out_history);
  return r;
}

LabelMap cmd_infer(const std::filesystem::path& model, const std::filesystem::path& in,
                   const std::filesystem::path& out_labels, const std::optional<std::filesystem::path>& out_ply,
                   const RunConfig& config) {
  check_run_config(config);
  const ModelParams params = load_model(model);
  const PreparedCloud prepared = prepare_cloud(load_cloud(in), config);
  LabelMap labels = infer(params, prepared.cloud);
  write_labels(labels, out_labels);
  if (out_ply) export_ply(prepared.cloud, labels, *out_ply);
  return labels;
}

MiouResult cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt,
                    const std::optional<std::filesystem::path>& out_json) {
  const LabelMap p = read_labels(pred);
  const LabelMap g = read_labels(gt);
  MiouResult r = miou(p, g);
  if (out_json) {
    nlohmann::ordered_json echo;
    echo["pred"] = pred.string();
    echo["gt"] = gt.string();
    write_json(metrics_json(r, std::nullopt, p.size(), echo), *out_json);
  }
  return r;
}

PipelineResult cmd_pipeline(const std::filesystem::path& in, const std::optional<std::filesystem::path>& gt,
                            const std::filesystem::path& out_dir, const RunConfig& config) {
  check_run_config(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const PointCloud raw = load_cloud(in);
  std::optional<LabelMap> truth;
  if (gt) {
    const LabelMap full = read_labels(*gt);
    if (full.size() != raw.size())
      throw Error(ErrorCode::LengthMismatch, std::to_string(full.size()) + " ground-truth labels for " +
                                                 std::to_string(raw.size()) + " points");
    truth = full;
  }
  const PreparedCloud prepared = prepare_cloud(raw, config);
  if (truth) truth = select_labels(*truth, prepared.kept);
  write_xyz(prepared.cloud, out_dir / "points.xyz");

  PipelineResult r;
  r.srg_labels = run_srg(prepared.cloud, config);
  write_labels(r.srg_labels, out_dir / "srg_labels.txt");
  export_ply(prepared.cloud, r.srg_labels, out_dir / "srg.ply");

  const KmeansResult km = run_kmeans(prepared.cloud, config);
  write_labels(km.labels, out_dir / "kmeans_labels.txt");

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  const TrainResult trained = train(prepared.cloud, r.srg_labels, config.model, tc);
  r.labels = trained.labels;
  r.history = trained.history;
  save_model(trained.model, out_dir / "model.txt");
  trained.history.write_csv(out_dir / "history.csv");
  write_labels(r.labels, out_dir / "labels.txt");
  export_ply(prepared.cloud, r.labels, out_dir / "segmentation.ply");

  std::optional<LatencyStats> timing;
  if (config.latency_reps > 0)
    timing = latency([&] { infer(trained.model, prepare_cloud(raw, config).cloud); }, config.latency_reps);

  const auto echo = config_json(config);
  if (truth) {
    r.metrics = metrics_json(miou(r.labels, *truth), timing, prepared.cloud.size(), echo);
    r.metrics["srg_miou"] = miou(r.srg_labels, *truth).miou;
    r.metrics["kmeans_miou"] = miou(km.labels, *truth).miou;
  } else {
    r.metrics = metrics_json(MiouResult{}, timing, prepared.cloud.size(), echo);
    r.metrics["miou"] = nullptr;
    r.metrics["srg_miou"] = nullptr;
    r.metrics["kmeans_miou"] = nullptr;
  }
  write_json(r.metrics, out_dir / "metrics.json");

  nlohmann::ordered_json manifest;
  manifest["tool"] = "srgnet";
  manifest["version"] = SRGNET_VERSION;
  manifest["command"] = "pipeline";
  manifest["inputs"] = {{"cloud", in.string()},
                        {"cloud_fnv1a64", hex64(fnv1a_file(in))},
                        {"ground_truth", gt ? nlohmann::ordered_json(gt->string()) : nlohmann::ordered_json(nullptr)},
                        {"input_points", raw.size()}};
  manifest["seed"] = config.seed;
  manifest["config"] = echo;
  manifest["summary"] = {{"points", prepared.cloud.size()},
                         {"srg_clusters", r.srg_labels.num_labels},
                         {"iterations_run", r.history.records.size()},
                         {"collapse_stop", r.history.collapse_stop},
                         {"final_labels", r.labels.num_labels}};
  manifest["outputs"] = {"points.xyz",   "srg_labels.txt", "srg.ply",          "kmeans_labels.txt", "model.txt",
                         "history.csv",  "labels.txt",     "segmentation.ply", "metrics.json",      "manifest.json"};
  write_json(manifest, out_dir / "manifest.json");
  return r;
}

}  // namespace srgnet
