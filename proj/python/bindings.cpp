#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "srgnet/evaluation.hpp"
#include "srgnet/fixtures.hpp"
#include "srgnet/normals.hpp"
#include "srgnet/pipeline.hpp"
#include "srgnet/spatial_index.hpp"

namespace py = pybind11;
using namespace srgnet;

namespace {

using Rows = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

PointCloud to_cloud(const Rows& points, const std::optional<Rows>& normals) {
  PointCloud c;
  c.positions.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) c.positions.emplace_back(points.row(i).transpose());
  if (normals) {
    if (normals->rows() != points.rows())
      throw Error(ErrorCode::ShapeMismatch, "normals and points differ in length");
    std::vector<Vec3> n;
    n.reserve(c.positions.size());
    for (Eigen::Index i = 0; i < normals->rows(); ++i) n.emplace_back(normals->row(i).transpose());
    c.normals = std::move(n);
  }
  require_valid(c);
  return c;
}

Rows to_rows(const std::vector<Vec3>& v) {
  Rows out(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return out;
}

py::array_t<int> to_array(const LabelMap& l) { return py::array_t<int>(l.labels.size(), l.labels.data()); }

LabelMap to_labels(const std::vector<int>& raw) {
  for (int v : raw)
    if (v < 0) throw Error(ErrorCode::NegativeLabel, "negative label");
  return compact_labels(raw);
}

RunConfig make_config(const std::map<std::string, std::string>& settings) {
  RunConfig c;
  for (const auto& [k, v] : settings) set_config_value(c, k, v);
  check_run_config(c);
  return c;
}

PointCloud with_normals(PointCloud c, const RunConfig& config) {
  if (!c.has_normals()) {
    PreparedCloud p = prepare_cloud(c, [&] {
      RunConfig r = config;
      r.n_points = 0;
      return r;
    }());
    return p.cloud;
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Seed region growing and self-trained graph network point cloud segmentation";
  m.attr("__version__") = SRGNET_VERSION;

  py::register_exception<Error>(m, "SrgnetError");

  m.def("config", [](const std::map<std::string, std::string>& settings) {
    return config_json(make_config(settings)).dump();
  }, py::arg("settings") = std::map<std::string, std::string>{},
        "Resolved configuration as a JSON string");

  m.def("estimate_normals", [](const Rows& points, int k) {
    const PointCloud c = to_cloud(points, std::nullopt);
    const auto est = estimate_normals(c, knn_graph(c, static_cast<std::size_t>(k)));
    return to_rows(*est.cloud.normals);
  }, py::arg("points"), py::arg("k") = 20);

  m.def("srg", [](const Rows& points, const std::optional<Rows>& normals,
                  const std::map<std::string, std::string>& settings) {
    const RunConfig config = make_config(settings);
    return to_array(run_srg(with_normals(to_cloud(points, normals), config), config));
  }, py::arg("points"), py::arg("normals") = py::none(), py::arg("settings") = std::map<std::string, std::string>{});

  m.def("kmeans", [](const Rows& points, const std::optional<Rows>& normals,
                     const std::map<std::string, std::string>& settings) {
    const RunConfig config = make_config(settings);
    return to_array(run_kmeans(with_normals(to_cloud(points, normals), config), config).labels);
  }, py::arg("points"), py::arg("normals") = py::none(), py::arg("settings") = std::map<std::string, std::string>{});

  py::class_<ModelParams>(m, "Model")
      .def("save", [](const ModelParams& p, const std::filesystem::path& path) { save_model(p, path); })
      .def_static("load", [](const std::filesystem::path& path) { return load_model(path); });

  m.def("train", [](const Rows& points, const std::optional<Rows>& normals, const std::vector<int>& srg_labels,
                    const std::map<std::string, std::string>& settings) {
    const RunConfig config = make_config(settings);
    const PointCloud c = with_normals(to_cloud(points, normals), config);
    TrainConfig tc = config.train;
    tc.seed = config.seed;
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(c, to_labels(srg_labels), config.model, tc);
    }
    py::list history;
    for (const auto& rec : r.history.records)
      history.append(py::dict(py::arg("iteration") = rec.iteration, py::arg("loss") = rec.loss,
                              py::arg("n_labels") = rec.n_labels, py::arg("agreement") = rec.agreement));
    return py::make_tuple(std::move(r.model), to_array(r.labels), history);
  }, py::arg("points"), py::arg("normals"), py::arg("srg_labels"),
        py::arg("settings") = std::map<std::string, std::string>{},
        "Returns (model, labels, history)");

  m.def("infer", [](const ModelParams& model, const Rows& points, const std::optional<Rows>& normals) {
    return to_array(infer(model, with_normals(to_cloud(points, normals), RunConfig{})));
  }, py::arg("model"), py::arg("points"), py::arg("normals") = py::none());

  m.def("miou", [](const std::vector<int>& pred, const std::vector<int>& gt) {
    return miou(to_labels(pred), to_labels(gt)).miou;
  }, py::arg("pred"), py::arg("gt"));

  m.def("make_fixture", [](const std::string& kind, std::size_t n, std::uint64_t seed) {
    fixtures::LabeledCloud f;
    if (kind == "figure") f = fixtures::three_part_figure(n, seed);
    else if (kind == "dihedral") f = fixtures::dihedral(n, seed);
    else throw Error(ErrorCode::InvalidConfig, "unknown fixture '" + kind + "'");
    return py::make_tuple(to_rows(f.cloud.positions), to_array(f.labels));
  }, py::arg("kind") = "figure", py::arg("n") = 2048, py::arg("seed") = 0);

  m.def("run_pipeline", [](const std::filesystem::path& input, const std::filesystem::path& out_dir,
                           const std::optional<std::filesystem::path>& gt, const std::map<std::string, std::string>& settings) {
    const RunConfig config = make_config(settings);
    PipelineResult r;
    {
      py::gil_scoped_release release;
      r = cmd_pipeline(input, gt, out_dir, config);
    }
    return r.metrics.dump();
  }, py::arg("input"), py::arg("out_dir"), py::arg("gt") = py::none(),
        py::arg("settings") = std::map<std::string, std::string>{}, "Returns metrics as a JSON string");
}
