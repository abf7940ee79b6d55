#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "srgnet/fixtures.hpp"
#include "srgnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace srgnet;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  // defaults < config file < --set < --seed
  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) apply_config_file(c, config_file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
      set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    check_run_config(c);
    return c;
  }
};

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud part segmentation: seed region growing plus a self-trained graph network"};
  app.set_version_flag("--version", std::string(SRGNET_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("-c,--config", common.config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.sets, "override one config key (key=value), repeatable");
  app.add_option("--seed", common.seed, "master random seed");

  std::string in, out, out_ply, labels_in, model_path, history, gt, json_out, fixture_kind = "figure";
  std::size_t fixture_points = 20000;

  auto* normals = app.add_subcommand("normals", "estimate normals and write x y z nx ny nz");
  normals->add_option("input", in, "OBJ or XYZ cloud")->required()->check(CLI::ExistingFile);
  normals->add_option("output", out, "XYZ output")->required();

  auto* srg = app.add_subcommand("srg", "seed region growing pre-segmentation");
  srg->add_option("input", in)->required()->check(CLI::ExistingFile);
  srg->add_option("-o,--labels", out, "label file")->required();
  srg->add_option("--ply", out_ply, "colored PLY");

  auto* km = app.add_subcommand("kmeans", "k-means baseline on position and normal features");
  km->add_option("input", in)->required()->check(CLI::ExistingFile);
  km->add_option("-o,--labels", out)->required();
  km->add_option("--ply", out_ply);

  auto* tr = app.add_subcommand("train", "self-train the network against SRG clusters");
  tr->add_option("input", in)->required()->check(CLI::ExistingFile);
  tr->add_option("--srg-labels", labels_in, "precomputed SRG labels (run SRG when absent)")->check(CLI::ExistingFile);
  tr->add_option("-m,--model", model_path, "model output")->required();
  tr->add_option("-o,--labels", out, "final labels")->required();
  tr->add_option("--history", history, "per-iteration CSV");

  auto* inf = app.add_subcommand("infer", "label a cloud with a trained model");
  inf->add_option("-m,--model", model_path)->required()->check(CLI::ExistingFile);
  inf->add_option("input", in)->required()->check(CLI::ExistingFile);
  inf->add_option("-o,--labels", out)->required();
  inf->add_option("--ply", out_ply);

  auto* ev = app.add_subcommand("eval", "Hungarian-matched mIoU of predicted against reference labels");
  ev->add_option("pred", in)->required()->check(CLI::ExistingFile);
  ev->add_option("gt", gt)->required()->check(CLI::ExistingFile);
  ev->add_option("--json", json_out, "metrics JSON");

  auto* pipe = app.add_subcommand("pipeline", "downsample, normals, SRG, training, exports and metrics");
  pipe->add_option("input", in)->required()->check(CLI::ExistingFile);
  pipe->add_option("--gt", gt, "reference labels for the input points")->check(CLI::ExistingFile);
  pipe->add_option("-o,--out", out, "run directory")->required();

  auto* fix = app.add_subcommand("make-fixture", "write a synthetic labeled cloud (XYZ plus labels)");
  fix->add_option("kind", fixture_kind, "figure or dihedral")->check(CLI::IsMember({"figure", "dihedral"}));
  fix->add_option("-n,--points", fixture_points, "point count");
  fix->add_option("-o,--output", out, "XYZ output")->required();
  fix->add_option("--labels", labels_in, "label output")->required();

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*normals) {
      cmd_normals(in, out, common.resolve());
    } else if (*srg) {
      const auto labels = cmd_srg(in, out, opt_path(out_ply), common.resolve());
      std::printf("%d clusters\n", labels.num_labels);
    } else if (*km) {
      const auto labels = cmd_kmeans(in, out, opt_path(out_ply), common.resolve());
      std::printf("%d clusters\n", labels.num_labels);
    } else if (*tr) {
      const auto r = cmd_train(in, opt_path(labels_in), model_path, out, opt_path(history), common.resolve());
      std::printf("%zu iterations%s, %d labels\n", r.history.records.size(),
                  r.history.collapse_stop ? " (collapse stop)" : "", r.labels.num_labels);
    } else if (*inf) {
      const auto labels = cmd_infer(model_path, in, out, opt_path(out_ply), common.resolve());
      std::printf("%d labels\n", labels.num_labels);
    } else if (*ev) {
      const auto r = cmd_eval(in, gt, opt_path(json_out));
      std::printf("miou %.6f\n", r.miou);
    } else if (*pipe) {
      const auto r = cmd_pipeline(in, opt_path(gt), out, common.resolve());
      const auto& m = r.metrics["miou"];
      if (m.is_null()) std::printf("%d labels\n", r.labels.num_labels);
      else std::printf("%d labels, miou %.6f\n", r.labels.num_labels, m.get<double>());
    } else if (*fix) {
      const std::uint64_t seed = common.seed.value_or(0);
      const auto f = fixture_kind == "figure" ? fixtures::three_part_figure(fixture_points, seed)
                                              : fixtures::dihedral(fixture_points, seed);
      write_xyz(f.cloud, out);
      write_labels(f.labels, labels_in);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << name << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << name << ": Internal: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
