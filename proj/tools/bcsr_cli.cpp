// bcsr: batch driver for simulation, reconstruction and evaluation studies.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bcsr/config.hpp"
#include "bcsr/errors.hpp"
#include "bcsr/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kValidation = 4 };

struct Options {
  std::string config;
  std::string out;
  int jobs = 0;
  std::optional<std::uint64_t> seed_override;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
  cmd->add_option("--jobs", o.jobs, "Worker threads for the grid (overrides jobs)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-override", o.seed_override, "Run only this seed");
  cmd->add_flag("--verbose", o.verbose, "Progress on stderr");
}

bcsr::Pipeline make_pipeline(const Options& o) {
  bcsr::ExperimentConfig cfg = bcsr::load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  if (o.seed_override) cfg.seeds = {*o.seed_override};
  bcsr::Pipeline::Logger log;
  if (o.verbose) log = [](const std::string& m) { std::cerr << m << "\n"; };
  return bcsr::Pipeline(std::move(cfg), log);
}

int report_statuses(const std::vector<bcsr::MethodStatus>& statuses) {
  int failed = 0;
  for (const auto& s : statuses) {
    if (!s.ok) {
      std::cerr << "error: " << s.method << " (snr " << bcsr::format_snr(s.point.snr_db) << ", seed " << s.point.seed
                << "): " << s.message << "\n";
      ++failed;
    }
  }
  std::cout << "reconstruct: " << statuses.size() - static_cast<std::size_t>(failed) << " ok, " << failed
            << " failed\n";
  return failed ? kSolver : kOk;
}

void print_summary(const bcsr::Evaluation& ev) {
  std::printf("%-14s %6s %3s %8s %8s %8s\n", "method", "snr", "n", "ssim", "cc", "rmse");
  for (const auto& r : ev.summary) {
    std::printf("%-14s %6s %3d %8.4f %8.4f %8.4f\n", r.method.c_str(), bcsr::format_snr(r.snr_db).c_str(), r.count,
                r.ssim_mean, r.cc_mean, r.rmse_mean);
  }
  for (const auto& [name, v] : ev.ventilation) {
    std::printf("ventilation %s: peak frame %lld, left %.3f, right %.3f\n", name.c_str(),
                static_cast<long long>(v.peak), v.left_fraction, v.right_fraction);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BC-SR electrical impedance tomography toolkit"};
  app.require_subcommand(1);
  Options o;
  auto* mesh = app.add_subcommand("mesh", "Build the simulation and reconstruction meshes and write them out");
  auto* basis = app.add_subcommand("basis", "Compute (or load from cache) the graph-Laplacian basis");
  auto* simulate = app.add_subcommand("simulate", "Simulate noisy datasets for every SNR and seed");
  auto* reconstruct = app.add_subcommand("reconstruct", "Run the configured methods on the datasets");
  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics against ground truth");
  auto* pipeline = app.add_subcommand("pipeline", "simulate + reconstruct + evaluate");
  auto* export_vtk = app.add_subcommand("export-vtk", "Collect truth and result fields into one VTK file");
  for (auto* cmd : {mesh, basis, simulate, reconstruct, evaluate, pipeline, export_vtk}) add_common(cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    bcsr::Pipeline p = make_pipeline(o);
    if (mesh->parsed()) {
      p.write_meshes();
      std::cout << "meshes written to " << p.config().output_dir.string() << "\n";
    } else if (basis->parsed()) {
      const auto& b = p.basis();
      std::printf("basis: N = %lld, N_b = %lld, eigenvalues [%.6g, %.6g]\n",
                  static_cast<long long>(b.num_nodes()), static_cast<long long>(b.size()), b.eigenvalues(0),
                  b.eigenvalues(b.size() - 1));
    } else if (simulate->parsed()) {
      const auto files = p.simulate();
      std::cout << "simulate: " << files.size() << " dataset(s) in " << (p.config().output_dir / "data").string()
                << "\n";
    } else if (reconstruct->parsed()) {
      return report_statuses(p.reconstruct());
    } else if (evaluate->parsed()) {
      print_summary(p.evaluate());
    } else if (pipeline->parsed()) {
      p.simulate();
      const int code = report_statuses(p.reconstruct());
      print_summary(p.evaluate());
      return code;
    } else if (export_vtk->parsed()) {
      for (const auto& f : p.export_vtk()) std::cout << f.string() << "\n";
    }
  } catch (const bcsr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const bcsr::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const bcsr::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kConfig;
  } catch (const bcsr::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const bcsr::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
