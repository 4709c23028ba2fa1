#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bcsr/config.hpp"
#include "bcsr/forward.hpp"
#include "bcsr/metrics.hpp"

namespace bcsr {

ElectrodeMesh build_mesh(const MeshSpec& spec, const CaseSpec* case_spec);
StimulationProtocol build_protocol(const ProtocolSpec& spec, int electrode_count);

/// "60", "47.5", "inf".
std::string format_snr(double snr_db);

/// Runs `task(i)` for i in [0, count) on up to `jobs` threads. The first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task);

struct GridPoint {
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct MethodStatus {
  std::string method;
  GridPoint point;
  bool ok = true;
  std::string message;
};

struct SummaryRow {
  std::string method;
  double snr_db = 0.0;
  int count = 0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  double cc_mean = 0.0, cc_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
};

struct Evaluation {
  std::vector<MetricReport> rows;
  std::vector<SummaryRow> summary;
  std::vector<std::pair<std::string, VentilationSeries>> ventilation;  ///< tagged by result name
};

/// Orchestrates the simulate / reconstruct / evaluate stages of one study.
/// Output layout under the output directory:
///   data/<case>_snr<snr>_seed<seed>.json            simulated datasets
///   results/<case>_snr<snr>_seed<seed>_<method>.*   json, csv, vtk, log
///   metrics.csv, summary.csv, ventilation_*.csv
class Pipeline {
 public:
  using Logger = std::function<void(const std::string&)>;

  /// Builds meshes and protocol. Throws ValidationError when the inverse-crime
  /// guard is on and both meshes have the same fingerprint.
  explicit Pipeline(ExperimentConfig config, Logger log = {});
  ~Pipeline();

  const ExperimentConfig& config() const noexcept { return config_; }
  const ElectrodeMesh& recon_mesh() const noexcept { return *recon_; }
  const ElectrodeMesh* sim_mesh() const noexcept { return sim_ ? &*sim_ : nullptr; }
  const StimulationProtocol& protocol() const noexcept { return *protocol_; }
  std::string tag() const;
  std::vector<GridPoint> grid() const;

  std::array<double, 2> bounds() const;
  /// Basis sizes requested for BC-SR, ascending as given.
  std::vector<Index> basis_sizes() const;
  /// Result name of BC-SR for a basis size ("bcsr", or "bcsr_nb<k>" in a sweep).
  std::string bcsr_name(Index n_b) const;
  /// Method names present in the result files, in run order.
  std::vector<std::string> result_methods() const;

  /// Largest requested basis, through the cache.
  const GraphBasis& basis();

  /// Nodal ground truth on the reconstruction mesh: absolute conductivity, or
  /// the change at contrast amplitude `t` in difference mode.
  Eigen::VectorXd truth_on_recon(double t = 1.0) const;

  void write_meshes();
  std::vector<std::filesystem::path> simulate();
  std::vector<MethodStatus> reconstruct();
  Evaluation evaluate();
  std::vector<std::filesystem::path> export_vtk();

  std::filesystem::path dataset_path(const GridPoint& p) const;
  std::filesystem::path result_path(const GridPoint& p, const std::string& method, const char* ext) const;

 private:
  struct Dataset;
  Dataset load_dataset(const GridPoint& p) const;
  std::vector<MethodStatus> reconstruct_point(const GridPoint& p);
  void log(const std::string& msg) const;

  ExperimentConfig config_;
  Logger log_;
  std::optional<CaseSpec> case_;
  std::optional<ElectrodeMesh> sim_;
  std::optional<ElectrodeMesh> recon_;
  std::optional<StimulationProtocol> protocol_;
  std::unique_ptr<ForwardModel> sim_model_;
  std::unique_ptr<ForwardModel> recon_model_;
  std::optional<GraphBasis> basis_;
};

}  // namespace bcsr
