#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bcsr/basis.hpp"
#include "bcsr/boundmap.hpp"
#include "bcsr/metrics.hpp"
#include "bcsr/mesh.hpp"
#include "bcsr/mesh_io.hpp"
#include "bcsr/phantoms.hpp"
#include "bcsr/protocol.hpp"
#include "bcsr/recon.hpp"

namespace bcsr {

struct DiskMeshSpec {
  std::optional<double> radius;  ///< default: case domain
  int rings = 16;
  int electrodes = 16;
  double coverage = 0.5;
  double contact_impedance = 0.01;
};

struct CylinderMeshSpec {
  std::optional<double> radius;  ///< default: case domain
  std::optional<double> height;  ///< default: case domain
  int layers = 8;
  int radial_rings = 8;
  std::optional<int> electrode_rings;  ///< default: case domain
  int electrodes_per_ring = 16;
  double coverage = 0.5;
  double contact_impedance = 0.01;
};

struct FileMeshSpec {
  std::filesystem::path path;
  MeshFormat format = MeshFormat::native_json;
  double contact_impedance = 0.01;
};

using MeshSpec = std::variant<DiskMeshSpec, CylinderMeshSpec, FileMeshSpec>;

struct ProtocolSpec {
  std::string type = "adjacent";  ///< "adjacent" or "tank"
  bool skip_driven = false;
  bool drop_reciprocal = false;
  std::vector<int> terminals{1, 5, 9, 13};  ///< tank only, 1-based
  double amplitude = 1.0;                   ///< mA
};

enum class TVMode { off, on, automatic };  ///< automatic: on below 60 dB

struct LDSpec {
  double alpha_reg = 1e-2;
  bool sweep = false;
  double sweep_lo = 1e-4;
  double sweep_hi = 1.0;
  int sweep_count = 13;
};

struct GNSpec {
  double weight = 1e-2;
  int iters = 10;
};

enum class ReconMode { absolute, difference };

/// One study, parsed from a JSON document whose unknown keys are rejected.
struct ExperimentConfig {
  std::optional<std::string> case_id;
  std::optional<std::filesystem::path> dataset;  ///< external measurements instead of simulation
  /// Unset: a default density for the case domain (the simulation mesh is finer).
  std::optional<MeshSpec> sim_mesh;
  std::optional<MeshSpec> recon_mesh;
  ProtocolSpec protocol;
  std::optional<std::array<double, 2>> bounds;  ///< explicit; else the case's fine/coarse pair
  std::string bounds_preset = "fine";
  ScaleRule scale_rule = ScaleRule::paper;
  std::vector<Index> n_b;  ///< empty: truncation rule
  std::optional<TruncationRegime> truncation;
  LMFConfig lmf;
  TVMode tv_mode = TVMode::off;
  TVConfig tv;
  std::vector<double> snr_db{60.0};
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> methods{"bcsr"};
  LDSpec ld;
  GNSpec gn_l2;
  ReconMode mode = ReconMode::absolute;
  std::vector<double> frames{0.0, 0.5, 1.0, 0.5, 0.0};  ///< difference mode: contrast amplitudes
  bool enforce_no_inverse_crime = true;
  SSIMOptions ssim;
  bool include_truth_row = false;  ///< evaluate: adds a row with recon = truth
  std::filesystem::path output_dir = "out";
  int jobs = 1;
  std::optional<std::filesystem::path> cache_dir;
};

/// Parses and validates. Errors are ConfigError carrying the JSON path of the
/// offending field. Relative file paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace bcsr
