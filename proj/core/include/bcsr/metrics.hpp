#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bcsr/mesh.hpp"

namespace bcsr {

/// Linear interpolant of a nodal field on `src` sampled at the nodes of `dst`.
/// Nodes slightly outside `src` (curved boundaries discretised differently)
/// use the nearest element; nodes farther than `max_outside` times the
/// bounding-box diagonal raise InputError.
Eigen::VectorXd transfer_field(const Mesh& src, const Eigen::VectorXd& sigma_src, const Mesh& dst,
                               double max_outside = 0.05);

double rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& recon);

/// Pearson correlation; NaN when either field is constant.
double pearson(const Eigen::VectorXd& truth, const Eigen::VectorXd& recon);

enum class SSIMRange { truth, pair };
SSIMRange parse_ssim_range(std::string_view name);

struct SSIMOptions {
  int resolution = 128;
  int window = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  SSIMRange range = SSIMRange::truth;
  /// 3D only: average over `volume_slices` axial slices instead of the mid-plane.
  bool volume = false;
  int volume_slices = 16;
};

/// SSIM of two nodal fields on the same mesh. Both are rasterised on a
/// resolution x resolution grid over the (x, y) bounding box; 3D meshes are
/// cut at the axial mid-plane. Local statistics use a Gaussian window
/// renormalised over in-domain pixels, and the index is averaged over the
/// in-domain pixels.
double ssim(const Mesh& mesh, const Eigen::VectorXd& truth, const Eigen::VectorXd& recon,
            const SSIMOptions& options = {});

struct MetricReport {
  std::string case_id;
  std::string method;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double ssim = 0.0;
  double cc = 0.0;
  double rmse = 0.0;
  std::vector<std::string> warnings;
};

/// Both fields must live on `mesh`.
MetricReport compute_metrics(const Eigen::VectorXd& truth, const Eigen::VectorXd& recon, const Mesh& mesh,
                             const SSIMOptions& options = {});

std::string metrics_csv_header();
std::string to_csv_row(const MetricReport& report);

/// Sum over masked elements of max(0, -mean nodal change) times element measure.
double ventilation_index(const Mesh& mesh, const Eigen::VectorXd& delta_sigma, const std::vector<char>& mask);

struct VentilationSeries {
  std::vector<double> left;
  std::vector<double> right;
  std::vector<double> total;  ///< left + right
  Index peak = 0;             ///< argmax of total
  double left_fraction = 0.0;
  double right_fraction = 0.0;
  std::vector<std::string> warnings;

  std::string to_csv() const;
};

VentilationSeries ventilation_series(const Mesh& mesh, const std::vector<Eigen::VectorXd>& frames,
                                     const std::vector<char>& left_mask, const std::vector<char>& right_mask);

}  // namespace bcsr
