#include "bcsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bcsr/errors.hpp"
#include "bcsr/locator.hpp"

namespace bcsr {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Raster {
  int n = 0;
  std::vector<char> inside;
  std::vector<double> a;
  std::vector<double> b;
};

Raster rasterize(const Mesh& mesh, const PointLocator& locator, const Eigen::VectorXd& fa,
                 const Eigen::VectorXd& fb, int n, double z) {
  const auto box = mesh.bounding_box();
  Raster r;
  r.n = n;
  r.inside.assign(static_cast<std::size_t>(n * n), 0);
  r.a.assign(r.inside.size(), 0.0);
  r.b.assign(r.inside.size(), 0.0);
  const double dx = (box(1, 0) - box(0, 0)) / n;
  const double dy = (box(1, 1) - box(0, 1)) / n;
  Eigen::VectorXd x(mesh.dimension());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      x(0) = box(0, 0) + (i + 0.5) * dx;
      x(1) = box(0, 1) + (j + 0.5) * dy;
      if (mesh.dimension() == 3) x(2) = z;
      const auto loc = locator.locate(x);
      if (!loc) continue;
      const auto p = static_cast<std::size_t>(j * n + i);
      r.inside[p] = 1;
      r.a[p] = locator.interpolate(*loc, fa);
      r.b[p] = locator.interpolate(*loc, fb);
    }
  }
  return r;
}

void range_of(const Raster& r, const std::vector<double>& v, double* lo, double* hi) {
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (!r.inside[p]) continue;
    *lo = std::min(*lo, v[p]);
    *hi = std::max(*hi, v[p]);
  }
}

// Sum of the local SSIM map over in-domain pixels, and the pixel count.
std::pair<double, Index> ssim_sum(const Raster& r, const SSIMOptions& o, double range) {
  const int half = o.window / 2;
  std::vector<double> w(static_cast<std::size_t>(o.window * o.window));
  for (int v = -half; v <= half; ++v) {
    for (int u = -half; u <= half; ++u) {
      w[static_cast<std::size_t>((v + half) * o.window + u + half)] =
          std::exp(-(u * u + v * v) / (2.0 * o.window_sigma * o.window_sigma));
    }
  }
  const double c1 = std::pow(o.k1 * range, 2);
  const double c2 = std::pow(o.k2 * range, 2);
  double sum = 0.0;
  Index count = 0;
  const int n = r.n;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!r.inside[static_cast<std::size_t>(j * n + i)]) continue;
      double ws = 0.0, ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int v = -half; v <= half; ++v) {
        const int jj = j + v;
        if (jj < 0 || jj >= n) continue;
        for (int u = -half; u <= half; ++u) {
          const int ii = i + u;
          if (ii < 0 || ii >= n) continue;
          const auto p = static_cast<std::size_t>(jj * n + ii);
          if (!r.inside[p]) continue;
          const double wk = w[static_cast<std::size_t>((v + half) * o.window + u + half)];
          ws += wk;
          ma += wk * r.a[p];
          mb += wk * r.b[p];
          saa += wk * r.a[p] * r.a[p];
          sbb += wk * r.b[p] * r.b[p];
          sab += wk * r.a[p] * r.b[p];
        }
      }
      ma /= ws;
      mb /= ws;
      const double va = std::max(0.0, saa / ws - ma * ma);
      const double vb = std::max(0.0, sbb / ws - mb * mb);
      const double cov = sab / ws - ma * mb;
      sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return {sum, count};
}

void check_pair(const Mesh& mesh, const Eigen::VectorXd& truth, const Eigen::VectorXd& recon) {
  if (truth.size() != mesh.num_nodes() || recon.size() != mesh.num_nodes()) {
    throw InputError("metric fields must be nodal on the same mesh (" + std::to_string(mesh.num_nodes()) +
                     " nodes; got " + std::to_string(truth.size()) + " and " + std::to_string(recon.size()) + ")");
  }
}

}  // namespace

Eigen::VectorXd transfer_field(const Mesh& src, const Eigen::VectorXd& sigma_src, const Mesh& dst,
                               double max_outside) {
  if (sigma_src.size() != src.num_nodes()) throw InputError("transfer_field: field does not match source mesh");
  if (src.dimension() != dst.dimension()) throw InputError("transfer_field: meshes differ in dimension");
  const auto box = src.bounding_box();
  const double limit = max_outside * (box.row(1) - box.row(0)).norm();
  PointLocator locator(src);
  Eigen::VectorXd out(dst.num_nodes());
  for (Index n = 0; n < dst.num_nodes(); ++n) {
    const Eigen::VectorXd x = dst.nodes().row(n).transpose();
    const PointLocation loc = locator.locate_or_nearest(x);
    if (loc.distance > limit) {
      std::ostringstream msg;
      msg << "transfer_field: node " << n << " lies " << loc.distance << " outside the source mesh";
      throw InputError(msg.str());
    }
    out(n) = locator.interpolate(loc, sigma_src);
  }
  return out;
}

double rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& recon) {
  if (truth.size() != recon.size() || truth.size() == 0) throw InputError("rmse: fields differ in length or are empty");
  return std::sqrt((recon - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double pearson(const Eigen::VectorXd& truth, const Eigen::VectorXd& recon) {
  if (truth.size() != recon.size() || truth.size() < 2) throw InputError("pearson: fields differ in length or are too short");
  const Eigen::VectorXd a = truth.array() - truth.mean();
  const Eigen::VectorXd b = recon.array() - recon.mean();
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return kNaN;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

SSIMRange parse_ssim_range(std::string_view name) {
  if (name == "truth") return SSIMRange::truth;
  if (name == "pair") return SSIMRange::pair;
  throw InputError("ssim_range must be \"truth\" or \"pair\", got \"" + std::string(name) + "\"");
}

double ssim(const Mesh& mesh, const Eigen::VectorXd& truth, const Eigen::VectorXd& recon, const SSIMOptions& options) {
  check_pair(mesh, truth, recon);
  if (options.resolution < 8 || options.window < 1 || options.window % 2 == 0 || !(options.window_sigma > 0.0)) {
    throw InputError("ssim: need resolution >= 8 and an odd window with positive width");
  }
  PointLocator locator(mesh);
  std::vector<Raster> rasters;
  if (mesh.dimension() == 2) {
    rasters.push_back(rasterize(mesh, locator, truth, recon, options.resolution, 0.0));
  } else {
    const auto box = mesh.bounding_box();
    const double z0 = box(0, 2);
    const double z1 = box(1, 2);
    if (!options.volume) {
      rasters.push_back(rasterize(mesh, locator, truth, recon, options.resolution, 0.5 * (z0 + z1)));
    } else {
      const int k = std::max(1, options.volume_slices);
      for (int s = 0; s < k; ++s) {
        rasters.push_back(rasterize(mesh, locator, truth, recon, options.resolution, z0 + (s + 0.5) * (z1 - z0) / k));
      }
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : rasters) {
    range_of(r, r.a, &lo, &hi);
    if (options.range == SSIMRange::pair) range_of(r, r.b, &lo, &hi);
  }
  if (!(hi > lo)) {
    // Constant truth: fall back to the pair so the constants stay non-zero.
    for (const auto& r : rasters) range_of(r, r.b, &lo, &hi);
  }
  if (!std::isfinite(lo)) throw InputError("ssim: the raster does not intersect the mesh");
  if (!(hi > lo)) return 1.0;  // both fields constant and, on the raster, identical in range
  double sum = 0.0;
  Index count = 0;
  for (const auto& r : rasters) {
    const auto [s, c] = ssim_sum(r, options, hi - lo);
    sum += s;
    count += c;
  }
  return sum / static_cast<double>(count);
}

MetricReport compute_metrics(const Eigen::VectorXd& truth, const Eigen::VectorXd& recon, const Mesh& mesh,
                             const SSIMOptions& options) {
  check_pair(mesh, truth, recon);
  MetricReport m;
  m.rmse = rmse(truth, recon);
  m.cc = pearson(truth, recon);
  if (std::isnan(m.cc)) m.warnings.emplace_back("correlation undefined for a constant field; reported as NaN");
  m.ssim = ssim(mesh, truth, recon, options);
  return m;
}

std::string metrics_csv_header() { return "case,method,snr,seed,ssim,cc,rmse"; }

std::string to_csv_row(const MetricReport& r) {
  char buf[256];
  const std::string snr = std::isinf(r.snr_db) ? "inf" : [&] {
    char s[32];
    std::snprintf(s, sizeof(s), "%g", r.snr_db);
    return std::string(s);
  }();
  std::snprintf(buf, sizeof(buf), "%s,%s,%s,%llu,%.6f,%.6f,%.6f", r.case_id.c_str(), r.method.c_str(), snr.c_str(),
                static_cast<unsigned long long>(r.seed), r.ssim, r.cc, r.rmse);
  return buf;
}

double ventilation_index(const Mesh& mesh, const Eigen::VectorXd& delta_sigma, const std::vector<char>& mask) {
  if (delta_sigma.size() != mesh.num_nodes()) throw InputError("ventilation_index: field is not nodal on the mesh");
  if (static_cast<Index>(mask.size()) != mesh.num_elements()) {
    throw InputError("ventilation_index: mask has " + std::to_string(mask.size()) + " entries for " +
                     std::to_string(mesh.num_elements()) + " elements");
  }
  const Eigen::VectorXd means = mesh.element_means(delta_sigma);
  double f = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    if (mask[static_cast<std::size_t>(e)]) f += std::max(0.0, -means(e)) * mesh.element_measure(e);
  }
  return f;
}

VentilationSeries ventilation_series(const Mesh& mesh, const std::vector<Eigen::VectorXd>& frames,
                                     const std::vector<char>& left_mask, const std::vector<char>& right_mask) {
  if (frames.empty()) throw InputError("ventilation_series: no frames");
  VentilationSeries s;
  for (const auto& f : frames) {
    s.left.push_back(ventilation_index(mesh, f, left_mask));
    s.right.push_back(ventilation_index(mesh, f, right_mask));
    s.total.push_back(s.left.back() + s.right.back());
  }
  s.peak = std::max_element(s.total.begin(), s.total.end()) - s.total.begin();
  const auto p = static_cast<std::size_t>(s.peak);
  if (s.total[p] > 0.0) {
    s.left_fraction = s.left[p] / s.total[p];
    s.right_fraction = s.right[p] / s.total[p];
  } else {
    s.left_fraction = kNaN;
    s.right_fraction = kNaN;
    s.warnings.emplace_back("ventilation index is zero in every frame; fractions undefined");
  }
  return s;
}

std::string VentilationSeries::to_csv() const {
  std::ostringstream out;
  out << "t,F_left,F_right,F_total\n";
  char buf[128];
  for (std::size_t t = 0; t < total.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", t, left[t], right[t], total[t]);
    out << buf;
  }
  return out.str();
}

}  // namespace bcsr
