#include "bcsr/boundmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bcsr/errors.hpp"

namespace bcsr {

double sigmoid(double z) noexcept {
  if (z < -30.0) {
    const double e = std::exp(z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

// sigmoid(z) * (1 - sigmoid(z)) without cancellation for large |z|.
double sigmoid_slope(double z) {
  const double e = std::exp(-std::abs(z));
  return e / ((1.0 + e) * (1.0 + e));
}

}  // namespace

BoundMap::BoundMap(double lower, double upper, Eigen::VectorXd sigma0, double scale)
    : lower_(lower), upper_(upper), sigma0_(std::move(sigma0)), scale_(scale) {
  if (!std::isfinite(lower_) || !std::isfinite(upper_) || !(lower_ < upper_)) {
    throw InputError("bounds must satisfy lower < upper");
  }
  shift_.resize(sigma0_.size());
  for (Index n = 0; n < sigma0_.size(); ++n) {
    const double s = sigma0_(n);
    if (!(s > lower_ && s < upper_)) {
      std::ostringstream msg;
      msg << "initial conductivity " << s << " at node " << n << " is not inside (" << lower_ << ", " << upper_ << ")";
      throw InputError(msg.str());
    }
    shift_(n) = std::log((s - lower_) / (upper_ - s));
  }
}

Eigen::VectorXd BoundMap::map(const Eigen::VectorXd& c) const {
  if (c.size() != size()) throw InputError("latent field has wrong length");
  if (!c.allFinite()) throw InputError("latent field has non-finite entries");
  // Saturated sigmoids round onto a bound in double precision; keep one ulp inside.
  const double lo = std::nextafter(lower_, upper_);
  const double hi = std::nextafter(upper_, lower_);
  Eigen::VectorXd sigma(size());
  for (Index n = 0; n < size(); ++n) {
    // Exact at c = 0: the shift was built from sigma0, so return it unchanged.
    const double s = c(n) == 0.0 ? sigma0_(n) : lower_ + (upper_ - lower_) * sigmoid(c(n) + shift_(n));
    sigma(n) = std::clamp(s, lo, hi);
  }
  return sigma;
}

Eigen::VectorXd BoundMap::derivative(const Eigen::VectorXd& sigma) const {
  if (sigma.size() != size()) throw InputError("conductivity has wrong length");
  Eigen::VectorXd d(size());
  for (Index n = 0; n < size(); ++n) {
    const double s = sigma(n);
    if (!(s > lower_ && s < upper_)) {
      std::ostringstream msg;
      msg << "conductivity " << s << " at node " << n << " is outside the open bound interval";
      throw InputError(msg.str());
    }
    d(n) = (s - lower_) * (upper_ - s) / (upper_ - lower_);
  }
  return d;
}

Eigen::VectorXd BoundMap::derivative_latent(const Eigen::VectorXd& c) const {
  if (c.size() != size()) throw InputError("latent field has wrong length");
  Eigen::VectorXd d(size());
  for (Index n = 0; n < size(); ++n) d(n) = (upper_ - lower_) * sigmoid_slope(c(n) + shift_(n));
  return d;
}

ScaleRule parse_scale_rule(std::string_view name) {
  if (name == "paper") return ScaleRule::paper;
  if (name == "voltage_ls") return ScaleRule::voltage_ls;
  throw InputError("unknown scale rule '" + std::string(name) + "' (expected paper or voltage_ls)");
}

Calibration calibrate_sigma0(const Eigen::VectorXd& measured, const Eigen::VectorXd& predicted,
                             const Eigen::VectorXd& sigma_homo, double lower, double upper, ScaleRule rule) {
  if (measured.size() != predicted.size()) throw InputError("measured and predicted voltages differ in length");
  if (!(lower < upper)) throw InputError("bounds must satisfy lower < upper");
  const double uv = predicted.dot(measured);
  const double scale_uv = predicted.norm() * measured.norm();
  if (!std::isfinite(uv) || !(std::abs(uv) > 1e-14 * scale_uv) || scale_uv == 0.0) {
    throw InputError("scale calibration undefined: sum U*V is zero");
  }
  Calibration out;
  out.scale = rule == ScaleRule::paper ? measured.squaredNorm() / uv : predicted.squaredNorm() / uv;
  if (!(out.scale > 0.0) || !std::isfinite(out.scale)) {
    throw InputError("scale calibration gave a non-positive factor");
  }
  const double margin = 1e-3 * (upper - lower);
  out.sigma0 = (out.scale * sigma_homo).cwiseMax(lower + margin).cwiseMin(upper - margin);
  return out;
}

BoundMap warm_start(const Eigen::VectorXd& baseline, double lower, double upper) {
  return BoundMap(lower, upper, baseline, 1.0);
}

}  // namespace bcsr
