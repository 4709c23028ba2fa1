#pragma once

#include <string_view>

#include <Eigen/Core>

#include "bcsr/mesh.hpp"

namespace bcsr {

/// Logistic function, evaluated without overflow for large |z|.
double sigmoid(double z) noexcept;

/// Bound-preserving map from a nodal latent field to conductivity,
///   H(c) = l + (u - l) * sigmoid(c + shift),  shift = log((s0 - l) / (u - s0)),
/// so that H(0) = sigma0 and every output lies strictly inside (l, u).
class BoundMap {
 public:
  /// Throws InputError unless l < u and l < sigma0_n < u for every node.
  BoundMap(double lower, double upper, Eigen::VectorXd sigma0, double scale = 1.0);

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  const Eigen::VectorXd& sigma0() const noexcept { return sigma0_; }
  const Eigen::VectorXd& shift() const noexcept { return shift_; }
  /// Global scaling factor that produced sigma0 (1 for a warm start).
  double scale() const noexcept { return scale_; }
  Index size() const noexcept { return sigma0_.size(); }

  /// Throws InputError for a wrong length or non-finite entries.
  Eigen::VectorXd map(const Eigen::VectorXd& c) const;

  /// dH/dc expressed through sigma: (sigma - l)(u - sigma)/(u - l).
  /// Throws InputError if any sigma_n lies outside the open interval.
  Eigen::VectorXd derivative(const Eigen::VectorXd& sigma) const;

  /// The same quantity evaluated from the latent field via the sigmoid; keeps
  /// full relative accuracy when sigma has rounded onto a bound.
  Eigen::VectorXd derivative_latent(const Eigen::VectorXd& c) const;

 private:
  double lower_;
  double upper_;
  Eigen::VectorXd sigma0_;
  Eigen::VectorXd shift_;
  double scale_;
};

enum class ScaleRule {
  paper,       ///< s = sum V^2 / sum U V
  voltage_ls,  ///< s = sum U^2 / sum U V
};

ScaleRule parse_scale_rule(std::string_view name);

struct Calibration {
  double scale = 1.0;
  Eigen::VectorXd sigma0;
};

/// Global scale from measured V and homogeneous predictions U, then
/// sigma0 = s * sigma_homo projected into [l + 1e-3 (u - l), u - 1e-3 (u - l)].
/// Throws InputError for a vanishing or non-finite sum U V, mismatched lengths,
/// or a non-positive scale.
Calibration calibrate_sigma0(const Eigen::VectorXd& measured, const Eigen::VectorXd& predicted,
                             const Eigen::VectorXd& sigma_homo, double lower, double upper,
                             ScaleRule rule = ScaleRule::paper);

/// BoundMap with sigma0 = baseline, so a zero latent reproduces the baseline.
/// Throws InputError if the baseline touches or crosses a bound.
BoundMap warm_start(const Eigen::VectorXd& baseline, double lower, double upper);

}  // namespace bcsr
