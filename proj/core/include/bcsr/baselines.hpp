#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "bcsr/forward.hpp"

namespace bcsr {

/// One-step linearised reconstruction about sigma0 with NOSER-type weighting,
///   A = (J0^T J0 + alpha_reg R)^-1 J0^T,  R = diag(J0^T J0).
/// A is held in factored form: with Jh = J0 R^-1/2 = U S V^T (thin SVD),
///   A = R^-1/2 V diag(s / (s^2 + alpha_reg)) U^T,
/// so changing alpha_reg costs no refactorisation.
class LDOperator {
 public:
  /// Throws InputError for alpha_reg < 0 and SolverError when some node has
  /// zero sensitivity (R singular).
  LDOperator(Eigen::MatrixXd jacobian, Eigen::VectorXd sigma0, double alpha_reg);

  const Eigen::MatrixXd& jacobian() const noexcept { return J0_; }
  const Eigen::VectorXd& sigma0() const noexcept { return sigma0_; }
  const Eigen::VectorXd& regularizer() const noexcept { return R_; }  ///< diagonal of R
  double alpha_reg() const noexcept { return alpha_; }

  /// Same factorisation, different weight.
  LDOperator with_alpha(double alpha_reg) const;

  /// A * dV. Throws InputError on a length mismatch.
  Eigen::VectorXd apply(const Eigen::VectorXd& dv) const;

  /// Dense N x M reconstruction matrix (for inspection and tests).
  Eigen::MatrixXd matrix() const;

 private:
  LDOperator() = default;

  Eigen::MatrixXd J0_;
  Eigen::VectorXd sigma0_;
  Eigen::VectorXd R_;
  double alpha_ = 0.0;
  Eigen::VectorXd r_inv_sqrt_;
  Eigen::MatrixXd U_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd V_;
};

LDOperator build_ld(const ForwardModel& model, const Eigen::VectorXd& sigma0, double alpha_reg);

/// Delta sigma = A * dV.
Eigen::VectorXd ld_reconstruct(const LDOperator& ld, const Eigen::VectorXd& dv);

/// Absolute-perturbation use: sigma0 + A (V - U(sigma0)).
Eigen::VectorXd ld_absolute(const LDOperator& ld, const ForwardModel& model, const Eigen::VectorXd& measurements);

struct AlphaSweep {
  std::vector<double> alphas;
  std::vector<double> scores;  ///< RMSE against truth, or L-curve curvature
  double best = 0.0;
};

/// Log-spaced sweep over [lo, hi] with `count` points (count >= 2).
/// `score(alpha)` is minimised when given (ground truth available);
/// otherwise the corner of the L-curve (log residual vs log solution norm)
/// with maximum curvature is chosen. `dv` is the data the operator is applied to.
AlphaSweep sweep_alpha(const LDOperator& ld, const Eigen::VectorXd& dv, double lo, double hi, int count,
                       const std::function<double(const Eigen::VectorXd& delta)>& rmse = {});

struct GNResult {
  Eigen::VectorXd sigma;
  std::vector<double> objective_history;  ///< initial value first
  int iterations = 0;
};

/// Damped Gauss-Newton on 0.5 |U(sigma) - V|^2 + w |sigma - sigma_init|^2 with
/// step halving. `weight` is relative: w = weight * mean(diag(J^T J)) at sigma_init.
GNResult gn_l2_reconstruct(const ForwardModel& model, const Eigen::VectorXd& measurements,
                           const Eigen::VectorXd& sigma_init, double weight = 1e-2, int iters = 10);

}  // namespace bcsr
