#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bcsr/basis.hpp"
#include "bcsr/boundmap.hpp"
#include "bcsr/forward.hpp"

namespace bcsr {

/// Levenberg-Marquardt-Fletcher parameters.
struct LMFConfig {
  double mu0 = 1e-4;
  double gamma1 = 0.25;
  double gamma2 = 4.0;
  double rho1 = 0.25;
  double rho2 = 0.75;
  int max_iter = 50;
  std::optional<double> eps;  ///< step-norm tolerance; default 1e-6 * sqrt(N_b)
  int max_inner = 20;

  /// Throws InputError unless 0 < rho1 < rho2 < 1, 0 < gamma1 < 1 < gamma2,
  /// mu0 > 0, max_iter >= 1, max_inner >= 1 and eps (if set) > 0.
  void validate() const;
  double step_tolerance(Index n_b) const;
};

/// Optional smoothed-TV penalty on sigma.
struct TVConfig {
  bool enabled = false;
  std::optional<double> lambda0;  ///< default 1e-3 * (0.5 |r0|^2 / TV(sigma0))
  /// Smoothing of |grad sigma|; default (u - l) / (largest bounding-box side).
  std::optional<double> beta;
  /// Add lambda * B^T diag(H') Hess(TV) diag(H') B to the damped normal matrix.
  bool curvature = true;
};

enum class Termination { max_iter, step_tol, inner_cap };
std::string_view to_string(Termination t);

/// One trial step of the inner loop.
struct IterationRecord {
  int iteration = 0;  ///< outer iteration, 1-based
  int trial = 0;      ///< inner trial within the outer iteration, 1-based
  double objective = 0.0;  ///< objective at alpha + d
  double rho = 0.0;
  double mu = 0.0;  ///< damping used for this trial
  double step_norm = 0.0;
  bool accepted = false;
};

struct ReconResult {
  Eigen::VectorXd alpha;
  Eigen::VectorXd c;
  Eigen::VectorXd sigma;
  /// Objective of the current iterate: entry 0 at the start, then one entry per outer iteration.
  std::vector<double> objective_history;
  std::vector<IterationRecord> trace;
  Termination termination = Termination::max_iter;
  int outer_iterations = 0;
  int accepted_steps = 0;
  double lambda = 0.0;  ///< TV weight used (0 when disabled)
  double sigma_min = std::numeric_limits<double>::infinity();  ///< over all iterates
  double sigma_max = -std::numeric_limits<double>::infinity();

  std::vector<double> step_norms() const;
  std::vector<bool> accepted() const;
  std::vector<double> mu_history() const;
  /// Objective after each accepted step, preceded by the initial objective.
  std::vector<double> accepted_objectives() const;

  /// `iter k | obj | rho | mu | step_norm | accepted`, one line per trial.
  std::vector<std::string> log_lines() const;
  /// Histories, termination and fields as a JSON document.
  std::string to_json() const;
};

/// J_sigma * diag(hprime) * B.
/// (u - l) divided by the largest side of the mesh bounding box.
double default_tv_beta(const Mesh& mesh, const BoundMap& bounds);

Eigen::MatrixXd latent_jacobian(const Eigen::MatrixXd& jacobian_sigma, const Eigen::VectorXd& hprime,
                                const Eigen::MatrixXd& basis);

/// Solves (J^T J + mu I) d = -J^T r. mu = 0 is allowed when J has full column
/// rank. Throws SolverError when the system is not positive definite or the
/// step is not finite.
Eigen::VectorXd lmf_step(const Eigen::MatrixXd& jacobian_alpha, const Eigen::VectorXd& residual, double mu);

/// Damping update: gamma2 * mu if rho < rho1, gamma1 * mu if rho > rho2, else mu.
double fletcher_update(double mu, double rho, const LMFConfig& config = {});

struct ReconOptions {
  LMFConfig lmf;
  TVConfig tv;
  double snr_db = std::numeric_limits<double>::infinity();
  std::function<void(const IterationRecord&)> on_trial;
};

/// Bound-constrained sparse-representation reconstruction: minimises
///   0.5 |U(H(B alpha)) - V|^2 + lambda(snr) TV(H(B alpha))
/// over alpha with Levenberg-Marquardt-Fletcher steps, starting at alpha = 0.
/// The gain ratio uses the Gauss-Newton model, whose predicted reduction is
/// 0.5 d^T (mu d - g) with g the full objective gradient.
ReconResult reconstruct(const ForwardModel& model, const Eigen::VectorXd& measurements, const GraphBasis& basis,
                        const BoundMap& bounds, const ReconOptions& options = {});

/// Target for time-difference imaging: U(sigma_baseline) + (V_target - V_baseline).
Eigen::VectorXd difference_target(const ForwardModel& model, const Eigen::VectorXd& sigma_baseline,
                                  const Eigen::VectorXd& v_baseline, const Eigen::VectorXd& v_target);

}  // namespace bcsr
