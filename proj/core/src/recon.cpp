#include "bcsr/recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "bcsr/errors.hpp"
#include "bcsr/tv.hpp"

namespace bcsr {
namespace {

// Solves (J^T J + mu I) d = -g.
Eigen::VectorXd damped_step(const Eigen::MatrixXd& JtJ, const Eigen::VectorXd& g, double mu) {
  Eigen::MatrixXd A = JtJ;
  A.diagonal().array() += mu;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw SolverError("damped normal matrix is not positive definite");
  Eigen::VectorXd d = llt.solve(-g);
  if (!d.allFinite()) throw SolverError("LMF step is not finite");
  return d;
}

nlohmann::json to_json_array(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

void LMFConfig::validate() const {
  if (!(rho1 > 0.0 && rho1 < rho2 && rho2 < 1.0)) throw InputError("LMF: need 0 < rho1 < rho2 < 1");
  if (!(gamma1 > 0.0 && gamma1 < 1.0 && gamma2 > 1.0)) throw InputError("LMF: need 0 < gamma1 < 1 < gamma2");
  if (!(mu0 > 0.0)) throw InputError("LMF: mu0 must be positive");
  if (max_iter < 1) throw InputError("LMF: max_iter must be at least 1");
  if (max_inner < 1) throw InputError("LMF: max_inner must be at least 1");
  if (eps && !(*eps > 0.0)) throw InputError("LMF: eps must be positive");
}

double LMFConfig::step_tolerance(Index n_b) const {
  return eps ? *eps : 1e-6 * std::sqrt(static_cast<double>(n_b));
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::max_iter:
      return "max_iter";
    case Termination::step_tol:
      return "step_tol";
    case Termination::inner_cap:
      return "inner_cap";
  }
  return "unknown";
}

std::vector<double> ReconResult::step_norms() const {
  std::vector<double> out;
  for (const auto& t : trace) out.push_back(t.step_norm);
  return out;
}

std::vector<bool> ReconResult::accepted() const {
  std::vector<bool> out;
  for (const auto& t : trace) out.push_back(t.accepted);
  return out;
}

std::vector<double> ReconResult::mu_history() const {
  std::vector<double> out;
  for (const auto& t : trace) out.push_back(t.mu);
  return out;
}

std::vector<double> ReconResult::accepted_objectives() const {
  std::vector<double> out;
  if (!objective_history.empty()) out.push_back(objective_history.front());
  for (const auto& t : trace) {
    if (t.accepted) out.push_back(t.objective);
  }
  return out;
}

std::vector<std::string> ReconResult::log_lines() const {
  std::vector<std::string> out;
  char buf[160];
  for (const auto& t : trace) {
    std::snprintf(buf, sizeof(buf), "iter %d | %.10e | %.6f | %.3e | %.6e | %d", t.iteration, t.objective, t.rho,
                  t.mu, t.step_norm, t.accepted ? 1 : 0);
    out.emplace_back(buf);
  }
  return out;
}

std::string ReconResult::to_json() const {
  nlohmann::json j;
  j["termination_reason"] = std::string(to_string(termination));
  j["outer_iterations"] = outer_iterations;
  j["accepted_steps"] = accepted_steps;
  j["tv_lambda"] = lambda;
  j["objective_history"] = objective_history;
  auto& tr = j["trace"] = nlohmann::json::array();
  for (const auto& t : trace) {
    tr.push_back({{"iteration", t.iteration},
                  {"trial", t.trial},
                  {"objective", t.objective},
                  {"rho", t.rho},
                  {"mu", t.mu},
                  {"step_norm", t.step_norm},
                  {"accepted", t.accepted}});
  }
  j["sigma_range"] = {sigma_min, sigma_max};
  j["alpha"] = to_json_array(alpha);
  j["sigma"] = to_json_array(sigma);
  return j.dump(1);
}

double default_tv_beta(const Mesh& mesh, const BoundMap& bounds) {
  const auto box = mesh.bounding_box();
  return (bounds.upper() - bounds.lower()) / (box.row(1) - box.row(0)).maxCoeff();
}

Eigen::MatrixXd latent_jacobian(const Eigen::MatrixXd& jacobian_sigma, const Eigen::VectorXd& hprime,
                                const Eigen::MatrixXd& basis) {
  if (jacobian_sigma.cols() != hprime.size() || basis.rows() != hprime.size()) {
    throw InputError("latent_jacobian: shapes " + std::to_string(jacobian_sigma.rows()) + "x" +
                     std::to_string(jacobian_sigma.cols()) + ", " + std::to_string(hprime.size()) + ", " +
                     std::to_string(basis.rows()) + "x" + std::to_string(basis.cols()) + " are inconsistent");
  }
  return jacobian_sigma * (hprime.asDiagonal() * basis);
}

Eigen::VectorXd lmf_step(const Eigen::MatrixXd& jacobian_alpha, const Eigen::VectorXd& residual, double mu) {
  if (jacobian_alpha.rows() != residual.size()) throw InputError("lmf_step: residual length does not match J");
  if (!(mu >= 0.0)) throw InputError("lmf_step: mu must be non-negative");
  return damped_step(jacobian_alpha.transpose() * jacobian_alpha, jacobian_alpha.transpose() * residual, mu);
}

double fletcher_update(double mu, double rho, const LMFConfig& config) {
  if (rho < config.rho1) return config.gamma2 * mu;
  if (rho > config.rho2) return config.gamma1 * mu;
  return mu;
}

ReconResult reconstruct(const ForwardModel& model, const Eigen::VectorXd& measurements, const GraphBasis& basis,
                        const BoundMap& bounds, const ReconOptions& options) {
  const LMFConfig& lmf = options.lmf;
  lmf.validate();
  const Index n = model.num_nodes();
  if (basis.num_nodes() != n) throw InputError("basis was built for a different mesh");
  if (bounds.size() != n) throw InputError("bound map has wrong length for the mesh");
  if (measurements.size() != model.num_measurements()) {
    throw InputError("expected " + std::to_string(model.num_measurements()) + " measurements, got " +
                     std::to_string(measurements.size()));
  }
  if (options.tv.enabled && options.tv.beta && !(*options.tv.beta > 0.0)) throw InputError("TV beta must be positive");
  const Eigen::MatrixXd& B = basis.vectors;
  const double eps = lmf.step_tolerance(basis.size());
  const Mesh& mesh = model.mesh();
  const double beta = options.tv.beta ? *options.tv.beta : default_tv_beta(mesh, bounds);

  ReconResult out;
  out.alpha = Eigen::VectorXd::Zero(basis.size());
  out.c = Eigen::VectorXd::Zero(n);
  out.sigma = bounds.map(out.c);
  out.sigma_min = out.sigma.minCoeff();
  out.sigma_max = out.sigma.maxCoeff();

  Linearization lin = model.linearize(out.sigma);
  Eigen::VectorXd r = lin.solution.measurements - measurements;

  double lambda = 0.0;
  if (options.tv.enabled) {
    double lambda0 = 0.0;
    if (options.tv.lambda0) {
      lambda0 = *options.tv.lambda0;
    } else {
      const double tv0 = tv_value_and_gradient(mesh, out.sigma, beta).value;
      lambda0 = tv0 > 0.0 ? 1e-3 * 0.5 * r.squaredNorm() / tv0 : 0.0;
    }
    lambda = tv_weight(options.snr_db, lambda0);
  }
  out.lambda = lambda;

  auto objective = [&](const Eigen::VectorXd& sigma, const Eigen::VectorXd& res, Eigen::VectorXd* tv_grad) {
    double value = 0.5 * res.squaredNorm();
    if (lambda > 0.0) {
      TVEvaluation tv = tv_value_and_gradient(mesh, sigma, beta);
      value += lambda * tv.value;
      if (tv_grad) *tv_grad = lambda * tv.gradient;
    }
    return value;
  };

  Eigen::VectorXd tv_grad;
  double obj = objective(out.sigma, r, &tv_grad);
  out.objective_history.push_back(obj);
  double mu = lmf.mu0;
  bool done = false;

  for (int k = 1; k <= lmf.max_iter && !done; ++k) {
    out.outer_iterations = k;
    const Eigen::VectorXd hprime = bounds.derivative_latent(out.c);
    const Eigen::MatrixXd Ja = latent_jacobian(lin.jacobian, hprime, B);
    Eigen::VectorXd g = Ja.transpose() * r;
    Eigen::MatrixXd JtJ = Ja.transpose() * Ja;
    if (lambda > 0.0) {
      g += B.transpose() * hprime.cwiseProduct(tv_grad);
      if (options.tv.curvature) {
        const Eigen::MatrixXd HB = hprime.asDiagonal() * B;
        JtJ += lambda * (HB.transpose() * (tv_hessian(mesh, out.sigma, beta) * HB));
      }
    }

    bool accepted = false;
    Eigen::VectorXd alpha_new, c_new, sigma_new, r_new;
    double obj_new = obj;
    for (int trial = 1; trial <= lmf.max_inner; ++trial) {
      IterationRecord rec;
      rec.iteration = k;
      rec.trial = trial;
      rec.mu = mu;
      Eigen::VectorXd d;
      try {
        d = damped_step(JtJ, g, mu);
      } catch (const SolverError&) {
        rec.rho = -std::numeric_limits<double>::infinity();
        rec.objective = obj;
        out.trace.push_back(rec);
        if (options.on_trial) options.on_trial(rec);
        mu *= lmf.gamma2;
        continue;
      }
      rec.step_norm = d.norm();
      if (rec.step_norm <= eps) {
        // Converged: the step is negligible and is not applied.
        rec.objective = obj;
        rec.rho = 0.0;
        out.trace.push_back(rec);
        if (options.on_trial) options.on_trial(rec);
        out.termination = Termination::step_tol;
        done = true;
        break;
      }
      alpha_new = out.alpha + d;
      c_new = B * alpha_new;
      sigma_new = bounds.map(c_new);
      r_new = model.measure(sigma_new) - measurements;
      obj_new = objective(sigma_new, r_new, nullptr);
      const double predicted = 0.5 * d.dot(mu * d - g);
      const double actual = obj - obj_new;
      rec.rho = predicted > 0.0 ? actual / predicted : -std::numeric_limits<double>::infinity();
      rec.objective = obj_new;
      accepted = rec.rho > lmf.rho1;
      rec.accepted = accepted;
      out.trace.push_back(rec);
      if (options.on_trial) options.on_trial(rec);
      mu = fletcher_update(mu, rec.rho, lmf);
      if (accepted) break;
    }
    if (done) {
      out.objective_history.push_back(obj);
      break;
    }
    if (!accepted) {
      out.termination = Termination::inner_cap;
      out.objective_history.push_back(obj);
      break;
    }
    out.alpha = std::move(alpha_new);
    out.c = std::move(c_new);
    out.sigma = std::move(sigma_new);
    ++out.accepted_steps;
    out.sigma_min = std::min(out.sigma_min, out.sigma.minCoeff());
    out.sigma_max = std::max(out.sigma_max, out.sigma.maxCoeff());
    if (!(out.sigma_min > bounds.lower() && out.sigma_max < bounds.upper())) {
      throw ValidationError("iterate left the open bound interval");
    }
    lin = model.linearize(out.sigma);
    r = lin.solution.measurements - measurements;
    obj = objective(out.sigma, r, &tv_grad);
    out.objective_history.push_back(obj);
    if (k == lmf.max_iter) out.termination = Termination::max_iter;
  }
  return out;
}

Eigen::VectorXd difference_target(const ForwardModel& model, const Eigen::VectorXd& sigma_baseline,
                                  const Eigen::VectorXd& v_baseline, const Eigen::VectorXd& v_target) {
  if (v_baseline.size() != model.num_measurements() || v_target.size() != model.num_measurements()) {
    throw InputError("difference frames have the wrong number of measurements");
  }
  return model.measure(sigma_baseline) + (v_target - v_baseline);
}

}  // namespace bcsr
