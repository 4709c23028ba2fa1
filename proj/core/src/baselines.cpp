#include "bcsr/baselines.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "bcsr/errors.hpp"

namespace bcsr {

LDOperator::LDOperator(Eigen::MatrixXd jacobian, Eigen::VectorXd sigma0, double alpha_reg)
    : J0_(std::move(jacobian)), sigma0_(std::move(sigma0)), alpha_(alpha_reg) {
  if (!(alpha_reg >= 0.0) || !std::isfinite(alpha_reg)) throw InputError("alpha_reg must be finite and >= 0");
  if (J0_.cols() != sigma0_.size()) throw InputError("LD: Jacobian columns do not match sigma0");
  R_ = J0_.colwise().squaredNorm().transpose();
  r_inv_sqrt_.resize(R_.size());
  for (Index n = 0; n < R_.size(); ++n) {
    if (!(R_(n) > 0.0)) {
      throw SolverError("LD: node " + std::to_string(n) + " has zero sensitivity; regularised normal matrix is singular");
    }
    r_inv_sqrt_(n) = 1.0 / std::sqrt(R_(n));
  }
  const Eigen::MatrixXd Jh = J0_ * r_inv_sqrt_.asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Jh, Eigen::ComputeThinU | Eigen::ComputeThinV);
  U_ = svd.matrixU();
  s_ = svd.singularValues();
  V_ = svd.matrixV();
  if (alpha_ == 0.0 && (s_.size() < J0_.cols() || s_.minCoeff() <= 0.0)) {
    throw SolverError("LD: alpha_reg = 0 with a rank-deficient Jacobian");
  }
}

LDOperator LDOperator::with_alpha(double alpha_reg) const {
  if (!(alpha_reg > 0.0) || !std::isfinite(alpha_reg)) throw InputError("alpha_reg must be finite and > 0");
  LDOperator out = *this;
  out.alpha_ = alpha_reg;
  return out;
}

Eigen::VectorXd LDOperator::apply(const Eigen::VectorXd& dv) const {
  if (dv.size() != J0_.rows()) throw InputError("LD: data length does not match the Jacobian");
  Eigen::VectorXd coeff = U_.transpose() * dv;
  for (Index i = 0; i < coeff.size(); ++i) {
    const double s = s_(i);
    coeff(i) = s > 0.0 ? coeff(i) * s / (s * s + alpha_) : 0.0;
  }
  return r_inv_sqrt_.cwiseProduct(V_ * coeff);
}

Eigen::MatrixXd LDOperator::matrix() const {
  Eigen::VectorXd filt(s_.size());
  for (Index i = 0; i < s_.size(); ++i) filt(i) = s_(i) > 0.0 ? s_(i) / (s_(i) * s_(i) + alpha_) : 0.0;
  return r_inv_sqrt_.asDiagonal() * V_ * filt.asDiagonal() * U_.transpose();
}

LDOperator build_ld(const ForwardModel& model, const Eigen::VectorXd& sigma0, double alpha_reg) {
  return LDOperator(model.jacobian(sigma0), sigma0, alpha_reg);
}

Eigen::VectorXd ld_reconstruct(const LDOperator& ld, const Eigen::VectorXd& dv) { return ld.apply(dv); }

Eigen::VectorXd ld_absolute(const LDOperator& ld, const ForwardModel& model, const Eigen::VectorXd& measurements) {
  return ld.sigma0() + ld.apply(measurements - model.measure(ld.sigma0()));
}

AlphaSweep sweep_alpha(const LDOperator& ld, const Eigen::VectorXd& dv, double lo, double hi, int count,
                       const std::function<double(const Eigen::VectorXd&)>& rmse) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw InputError("alpha sweep needs 0 < lo < hi and count >= 2");
  AlphaSweep out;
  std::vector<double> log_res;
  std::vector<double> log_norm;
  for (int i = 0; i < count; ++i) {
    const double a = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    const Eigen::VectorXd delta = ld.with_alpha(a).apply(dv);
    out.alphas.push_back(a);
    if (rmse) {
      out.scores.push_back(rmse(delta));
    } else {
      log_res.push_back(std::log((ld.jacobian() * delta - dv).norm() + 1e-300));
      log_norm.push_back(std::log(delta.norm() + 1e-300));
    }
  }
  if (rmse) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.scores.size(); ++i) {
      if (out.scores[i] < out.scores[best]) best = i;
    }
    out.best = out.alphas[best];
    return out;
  }
  // Curvature of the parametric curve (log_res(t), log_norm(t)) by central differences.
  out.scores.assign(static_cast<std::size_t>(count), 0.0);
  std::size_t best = static_cast<std::size_t>(count / 2);
  double best_kappa = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < static_cast<std::size_t>(count); ++i) {
    const double x1 = 0.5 * (log_res[i + 1] - log_res[i - 1]);
    const double y1 = 0.5 * (log_norm[i + 1] - log_norm[i - 1]);
    const double x2 = log_res[i + 1] - 2 * log_res[i] + log_res[i - 1];
    const double y2 = log_norm[i + 1] - 2 * log_norm[i] + log_norm[i - 1];
    const double denom = std::pow(x1 * x1 + y1 * y1, 1.5);
    const double kappa = denom > 0.0 ? (x1 * y2 - y1 * x2) / denom : 0.0;
    out.scores[i] = kappa;
    if (kappa > best_kappa) {
      best_kappa = kappa;
      best = i;
    }
  }
  out.best = out.alphas[best];
  return out;
}

GNResult gn_l2_reconstruct(const ForwardModel& model, const Eigen::VectorXd& measurements,
                           const Eigen::VectorXd& sigma_init, double weight, int iters) {
  if (!(weight > 0.0)) throw InputError("gn_l2: weight must be positive");
  if (iters < 0) throw InputError("gn_l2: iteration count must be non-negative");
  if (measurements.size() != model.num_measurements()) throw InputError("gn_l2: wrong number of measurements");

  GNResult out;
  out.sigma = sigma_init;
  Linearization lin = model.linearize(out.sigma);
  const double w = weight * lin.jacobian.colwise().squaredNorm().mean();
  auto objective = [&](const Eigen::VectorXd& sigma, const Eigen::VectorXd& res) {
    return 0.5 * res.squaredNorm() + w * (sigma - sigma_init).squaredNorm();
  };
  Eigen::VectorXd r = lin.solution.measurements - measurements;
  double obj = objective(out.sigma, r);
  out.objective_history.push_back(obj);

  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd& J = lin.jacobian;
    // (J^T J + 2w I) delta = -b, solved in the M x M dual form:
    // (J^T J + l I)^-1 b = (b - J^T (J J^T + l I)^-1 J b) / l.
    const double l = 2.0 * w;
    const Eigen::VectorXd b = J.transpose() * r + l * (out.sigma - sigma_init);
    Eigen::MatrixXd K = J * J.transpose();
    K.diagonal().array() += l;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) throw SolverError("gn_l2: normal system is not positive definite");
    const Eigen::VectorXd delta = -(b - J.transpose() * llt.solve(J * b)) / l;

    double t = 1.0;
    bool improved = false;
    Eigen::VectorXd trial;
    Eigen::VectorXd r_trial;
    for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
      trial = out.sigma + t * delta;
      if (trial.minCoeff() <= 0.0) continue;
      r_trial = model.measure(trial) - measurements;
      const double obj_trial = objective(trial, r_trial);
      if (obj_trial < obj) {
        obj = obj_trial;
        improved = true;
        break;
      }
    }
    if (!improved) break;
    out.sigma = trial;
    out.objective_history.push_back(obj);
    out.iterations = it + 1;
    if (it + 1 < iters) {
      lin = model.linearize(out.sigma);
      r = lin.solution.measurements - measurements;
    }
  }
  return out;
}

}  // namespace bcsr
