#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bcsr/mesh.hpp"

namespace bcsr {

struct TVEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;  ///< d value / d sigma_n
};

/// Smoothed isotropic total variation of the linear interpolant,
///   TV(sigma) = sum_K |K| sqrt(|grad sigma|_K^2 + beta^2),
/// with its gradient with respect to the nodal values. beta >= 0; with
/// beta = 0 the gradient is taken as zero on elements where grad sigma = 0.
TVEvaluation tv_value_and_gradient(const Mesh& mesh, const Eigen::VectorXd& sigma, double beta);

/// Hessian of TV with respect to the nodal values,
///   sum_K |K| / n_K (G_K G_K^T - (G_K g_K)(G_K g_K)^T / n_K^2),  n_K = sqrt(|g_K|^2 + beta^2).
/// Symmetric positive semi-definite for beta > 0.
Eigen::SparseMatrix<double> tv_hessian(const Mesh& mesh, const Eigen::VectorXd& sigma, double beta);

/// SNR-adaptive TV weight: lambda0 for snr >= 60 dB, else
/// lambda0 * sqrt(10)^((60 - snr) / 10). An infinite SNR gives lambda0.
double tv_weight(double snr_db, double lambda0);

}  // namespace bcsr
