#include "bcsr/tv.hpp"

#include <cmath>
#include <vector>

#include "bcsr/errors.hpp"

namespace bcsr {

TVEvaluation tv_value_and_gradient(const Mesh& mesh, const Eigen::VectorXd& sigma, double beta) {
  if (sigma.size() != mesh.num_nodes()) throw InputError("TV: field length does not match mesh");
  if (!(beta >= 0.0)) throw InputError("TV: beta must be non-negative");
  const int d = mesh.dimension();
  const int k = d + 1;
  TVEvaluation out;
  out.gradient = Eigen::VectorXd::Zero(sigma.size());
  Eigen::VectorXd g(d);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto G = mesh.shape_gradients(e);
    g.setZero();
    double gscale = 0.0;
    for (int i = 0; i < k; ++i) {
      const double s = sigma(mesh.elements()(e, i));
      g += s * G.row(i).transpose();
      gscale += std::abs(s) * G.row(i).norm();
    }
    // Rounding leaves a tiny gradient on a constant element; with beta = 0
    // that would still contribute a unit-length direction.
    if (beta == 0.0 && g.norm() <= 1e-13 * gscale) g.setZero();
    const double norm = std::sqrt(g.squaredNorm() + beta * beta);
    const double area = mesh.element_measure(e);
    out.value += area * norm;
    if (norm == 0.0) continue;
    for (int i = 0; i < k; ++i) out.gradient(mesh.elements()(e, i)) += area * G.row(i).dot(g) / norm;
  }
  return out;
}

Eigen::SparseMatrix<double> tv_hessian(const Mesh& mesh, const Eigen::VectorXd& sigma, double beta) {
  if (sigma.size() != mesh.num_nodes()) throw InputError("TV: field length does not match mesh");
  if (!(beta > 0.0)) throw InputError("TV Hessian needs beta > 0");
  const int d = mesh.dimension();
  const int k = d + 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_elements() * k * k));
  Eigen::VectorXd g(d);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto G = mesh.shape_gradients(e);
    g.setZero();
    for (int i = 0; i < k; ++i) g += sigma(mesh.elements()(e, i)) * G.row(i).transpose();
    const double n2 = g.squaredNorm() + beta * beta;
    const double w = mesh.element_measure(e) / std::sqrt(n2);
    const Eigen::VectorXd Gg = G * g;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        trip.emplace_back(mesh.elements()(e, i), mesh.elements()(e, j),
                          w * (G.row(i).dot(G.row(j)) - Gg(i) * Gg(j) / n2));
      }
    }
  }
  Eigen::SparseMatrix<double> out(sigma.size(), sigma.size());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double tv_weight(double snr_db, double lambda0) {
  if (!(lambda0 >= 0.0)) throw InputError("TV weight lambda0 must be non-negative");
  if (snr_db >= 60.0) return lambda0;
  // sqrt(10)^((60 - snr)/10) == 10^((60 - snr)/20)
  return lambda0 * std::pow(10.0, (60.0 - snr_db) / 20.0);
}

}  // namespace bcsr
