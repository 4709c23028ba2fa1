#include "bcsr/forward.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Consistent mass matrix of a linear facet (segment or triangle) divided by its measure.
double facet_mass_ratio(int dim, int i, int j) {
  if (dim == 2) return i == j ? 1.0 / 3.0 : 1.0 / 6.0;
  return i == j ? 1.0 / 6.0 : 1.0 / 12.0;
}

}  // namespace

ForwardModel::ForwardModel(Mesh mesh, ElectrodeLayout layout, StimulationProtocol protocol)
    : mesh_(std::move(mesh)),
      layout_(std::move(layout)),
      protocol_(std::move(protocol)),
      electrodes_(static_cast<int>(layout_.size())) {
  if (protocol_.electrode_count() != electrodes_) {
    throw InputError("protocol addresses " + std::to_string(protocol_.electrode_count()) +
                     " electrodes but the layout has " + std::to_string(electrodes_));
  }
  const int d = mesh_.dimension();
  const int k = d + 1;
  const Index ne = mesh_.num_elements();
  const Index n = mesh_.num_nodes();
  const int L = electrodes_;

  local_stiffness_.resize(static_cast<std::size_t>(ne * k * k));
  for (Index e = 0; e < ne; ++e) {
    const auto G = mesh_.shape_gradients(e);
    Eigen::Map<Eigen::MatrixXd> Ke(local_stiffness_.data() + e * k * k, k, k);
    Ke = mesh_.element_measure(e) * (G * G.transpose());
  }

  // Full-space electrode blocks: A_Z (N x N), A_W (N x L), A_D (L diagonal).
  // Reduced with U = C beta, C = [1 ... 1; -I]: (A_W C)(i, k) = A_W(i, 0) - A_W(i, k+1),
  // (C^T A_D C)(k, l) = A_D(0) + delta_kl A_D(k+1).
  electrode_hat_integrals_.resize(static_cast<std::size_t>(L));
  Eigen::VectorXd AD(L);
  for (int q = 0; q < L; ++q) {
    const Electrode& el = layout_[q];
    const double inv_z = 1.0 / el.contact_impedance;
    std::map<Index, double> hat;
    for (Index f : el.facets) {
      const double area = mesh_.facet_measure(f);
      for (int i = 0; i < d; ++i) {
        const Index vi = mesh_.boundary_facets()(f, i);
        hat[vi] += area / d;
        for (int j = 0; j < d; ++j) {
          const Index vj = mesh_.boundary_facets()(f, j);
          electrode_triplets_.emplace_back(vi, vj, inv_z * area * facet_mass_ratio(d, i, j));
        }
      }
    }
    auto& integrals = electrode_hat_integrals_[static_cast<std::size_t>(q)];
    integrals.assign(hat.begin(), hat.end());
    AD(q) = layout_.area(q) * inv_z;
  }
  for (int q = 0; q < L; ++q) {
    const double inv_z = 1.0 / layout_[q].contact_impedance;
    for (const auto& [node, integral] : electrode_hat_integrals_[static_cast<std::size_t>(q)]) {
      const double aw = -inv_z * integral;  // A_W(node, q)
      if (q == 0) {
        for (int kk = 0; kk < L - 1; ++kk) {
          electrode_triplets_.emplace_back(node, n + kk, aw);
          electrode_triplets_.emplace_back(n + kk, node, aw);
        }
      } else {
        electrode_triplets_.emplace_back(node, n + q - 1, -aw);
        electrode_triplets_.emplace_back(n + q - 1, node, -aw);
      }
    }
  }
  for (int a = 0; a < L - 1; ++a) {
    for (int b = 0; b < L - 1; ++b) {
      electrode_triplets_.emplace_back(n + a, n + b, AD(0) + (a == b ? AD(a + 1) : 0.0));
    }
  }

  // Unit current patterns: drive pairs first, then any extra measurement pairs.
  for (const auto& inj : protocol_.injections()) {
    double sign = 1.0;
    const Index p = pattern_index(inj.source, inj.sink, &sign);
    injection_refs_.push_back({p, sign * inj.amplitude});
  }
  drive_pattern_count_ = static_cast<Index>(patterns_.size());
  for (const auto& meas : protocol_.measurements()) {
    double sign = 1.0;
    const Index p = pattern_index(meas.positive, meas.negative, &sign);
    measurement_refs_.push_back({p, sign});
  }
}

Index ForwardModel::pattern_index(int a, int b, double* sign) {
  *sign = a < b ? 1.0 : -1.0;
  const int lo = std::min(a, b);
  const int hi = std::max(a, b);
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    if (patterns_[i].a == lo && patterns_[i].b == hi) return static_cast<Index>(i);
  }
  patterns_.push_back({lo, hi});
  return static_cast<Index>(patterns_.size()) - 1;
}

void ForwardModel::check_sigma(const Eigen::VectorXd& sigma) const {
  if (sigma.size() != mesh_.num_nodes()) {
    throw InputError("conductivity has length " + std::to_string(sigma.size()) + ", mesh has " +
                     std::to_string(mesh_.num_nodes()) + " nodes");
  }
  for (Index i = 0; i < sigma.size(); ++i) {
    if (!std::isfinite(sigma(i)) || !(sigma(i) > 0.0)) {
      std::ostringstream msg;
      msg << "conductivity at node " << i << " is " << sigma(i) << "; must be finite and > 0";
      throw InputError(msg.str());
    }
  }
}

ForwardModel::Fields ForwardModel::solve_patterns(const Eigen::VectorXd& sigma, Index count) const {
  check_sigma(sigma);
  const int d = mesh_.dimension();
  const int k = d + 1;
  const Index n = mesh_.num_nodes();
  const int L = electrodes_;
  const Index dofs = n + L - 1;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh_.num_elements() * k * k) + electrode_triplets_.size());
  for (Index e = 0; e < mesh_.num_elements(); ++e) {
    double mean = 0.0;
    for (int i = 0; i < k; ++i) mean += sigma(mesh_.elements()(e, i));
    mean /= k;
    const double* Ke = local_stiffness_.data() + e * k * k;
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) {
        triplets.emplace_back(mesh_.elements()(e, i), mesh_.elements()(e, j), mean * Ke[i + j * k]);
      }
    }
  }
  triplets.insert(triplets.end(), electrode_triplets_.begin(), electrode_triplets_.end());
  SpMat A(dofs, dofs);
  A.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> llt(A);
  if (llt.info() != Eigen::Success) {
    throw SolverError("forward system factorisation failed (matrix not positive definite)");
  }
  {
    const Eigen::VectorXd diag = SpMat(llt.matrixL()).diagonal();
    const double ratio = diag.minCoeff() / diag.maxCoeff();
    if (!(ratio > 1e-12)) {
      std::ostringstream msg;
      msg << "forward system numerically singular: min/max Cholesky pivot ratio " << ratio;
      throw SolverError(msg.str());
    }
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dofs, count);
  for (Index p = 0; p < count; ++p) {
    const auto& pat = patterns_[static_cast<std::size_t>(p)];
    // (C^T I)_k = I_0 - I_{k+1} for I = e_a - e_b.
    Eigen::VectorXd I = Eigen::VectorXd::Zero(L);
    I(pat.a) += 1.0;
    I(pat.b) -= 1.0;
    for (int kk = 0; kk < L - 1; ++kk) rhs(n + kk, p) = I(0) - I(kk + 1);
  }
  Eigen::MatrixXd x = llt.solve(rhs);
  x += llt.solve(rhs - A * x);  // one step of iterative refinement
  if (!x.allFinite()) throw SolverError("forward solve produced non-finite values");

  Fields fields;
  for (Index p = 0; p < count; ++p) {
    fields.potentials.push_back(x.col(p).head(n));
    Eigen::VectorXd U(L);
    const auto beta = x.col(p).tail(L - 1);
    U(0) = beta.sum();
    U.tail(L - 1) = -beta;
    fields.voltages.push_back(std::move(U));
  }
  return fields;
}

ForwardSolution ForwardModel::assemble_solution(const Fields& fields) const {
  ForwardSolution sol;
  for (const auto& ref : injection_refs_) {
    sol.potentials.push_back(ref.scale * fields.potentials[static_cast<std::size_t>(ref.pattern)]);
    sol.electrode_voltages.push_back(ref.scale * fields.voltages[static_cast<std::size_t>(ref.pattern)]);
  }
  sol.measurements = measurement_operator(protocol_, sol.electrode_voltages);
  return sol;
}

ForwardSolution ForwardModel::solve(const Eigen::VectorXd& sigma) const {
  return assemble_solution(solve_patterns(sigma, drive_pattern_count_));
}

Linearization ForwardModel::linearize(const Eigen::VectorXd& sigma) const {
  const Fields fields = solve_patterns(sigma, static_cast<Index>(patterns_.size()));
  Linearization out;
  out.solution = assemble_solution(fields);

  const int d = mesh_.dimension();
  const int k = d + 1;
  const Index ne = mesh_.num_elements();
  // Element-wise gradients of every unit field: column e holds grad(u_p) on element e.
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(patterns_.size());
  for (const auto& phi : fields.potentials) {
    Eigen::MatrixXd g(d, ne);
    for (Index e = 0; e < ne; ++e) {
      const auto G = mesh_.shape_gradients(e);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < k; ++i) acc += phi(mesh_.elements()(e, i)) * G.row(i).transpose();
      g.col(e) = acc;
    }
    grads.push_back(std::move(g));
  }
  Eigen::VectorXd weight(ne);
  for (Index e = 0; e < ne; ++e) weight(e) = mesh_.element_measure(e) / k;

  const Index M = protocol_.num_measurements();
  out.jacobian = Eigen::MatrixXd::Zero(M, mesh_.num_nodes());
  for (Index m = 0; m < M; ++m) {
    const auto& meas = protocol_.measurements()[static_cast<std::size_t>(m)];
    const PatternRef drive = injection_refs_[static_cast<std::size_t>(meas.injection)];
    const PatternRef adj = measurement_refs_[static_cast<std::size_t>(m)];
    const Eigen::MatrixXd& gd = grads[static_cast<std::size_t>(drive.pattern)];
    const Eigen::MatrixXd& ga = grads[static_cast<std::size_t>(adj.pattern)];
    const double scale = -drive.scale * adj.scale;
    auto row = out.jacobian.row(m);
    for (Index e = 0; e < ne; ++e) {
      const double w = scale * weight(e) * gd.col(e).dot(ga.col(e));
      for (int i = 0; i < k; ++i) row(mesh_.elements()(e, i)) += w;
    }
  }
  return out;
}

Eigen::VectorXd ForwardModel::electrode_currents(const Eigen::VectorXd& potential,
                                                 const Eigen::VectorXd& voltages) const {
  Eigen::VectorXd I(electrodes_);
  for (int q = 0; q < electrodes_; ++q) {
    double integral = 0.0;
    for (const auto& [node, hat] : electrode_hat_integrals_[static_cast<std::size_t>(q)]) {
      integral += hat * potential(node);
    }
    I(q) = (layout_.area(q) * voltages(q) - integral) / layout_[q].contact_impedance;
  }
  return I;
}

ForwardSolution solve_forward(const Mesh& mesh, const ElectrodeLayout& layout, const StimulationProtocol& protocol,
                              const Eigen::VectorXd& sigma) {
  return ForwardModel(mesh, layout, protocol).solve(sigma);
}

Eigen::MatrixXd jacobian(const Mesh& mesh, const ElectrodeLayout& layout, const StimulationProtocol& protocol,
                         const Eigen::VectorXd& sigma) {
  return ForwardModel(mesh, layout, protocol).jacobian(sigma);
}

std::vector<ForwardSolution> solve_forward_batch(const ForwardModel& model, const std::vector<Eigen::VectorXd>& sigmas) {
  std::vector<ForwardSolution> out;
  out.reserve(sigmas.size());
  for (const auto& s : sigmas) out.push_back(model.solve(s));
  return out;
}

}  // namespace bcsr
