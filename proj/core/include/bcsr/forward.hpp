#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bcsr/mesh.hpp"
#include "bcsr/protocol.hpp"

namespace bcsr {

/// Result of one forward evaluation.
struct ForwardSolution {
  std::vector<Eigen::VectorXd> potentials;          ///< per injection, nodal phi (length N)
  std::vector<Eigen::VectorXd> electrode_voltages;  ///< per injection, U (length L, zero mean)
  Eigen::VectorXd measurements;                     ///< V (length M)
};

/// Forward solution together with dV/dsigma (M x N) at the same conductivity.
struct Linearization {
  ForwardSolution solution;
  Eigen::MatrixXd jacobian;
};

/// Complete electrode model solved with linear Lagrange elements.
///
/// Unknowns are the nodal potentials and L-1 electrode-voltage coordinates
/// beta with U = C beta, where C spans the zero-sum subspace; the resulting
/// system is symmetric positive definite and is factorised once per
/// conductivity and reused for every current pattern. The conductivity is
/// nodal and linearly interpolated, so the element stiffness is the mean nodal
/// value times the constant-coefficient stiffness.
///
/// The model keeps its own copies of mesh, electrodes and protocol. All
/// member functions are const and re-entrant.
class ForwardModel {
 public:
  ForwardModel(Mesh mesh, ElectrodeLayout layout, StimulationProtocol protocol);

  const Mesh& mesh() const noexcept { return mesh_; }
  const ElectrodeLayout& layout() const noexcept { return layout_; }
  const StimulationProtocol& protocol() const noexcept { return protocol_; }
  Index num_nodes() const noexcept { return mesh_.num_nodes(); }
  Index num_measurements() const noexcept { return protocol_.num_measurements(); }

  /// Throws InputError if sigma has the wrong length or any entry is not
  /// finite and strictly positive; SolverError if the factorisation fails.
  ForwardSolution solve(const Eigen::VectorXd& sigma) const;

  /// Measurements only.
  Eigen::VectorXd measure(const Eigen::VectorXd& sigma) const { return solve(sigma).measurements; }

  /// dV_m / dsigma_n by the adjoint method: one extra solve per distinct
  /// measurement electrode pair, then
  ///   J[m, n] = -sum_{K contains n} |K|/(d+1) grad(phi_drive) . grad(phi_meas).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& sigma) const { return linearize(sigma).jacobian; }

  /// Forward solution and Jacobian sharing one factorisation.
  Linearization linearize(const Eigen::VectorXd& sigma) const;

  /// Currents through each electrode implied by a nodal solution:
  /// I_q = (1/z_q) (|e_q| U_q - integral over e_q of phi).
  Eigen::VectorXd electrode_currents(const Eigen::VectorXd& potential, const Eigen::VectorXd& voltages) const;

 private:
  struct Pattern {
    int a;
    int b;
  };
  struct PatternRef {
    Index pattern;
    double scale;
  };
  struct Fields {
    std::vector<Eigen::VectorXd> potentials;  // per pattern
    std::vector<Eigen::VectorXd> voltages;    // per pattern, length L
  };

  Index pattern_index(int a, int b, double* sign);
  void check_sigma(const Eigen::VectorXd& sigma) const;
  Fields solve_patterns(const Eigen::VectorXd& sigma, Index count) const;
  ForwardSolution assemble_solution(const Fields& fields) const;

  Mesh mesh_;
  ElectrodeLayout layout_;
  StimulationProtocol protocol_;
  int electrodes_;

  // Constant-coefficient element stiffness |K| G G^T, (d+1)^2 entries per element.
  std::vector<double> local_stiffness_;
  // Contact-impedance blocks in the reduced unknowns, independent of sigma.
  std::vector<Eigen::Triplet<double>> electrode_triplets_;
  // Per electrode: nodes on the patch and the integral of each hat function over it.
  std::vector<std::vector<std::pair<Index, double>>> electrode_hat_integrals_;

  std::vector<Pattern> patterns_;            // unit current patterns: +1 into a, -1 out of b
  Index drive_pattern_count_ = 0;            // patterns_[0, drive_pattern_count_) cover the injections
  std::vector<PatternRef> injection_refs_;   // per injection
  std::vector<PatternRef> measurement_refs_; // per measurement
};

/// Free-function forms.
ForwardSolution solve_forward(const Mesh& mesh, const ElectrodeLayout& layout,
                              const StimulationProtocol& protocol, const Eigen::VectorXd& sigma);
Eigen::MatrixXd jacobian(const Mesh& mesh, const ElectrodeLayout& layout, const StimulationProtocol& protocol,
                         const Eigen::VectorXd& sigma);
std::vector<ForwardSolution> solve_forward_batch(const ForwardModel& model,
                                                 const std::vector<Eigen::VectorXd>& sigmas);

}  // namespace bcsr
