#pragma once
// Reference implementations used as test oracles. They share no code with the
// library beyond the mesh containers: geometry, assembly and solves are redone
// here in the most direct (dense) form.

#include <vector>

#include <Eigen/Dense>

#include "bcsr/mesh.hpp"
#include "bcsr/protocol.hpp"

namespace oracle {

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Simplex measure from the raw coordinates (area or volume, unsigned).
long double simplex_measure(const Eigen::MatrixXd& pts);

/// Full CEM saddle system in long double: unknowns (phi, U, lambda) with the
/// constraint sum U = 0. Returns U for the given electrode current vector.
VectorL cem_voltages(const bcsr::Mesh& mesh, const bcsr::ElectrodeLayout& layout, const Eigen::VectorXd& sigma,
                     const Eigen::VectorXd& currents);

/// Measurements V of the protocol computed with cem_voltages.
VectorL cem_measure(const bcsr::Mesh& mesh, const bcsr::ElectrodeLayout& layout,
                    const bcsr::StimulationProtocol& protocol, const Eigen::VectorXd& sigma);

/// Dense graph Laplacian D - W from element edges.
Eigen::MatrixXd dense_laplacian(const bcsr::Mesh& mesh);

}  // namespace oracle
