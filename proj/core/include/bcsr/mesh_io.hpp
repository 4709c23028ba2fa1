#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "bcsr/mesh.hpp"

namespace bcsr {

enum class MeshFormat { gmsh_msh2, native_json };

MeshFormat parse_mesh_format(std::string_view name);

/// Loads a mesh and its electrodes. Gmsh files carry electrodes as boundary
/// facets whose physical tag is the 1-based electrode number; since MSH 2.2 has
/// no place for contact impedances every electrode gets `default_impedance`.
ElectrodeMesh load_mesh(const std::filesystem::path& path, MeshFormat format,
                        double default_impedance = 0.01);

void save_mesh(const std::filesystem::path& path, const ElectrodeMesh& model, MeshFormat format);

/// Serialises to the native JSON layout (string form, used for hashing and tests).
std::string to_native_json(const ElectrodeMesh& model);
ElectrodeMesh from_native_json(std::string_view text);

/// Writes a VTK legacy ASCII unstructured grid with the given nodal scalars.
void write_vtk(const std::filesystem::path& path, const Mesh& mesh,
               const std::map<std::string, Eigen::VectorXd>& point_data);

}  // namespace bcsr
