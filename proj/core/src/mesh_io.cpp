#include "bcsr/mesh_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open mesh file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ElectrodeLayout layout_from_facet_nodes(const Mesh& mesh, const std::vector<std::vector<std::vector<int>>>& patches,
                                        const std::vector<double>& impedances) {
  std::vector<Electrode> electrodes;
  for (std::size_t q = 0; q < patches.size(); ++q) {
    Electrode el;
    el.contact_impedance = impedances[q];
    for (std::size_t k = 0; k < patches[q].size(); ++k) {
      const auto& nodes = patches[q][k];
      const auto f = mesh.find_boundary_facet(nodes);
      if (!f) {
        throw ValidationError("electrode " + std::to_string(q + 1) + ": facet " + std::to_string(k) +
                              " is not a boundary facet of the mesh");
      }
      el.facets.push_back(*f);
    }
    electrodes.push_back(std::move(el));
  }
  return ElectrodeLayout(mesh, std::move(electrodes));
}

ElectrodeMesh load_gmsh(const std::string& text, double default_impedance) {
  std::istringstream in(text);
  std::string token;
  std::unordered_map<long, int> node_ids;
  std::vector<std::array<double, 3>> coords;
  struct RawElement {
    long id;
    int type;
    int physical;
    std::vector<long> nodes;
  };
  std::vector<RawElement> raw;
  bool have_format = false;

  while (in >> token) {
    if (token == "$MeshFormat") {
      double version = 0;
      int file_type = -1;
      int data_size = 0;
      in >> version >> file_type >> data_size;
      if (!in || version < 2.0 || version >= 3.0) throw FormatError("gmsh: only MSH 2.x is supported");
      if (file_type != 0) throw FormatError("gmsh: only ASCII files are supported");
      have_format = true;
      in >> token;  // $EndMeshFormat
    } else if (token == "$Nodes") {
      long count = 0;
      in >> count;
      for (long i = 0; i < count; ++i) {
        long id;
        std::array<double, 3> x{};
        in >> id >> x[0] >> x[1] >> x[2];
        if (!in) throw FormatError("gmsh: truncated $Nodes section");
        node_ids[id] = static_cast<int>(coords.size());
        coords.push_back(x);
      }
      in >> token;
      if (token != "$EndNodes") throw FormatError("gmsh: expected $EndNodes");
    } else if (token == "$Elements") {
      long count = 0;
      in >> count;
      for (long i = 0; i < count; ++i) {
        RawElement el{};
        int ntags = 0;
        in >> el.id >> el.type >> ntags;
        std::vector<int> tags(static_cast<std::size_t>(std::max(ntags, 0)));
        for (int& t : tags) in >> t;
        el.physical = tags.empty() ? 0 : tags[0];
        int nn = 0;
        switch (el.type) {
          case 15: nn = 1; break;
          case 1: nn = 2; break;
          case 2: nn = 3; break;
          case 4: nn = 4; break;
          default:
            throw FormatError("gmsh: unsupported element type " + std::to_string(el.type) + " (element " +
                              std::to_string(el.id) + ")");
        }
        el.nodes.resize(static_cast<std::size_t>(nn));
        for (long& v : el.nodes) in >> v;
        if (!in) throw FormatError("gmsh: truncated $Elements section");
        raw.push_back(std::move(el));
      }
      in >> token;
      if (token != "$EndElements") throw FormatError("gmsh: expected $EndElements");
    } else if (token.size() > 1 && token[0] == '$' && token.rfind("$End", 0) != 0) {
      // Skip unknown sections ($PhysicalNames, $NodeData, ...).
      const std::string end = "$End" + token.substr(1);
      while (in >> token && token != end) {
      }
    }
  }
  if (!have_format) throw FormatError("gmsh: missing $MeshFormat");
  if (coords.empty()) throw FormatError("gmsh: no nodes");

  const bool three_d = std::any_of(raw.begin(), raw.end(), [](const RawElement& e) { return e.type == 4; });
  const int dim = three_d ? 3 : 2;
  const int cell_type = three_d ? 4 : 2;
  const int facet_type = three_d ? 2 : 1;

  auto resolve = [&](const RawElement& el) {
    std::vector<int> out;
    for (long v : el.nodes) {
      const auto it = node_ids.find(v);
      if (it == node_ids.end()) {
        throw ValidationError("gmsh: element " + std::to_string(el.id) + " references unknown node " +
                              std::to_string(v));
      }
      out.push_back(it->second);
    }
    return out;
  };

  std::vector<std::vector<int>> cells;
  std::map<int, std::vector<std::vector<int>>> tagged;
  for (const auto& el : raw) {
    if (el.type == cell_type) {
      cells.push_back(resolve(el));
    } else if (el.type == facet_type && el.physical > 0) {
      tagged[el.physical].push_back(resolve(el));
    }
  }
  if (cells.empty()) throw FormatError("gmsh: no triangle or tetrahedron elements");
  if (tagged.empty()) throw ValidationError("gmsh: no electrodes (no boundary facets with a physical group)");
  const int n_electrodes = tagged.rbegin()->first;
  for (int q = 1; q <= n_electrodes; ++q) {
    if (!tagged.count(q)) throw ValidationError("gmsh: electrode physical group " + std::to_string(q) + " missing");
  }

  Eigen::MatrixXd nodes(static_cast<Index>(coords.size()), dim);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int k = 0; k < dim; ++k) nodes(static_cast<Index>(i), k) = coords[i][static_cast<std::size_t>(k)];
  }
  Eigen::MatrixXi elements(static_cast<Index>(cells.size()), dim + 1);
  for (std::size_t e = 0; e < cells.size(); ++e) {
    for (int k = 0; k <= dim; ++k) elements(static_cast<Index>(e), k) = cells[e][static_cast<std::size_t>(k)];
  }
  Mesh mesh(std::move(nodes), std::move(elements));
  std::vector<std::vector<std::vector<int>>> patches;
  for (int q = 1; q <= n_electrodes; ++q) patches.push_back(tagged[q]);
  std::vector<double> z(patches.size(), default_impedance);
  ElectrodeLayout layout = layout_from_facet_nodes(mesh, patches, z);
  return {std::move(mesh), std::move(layout)};
}

std::string to_gmsh(const ElectrodeMesh& model) {
  const Mesh& mesh = model.mesh;
  const int dim = mesh.dimension();
  std::ostringstream out;
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n" << mesh.num_nodes() << "\n";
  for (Index i = 0; i < mesh.num_nodes(); ++i) {
    out << (i + 1);
    for (int k = 0; k < 3; ++k) out << ' ' << (k < dim ? fmt_double(mesh.nodes()(i, k)) : std::string("0"));
    out << '\n';
  }
  out << "$EndNodes\n$Elements\n";
  Index n_facets = 0;
  for (const auto& el : model.layout.electrodes()) n_facets += static_cast<Index>(el.facets.size());
  out << (n_facets + mesh.num_elements()) << '\n';
  long id = 1;
  const int facet_type = dim == 3 ? 2 : 1;
  const int cell_type = dim == 3 ? 4 : 2;
  for (Index q = 0; q < model.layout.size(); ++q) {
    for (Index f : model.layout[q].facets) {
      out << id++ << ' ' << facet_type << " 2 " << (q + 1) << ' ' << (q + 1);
      for (int k = 0; k < dim; ++k) out << ' ' << (mesh.boundary_facets()(f, k) + 1);
      out << '\n';
    }
  }
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    out << id++ << ' ' << cell_type << " 2 100 100";
    for (int k = 0; k <= dim; ++k) out << ' ' << (mesh.elements()(e, k) + 1);
    out << '\n';
  }
  out << "$EndElements\n";
  return out.str();
}

}  // namespace

MeshFormat parse_mesh_format(std::string_view name) {
  if (name == "gmsh_msh2" || name == "gmsh" || name == "msh") return MeshFormat::gmsh_msh2;
  if (name == "native_json" || name == "json") return MeshFormat::native_json;
  throw InputError("unknown mesh format '" + std::string(name) + "'");
}

std::string to_native_json(const ElectrodeMesh& model) {
  const Mesh& mesh = model.mesh;
  json j;
  j["dimension"] = mesh.dimension();
  json nodes = json::array();
  for (Index i = 0; i < mesh.num_nodes(); ++i) {
    json row = json::array();
    for (int k = 0; k < mesh.dimension(); ++k) row.push_back(mesh.nodes()(i, k));
    nodes.push_back(std::move(row));
  }
  j["nodes"] = std::move(nodes);
  json elements = json::array();
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    json row = json::array();
    for (int k = 0; k <= mesh.dimension(); ++k) row.push_back(mesh.elements()(e, k));
    elements.push_back(std::move(row));
  }
  j["elements"] = std::move(elements);
  json electrodes = json::array();
  for (const auto& el : model.layout.electrodes()) {
    json facets = json::array();
    for (Index f : el.facets) {
      json row = json::array();
      for (int k = 0; k < mesh.dimension(); ++k) row.push_back(mesh.boundary_facets()(f, k));
      facets.push_back(std::move(row));
    }
    electrodes.push_back({{"facets", std::move(facets)}, {"z", el.contact_impedance}});
  }
  j["electrodes"] = std::move(electrodes);
  return j.dump();
}

ElectrodeMesh from_native_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("mesh json: ") + e.what());
  }
  try {
    const int dim = j.at("dimension").get<int>();
    if (dim != 2 && dim != 3) throw FormatError("mesh json: dimension must be 2 or 3");
    const auto& jn = j.at("nodes");
    const auto& je = j.at("elements");
    Eigen::MatrixXd nodes(static_cast<Index>(jn.size()), dim);
    for (std::size_t i = 0; i < jn.size(); ++i) {
      if (jn[i].size() != static_cast<std::size_t>(dim)) {
        throw FormatError("mesh json: node " + std::to_string(i) + " has wrong coordinate count");
      }
      for (int k = 0; k < dim; ++k) nodes(static_cast<Index>(i), k) = jn[i][static_cast<std::size_t>(k)].get<double>();
    }
    Eigen::MatrixXi elements(static_cast<Index>(je.size()), dim + 1);
    for (std::size_t e = 0; e < je.size(); ++e) {
      if (je[e].size() != static_cast<std::size_t>(dim + 1)) {
        throw FormatError("mesh json: element " + std::to_string(e) + " has wrong node count");
      }
      for (int k = 0; k <= dim; ++k) elements(static_cast<Index>(e), k) = je[e][static_cast<std::size_t>(k)].get<int>();
    }
    Mesh mesh(std::move(nodes), std::move(elements));
    std::vector<std::vector<std::vector<int>>> patches;
    std::vector<double> z;
    for (const auto& el : j.at("electrodes")) {
      patches.push_back(el.at("facets").get<std::vector<std::vector<int>>>());
      z.push_back(el.at("z").get<double>());
    }
    if (patches.empty()) throw ValidationError("mesh json: no electrodes");
    ElectrodeLayout layout = layout_from_facet_nodes(mesh, patches, z);
    return {std::move(mesh), std::move(layout)};
  } catch (const json::exception& e) {
    throw FormatError(std::string("mesh json: ") + e.what());
  }
}

ElectrodeMesh load_mesh(const std::filesystem::path& path, MeshFormat format, double default_impedance) {
  const std::string text = read_file(path);
  return format == MeshFormat::gmsh_msh2 ? load_gmsh(text, default_impedance) : from_native_json(text);
}

void save_mesh(const std::filesystem::path& path, const ElectrodeMesh& model, MeshFormat format) {
  auto out = open_out(path);
  out << (format == MeshFormat::gmsh_msh2 ? to_gmsh(model) : to_native_json(model));
}

void write_vtk(const std::filesystem::path& path, const Mesh& mesh,
               const std::map<std::string, Eigen::VectorXd>& point_data) {
  auto out = open_out(path);
  const int dim = mesh.dimension();
  out << "# vtk DataFile Version 3.0\nbcsr mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (Index i = 0; i < mesh.num_nodes(); ++i) {
    out << fmt_double(mesh.nodes()(i, 0)) << ' ' << fmt_double(mesh.nodes()(i, 1)) << ' '
        << (dim == 3 ? fmt_double(mesh.nodes()(i, 2)) : std::string("0")) << '\n';
  }
  const Index ne = mesh.num_elements();
  out << "CELLS " << ne << ' ' << ne * (dim + 2) << '\n';
  for (Index e = 0; e < ne; ++e) {
    out << (dim + 1);
    for (int k = 0; k <= dim; ++k) out << ' ' << mesh.elements()(e, k);
    out << '\n';
  }
  out << "CELL_TYPES " << ne << '\n';
  for (Index e = 0; e < ne; ++e) out << (dim == 3 ? 10 : 5) << '\n';
  if (!point_data.empty()) out << "POINT_DATA " << mesh.num_nodes() << '\n';
  for (const auto& [name, values] : point_data) {
    if (values.size() != mesh.num_nodes()) throw InputError("vtk: field '" + name + "' has wrong length");
    std::string clean = name;
    std::replace(clean.begin(), clean.end(), ' ', '_');
    out << "SCALARS " << clean << " double 1\nLOOKUP_TABLE default\n";
    for (Index i = 0; i < values.size(); ++i) out << fmt_double(values(i)) << '\n';
  }
}

}  // namespace bcsr
