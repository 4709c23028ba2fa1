#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "bcsr/errors.hpp"
#include "bcsr/mesh.hpp"

namespace bcsr {
namespace {

// Planar disk layout shared by the 2D and the extruded 3D generator.
struct DiskLayout {
  std::vector<std::array<double, 2>> points;
  std::vector<std::array<int, 3>> triangles;
  // Per sector, the outer-ring node indices bounding the electrode arc (in order).
  std::vector<std::vector<int>> electrode_arcs;
};

// Angles (relative to the sector start) of the outer ring nodes of one sector:
// k_e equal steps across the electrode followed by k_g equal steps across the gap,
// sized so that the electrode chords cover exactly `coverage` of the sector's
// boundary length.
std::vector<double> outer_sector_angles(double sector, int steps, double coverage, int* electrode_steps) {
  int ke = static_cast<int>(std::lround(coverage * steps));
  ke = std::clamp(ke, 1, steps - 1);
  const int kg = steps - ke;
  *electrode_steps = ke;

  auto gap_angle = [&](double te) { return (sector - ke * te) / kg; };
  auto excess = [&](double te) {
    return (1.0 - coverage) * ke * std::sin(0.5 * te) - coverage * kg * std::sin(0.5 * gap_angle(te));
  };
  double lo = 0.0;
  double hi = sector / ke;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-17 * sector) break;
  }
  const double te = 0.5 * (lo + hi);
  const double tg = gap_angle(te);

  std::vector<double> angles(static_cast<std::size_t>(steps + 1));
  for (int j = 0; j <= ke; ++j) angles[static_cast<std::size_t>(j)] = j * te;
  for (int j = 1; j <= kg; ++j) angles[static_cast<std::size_t>(ke + j)] = ke * te + j * tg;
  angles.back() = sector;
  return angles;
}

DiskLayout build_disk(double radius, int n_rings, int n_sectors, double coverage) {
  const int p = std::max(1, static_cast<int>(std::ceil(6.0 / n_sectors)));
  const double sector = 2.0 * std::numbers::pi / n_sectors;

  int ke = 0;
  const std::vector<double> outer = outer_sector_angles(sector, n_rings * p, coverage, &ke);
  // Rotate so that electrode q is centred at angle q * sector.
  const double offset = -0.5 * outer[static_cast<std::size_t>(ke)];

  // Local (within-sector) angles per ring.
  std::vector<std::vector<double>> local(static_cast<std::size_t>(n_rings + 1));
  for (int r = 1; r < n_rings; ++r) {
    const int k = r * p;
    auto& a = local[static_cast<std::size_t>(r)];
    a.resize(static_cast<std::size_t>(k + 1));
    for (int j = 0; j <= k; ++j) a[static_cast<std::size_t>(j)] = sector * j / k;
  }
  local[static_cast<std::size_t>(n_rings)] = outer;

  DiskLayout out;
  out.points.push_back({0.0, 0.0});
  std::vector<int> ring_start(static_cast<std::size_t>(n_rings + 1), 0);
  for (int r = 1; r <= n_rings; ++r) {
    ring_start[static_cast<std::size_t>(r)] = static_cast<int>(out.points.size());
    const int k = r * p;
    const double rad = radius * r / n_rings;
    for (int s = 0; s < n_sectors; ++s) {
      for (int j = 0; j < k; ++j) {
        const double theta = offset + s * sector + local[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
        out.points.push_back({rad * std::cos(theta), rad * std::sin(theta)});
      }
    }
  }
  auto node = [&](int r, int s, int j) {
    const int k = r * p;
    const int count = k * n_sectors;
    return ring_start[static_cast<std::size_t>(r)] + ((s * k + j) % count);
  };

  // Centre fan.
  for (int s = 0; s < n_sectors; ++s) {
    for (int j = 0; j < p; ++j) out.triangles.push_back({0, node(1, s, j), node(1, s, j + 1)});
  }
  // Strips between consecutive rings, merged by angle; identical in every sector.
  for (int r = 1; r < n_rings; ++r) {
    const int kin = r * p;
    const int kout = (r + 1) * p;
    const auto& ain = local[static_cast<std::size_t>(r)];
    const auto& aout = local[static_cast<std::size_t>(r + 1)];
    for (int s = 0; s < n_sectors; ++s) {
      int i = 0;
      int j = 0;
      while (i < kin || j < kout) {
        const bool advance_outer =
            i == kin || (j < kout && aout[static_cast<std::size_t>(j + 1)] <= ain[static_cast<std::size_t>(i + 1)]);
        if (advance_outer) {
          out.triangles.push_back({node(r, s, i), node(r + 1, s, j), node(r + 1, s, j + 1)});
          ++j;
        } else {
          out.triangles.push_back({node(r, s, i), node(r + 1, s, j), node(r, s, i + 1)});
          ++i;
        }
      }
    }
  }
  for (int s = 0; s < n_sectors; ++s) {
    std::vector<int> arc;
    for (int j = 0; j <= ke; ++j) arc.push_back(node(n_rings, s, j));
    out.electrode_arcs.push_back(std::move(arc));
  }
  return out;
}

}  // namespace

ElectrodeMesh generate_disk_mesh(double radius, int n_rings, int n_electrodes, double electrode_coverage,
                                 double contact_impedance) {
  if (!(radius > 0.0)) throw InputError("disk radius must be positive");
  if (n_rings < 2) throw InputError("n_rings must be >= 2, got " + std::to_string(n_rings));
  if (n_electrodes < 2) throw InputError("n_electrodes must be >= 2, got " + std::to_string(n_electrodes));
  if (!(electrode_coverage > 0.0 && electrode_coverage < 1.0)) {
    throw InputError("electrode_coverage must lie in (0, 1)");
  }

  const DiskLayout disk = build_disk(radius, n_rings, n_electrodes, electrode_coverage);
  Eigen::MatrixXd nodes(static_cast<Index>(disk.points.size()), 2);
  for (std::size_t i = 0; i < disk.points.size(); ++i) {
    nodes(static_cast<Index>(i), 0) = disk.points[i][0];
    nodes(static_cast<Index>(i), 1) = disk.points[i][1];
  }
  Eigen::MatrixXi elements(static_cast<Index>(disk.triangles.size()), 3);
  for (std::size_t t = 0; t < disk.triangles.size(); ++t) {
    for (int k = 0; k < 3; ++k) elements(static_cast<Index>(t), k) = disk.triangles[t][static_cast<std::size_t>(k)];
  }
  Mesh mesh(std::move(nodes), std::move(elements));

  std::vector<Electrode> electrodes;
  for (const auto& arc : disk.electrode_arcs) {
    Electrode el;
    el.contact_impedance = contact_impedance;
    for (std::size_t j = 0; j + 1 < arc.size(); ++j) {
      const std::array<int, 2> edge{arc[j], arc[j + 1]};
      const auto f = mesh.find_boundary_facet(edge);
      if (!f) throw ValidationError("internal: electrode edge is not a boundary facet");
      el.facets.push_back(*f);
    }
    electrodes.push_back(std::move(el));
  }
  ElectrodeLayout layout(mesh, std::move(electrodes));
  return {std::move(mesh), std::move(layout)};
}

namespace {

// z levels (bottom to top) with every electrode band edge on a level.
std::vector<double> cylinder_levels(double height, int n_layers, int rings, double electrode_height) {
  const double he = electrode_height > 0.0 ? electrode_height : height / (2.0 * rings);
  if (he * rings >= height) throw InputError("electrode bands do not fit in the cylinder height");
  std::vector<double> breaks{-0.5 * height};
  for (int r = 0; r < rings; ++r) {
    const double zc = -0.5 * height + height * (r + 0.5) / rings;
    for (double z : {zc - 0.5 * he, zc + 0.5 * he}) {
      if (z - breaks.back() > 1e-12 * height) breaks.push_back(z);
    }
  }
  if (0.5 * height - breaks.back() > 1e-12 * height) breaks.push_back(0.5 * height);
  const int segments = static_cast<int>(breaks.size()) - 1;
  if (n_layers < segments) {
    throw InputError("n_layers must be at least " + std::to_string(segments) + " for " + std::to_string(rings) +
                     " electrode ring(s)");
  }
  // One layer per segment, the rest by largest remainder on segment length.
  std::vector<int> count(static_cast<std::size_t>(segments), 1);
  std::vector<double> share(static_cast<std::size_t>(segments));
  const int extra = n_layers - segments;
  int given = 0;
  for (int i = 0; i < segments; ++i) {
    const double exact = extra * (breaks[static_cast<std::size_t>(i + 1)] - breaks[static_cast<std::size_t>(i)]) / height;
    const int whole = static_cast<int>(std::floor(exact));
    count[static_cast<std::size_t>(i)] += whole;
    share[static_cast<std::size_t>(i)] = exact - whole;
    given += whole;
  }
  while (given < extra) {
    const auto best = static_cast<std::size_t>(std::max_element(share.begin(), share.end()) - share.begin());
    ++count[best];
    share[best] = -1.0;
    ++given;
  }
  std::vector<double> zs{breaks.front()};
  for (int i = 0; i < segments; ++i) {
    const double z0 = breaks[static_cast<std::size_t>(i)];
    const double z1 = breaks[static_cast<std::size_t>(i + 1)];
    const int n = count[static_cast<std::size_t>(i)];
    for (int k = 1; k <= n; ++k) zs.push_back(k == n ? z1 : z0 + (z1 - z0) * k / n);
  }
  return zs;
}

}  // namespace

ElectrodeMesh generate_cylinder_mesh(double radius, double height, int n_layers, int rings,
                                     int electrodes_per_ring, const CylinderMeshOptions& options) {
  if (!(radius > 0.0) || !(height > 0.0)) throw InputError("cylinder radius and height must be positive");
  if (rings != 1 && rings != 2 && rings != 4) {
    throw InputError("electrode rings must be 1, 2 or 4, got " + std::to_string(rings));
  }
  if (electrodes_per_ring < 2 && rings * electrodes_per_ring < 2) {
    throw InputError("cylinder needs at least 2 electrodes");
  }
  if (electrodes_per_ring < 1) throw InputError("electrodes_per_ring must be positive");
  if (options.radial_rings < 2) throw InputError("radial_rings must be >= 2");
  if (!(options.electrode_coverage > 0.0 && options.electrode_coverage < 1.0)) {
    throw InputError("electrode_coverage must lie in (0, 1)");
  }

  const int sectors = std::max(electrodes_per_ring, 2);
  const DiskLayout disk = build_disk(radius, options.radial_rings, sectors, options.electrode_coverage);
  const int np = static_cast<int>(disk.points.size());
  const std::vector<double> zs = cylinder_levels(height, n_layers, rings, options.electrode_height);
  const int levels = n_layers + 1;

  Eigen::MatrixXd nodes(static_cast<Index>(np) * levels, 3);
  for (int l = 0; l < levels; ++l) {
    const double z = zs[static_cast<std::size_t>(l)];
    for (int i = 0; i < np; ++i) {
      const Index row = static_cast<Index>(l) * np + i;
      nodes(row, 0) = disk.points[static_cast<std::size_t>(i)][0];
      nodes(row, 1) = disk.points[static_cast<std::size_t>(i)][1];
      nodes(row, 2) = z;
    }
  }

  // Each prism is split into three tetrahedra. The diagonal of every lateral
  // quad runs from the lower-indexed bottom vertex to the higher-indexed top
  // vertex, so neighbouring prisms agree and the mesh is conforming.
  const Index n_tri = static_cast<Index>(disk.triangles.size());
  Eigen::MatrixXi elements(n_tri * n_layers * 3, 4);
  Index e = 0;
  for (int l = 0; l < n_layers; ++l) {
    const int bot = l * np;
    const int top = (l + 1) * np;
    for (const auto& tri : disk.triangles) {
      std::array<int, 3> v = tri;
      std::sort(v.begin(), v.end());
      const std::array<std::array<int, 4>, 3> tets{{
          {bot + v[0], bot + v[1], bot + v[2], top + v[2]},
          {bot + v[0], bot + v[1], top + v[1], top + v[2]},
          {bot + v[0], top + v[0], top + v[1], top + v[2]},
      }};
      for (const auto& t : tets) {
        for (int k = 0; k < 4; ++k) elements(e, k) = t[static_cast<std::size_t>(k)];
        ++e;
      }
    }
  }
  Mesh mesh(std::move(nodes), std::move(elements));

  std::vector<Electrode> electrodes;
  const double he = options.electrode_height > 0.0 ? options.electrode_height : height / (2.0 * rings);
  for (int ring = 0; ring < rings; ++ring) {
    const double zc = -0.5 * height + height * (ring + 0.5) / rings;
    std::vector<int> band;
    for (int l = 0; l < n_layers; ++l) {
      const double zm = 0.5 * (zs[static_cast<std::size_t>(l)] + zs[static_cast<std::size_t>(l + 1)]);
      if (std::abs(zm - zc) < 0.5 * he) band.push_back(l);
    }
    for (int s = 0; s < electrodes_per_ring; ++s) {
      const auto& arc = disk.electrode_arcs[static_cast<std::size_t>(s)];
      Electrode el;
      el.contact_impedance = options.contact_impedance;
      for (int layer : band) {
        const int bot = layer * np;
        const int top = (layer + 1) * np;
        for (std::size_t j = 0; j + 1 < arc.size(); ++j) {
          const int a = std::min(arc[j], arc[j + 1]);
          const int b = std::max(arc[j], arc[j + 1]);
          const std::array<std::array<int, 3>, 2> tris{{{bot + a, bot + b, top + b}, {bot + a, top + a, top + b}}};
          for (const auto& tri : tris) {
            const auto f = mesh.find_boundary_facet(tri);
            if (!f) throw ValidationError("internal: lateral electrode facet not on the boundary");
            el.facets.push_back(*f);
          }
        }
      }
      electrodes.push_back(std::move(el));
    }
  }
  ElectrodeLayout layout(mesh, std::move(electrodes));
  return {std::move(mesh), std::move(layout)};
}

}  // namespace bcsr
