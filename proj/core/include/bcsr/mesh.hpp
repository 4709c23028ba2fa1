#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bcsr {

using Index = Eigen::Index;

/// Unstructured linear simplicial mesh (triangles in 2D, tetrahedra in 3D).
///
/// The constructor validates the input, flips negatively oriented simplices,
/// derives the boundary facets and caches per-element measures and the
/// gradients of the barycentric hat functions. The object is immutable
/// afterwards and safe to share between threads.
class Mesh {
 public:
  /// `nodes` is N x d, `elements` is E x (d+1) with zero-based node indices.
  /// Throws ValidationError naming the offending element on invalid input.
  Mesh(Eigen::MatrixXd nodes, Eigen::MatrixXi elements);

  int dimension() const noexcept { return dim_; }
  Index num_nodes() const noexcept { return nodes_.rows(); }
  Index num_elements() const noexcept { return elements_.rows(); }
  Index num_boundary_facets() const noexcept { return facets_.rows(); }

  const Eigen::MatrixXd& nodes() const noexcept { return nodes_; }
  const Eigen::MatrixXi& elements() const noexcept { return elements_; }
  /// F x d node tuples of the boundary facets (edges in 2D, triangles in 3D).
  const Eigen::MatrixXi& boundary_facets() const noexcept { return facets_; }
  /// Element owning boundary facet `f`.
  Index facet_owner(Index f) const { return facet_owner_[static_cast<std::size_t>(f)]; }

  double element_measure(Index e) const { return measures_(e); }
  const Eigen::VectorXd& element_measures() const noexcept { return measures_; }
  double facet_measure(Index f) const { return facet_measures_(f); }
  const Eigen::VectorXd& facet_measures() const noexcept { return facet_measures_; }
  double domain_measure() const noexcept { return measures_.sum(); }
  double boundary_measure() const noexcept { return facet_measures_.sum(); }

  /// (d+1) x d matrix; row i is the constant gradient of hat function i on `e`.
  Eigen::Map<const Eigen::MatrixXd> shape_gradients(Index e) const {
    const Index k = dim_ + 1;
    return {gradients_.data() + e * k * dim_, k, dim_};
  }

  Eigen::VectorXd element_centroid(Index e) const;

  /// Boundary facet index for an unordered node tuple, if it is one.
  std::optional<Index> find_boundary_facet(std::span<const int> facet_nodes) const;

  /// 64-bit hash of the sorted node coordinates and element arrays.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  /// Axis-aligned bounding box of the nodes (rows: min, max).
  Eigen::Matrix<double, 2, Eigen::Dynamic> bounding_box() const;

  /// Nodal field sampled element-wise: mean of the element's node values.
  Eigen::VectorXd element_means(const Eigen::VectorXd& nodal) const;

 private:
  void validate_and_orient();
  void build_boundary();
  void check_connected() const;
  void compute_fingerprint();

  int dim_ = 0;
  Eigen::MatrixXd nodes_;
  Eigen::MatrixXi elements_;
  Eigen::MatrixXi facets_;
  std::vector<Index> facet_owner_;
  Eigen::VectorXd measures_;
  Eigen::VectorXd facet_measures_;
  std::vector<double> gradients_;
  std::vector<std::vector<Index>> node_facets_;
  std::uint64_t fingerprint_ = 0;
};

/// One electrode: a facet-connected set of boundary facets.
struct Electrode {
  std::vector<Index> facets;
  double contact_impedance = 0.01;
};

/// Electrodes attached to the boundary of a particular mesh.
class ElectrodeLayout {
 public:
  /// Validates against `mesh`: L >= 2, every patch non-empty, facet-connected,
  /// pairwise disjoint, and every contact impedance strictly positive.
  ElectrodeLayout(const Mesh& mesh, std::vector<Electrode> electrodes);

  Index size() const noexcept { return static_cast<Index>(electrodes_.size()); }
  const Electrode& operator[](Index q) const { return electrodes_[static_cast<std::size_t>(q)]; }
  const std::vector<Electrode>& electrodes() const noexcept { return electrodes_; }

  /// Total facet measure of electrode `q`.
  double area(Index q) const { return areas_[static_cast<std::size_t>(q)]; }
  double total_area() const noexcept;

  /// Copy with every contact impedance multiplied by `factor`.
  ElectrodeLayout scaled_impedances(double factor) const;
  /// Copy with every contact impedance set to `z`.
  ElectrodeLayout with_impedance(double z) const;

 private:
  ElectrodeLayout() = default;
  std::vector<Electrode> electrodes_;
  std::vector<double> areas_;
};

/// A mesh together with its electrodes; what the generators and loaders return.
struct ElectrodeMesh {
  Mesh mesh;
  ElectrodeLayout layout;
};

/// Triangulated disk centred at the origin. Ring r (1..n_rings) carries
/// r * p * n_electrodes nodes (p = ceil(6 / n_electrodes)), so node count grows
/// quadratically with n_rings and the mesh is invariant under rotation by
/// 2*pi / n_electrodes. Electrode q is centred at angle 2*pi*q / n_electrodes
/// and covers `electrode_coverage` of its sector's boundary length exactly.
ElectrodeMesh generate_disk_mesh(double radius, int n_rings, int n_electrodes,
                                 double electrode_coverage, double contact_impedance = 0.01);

struct CylinderMeshOptions {
  int radial_rings = 8;            ///< rings of the cross-section disk
  double electrode_coverage = 0.5; ///< angular coverage per electrode sector
  double contact_impedance = 0.01;
  double electrode_height = 0.0;   ///< 0: height / (2 * rings)
};

/// Tetrahedral cylinder of the given radius spanning z in [-height/2, height/2],
/// built by extruding a disk through `n_layers` layers. `rings` electrode rings
/// (1, 2 or 4) are centred at z = -height/2 + height * (ring + 1/2) / rings, each
/// a band of `electrode_height`. Layer levels are spread uniformly within the
/// bands and the gaps between them (at least one layer each, so n_layers must be
/// at least the number of such segments), which makes the electrode geometry
/// independent of the layer count. Electrodes are numbered ring-major,
/// counter-clockwise within a ring.
ElectrodeMesh generate_cylinder_mesh(double radius, double height, int n_layers, int rings,
                                     int electrodes_per_ring,
                                     const CylinderMeshOptions& options = {});

}  // namespace bcsr
