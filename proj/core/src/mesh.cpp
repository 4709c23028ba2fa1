#include "bcsr/mesh.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t value) {
  for (int b = 0; b < 8; ++b) {
    h ^= (value >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
}

double factorial(int d) { return d == 2 ? 2.0 : 6.0; }

struct FaceKey {
  std::array<int, 3> nodes{-1, -1, -1};
  Index element = 0;
  int local = 0;  // local index of the vertex opposite to the face
};

}  // namespace

Mesh::Mesh(Eigen::MatrixXd nodes, Eigen::MatrixXi elements)
    : dim_(static_cast<int>(nodes.cols())), nodes_(std::move(nodes)), elements_(std::move(elements)) {
  if (dim_ != 2 && dim_ != 3) {
    throw ValidationError("mesh dimension must be 2 or 3, got " + std::to_string(dim_));
  }
  if (elements_.rows() == 0) throw ValidationError("mesh has no elements");
  if (elements_.cols() != dim_ + 1) {
    throw ValidationError("elements must have " + std::to_string(dim_ + 1) + " nodes in " +
                          std::to_string(dim_) + "D");
  }
  validate_and_orient();
  build_boundary();
  check_connected();
  compute_fingerprint();
}

void Mesh::validate_and_orient() {
  const Index n = num_nodes();
  const Index ne = num_elements();
  for (Index e = 0; e < ne; ++e) {
    for (int k = 0; k <= dim_; ++k) {
      const int v = elements_(e, k);
      if (v < 0 || v >= n) {
        std::ostringstream msg;
        msg << "element " << e << " references node " << v << " outside [0, " << n << ")";
        throw ValidationError(msg.str());
      }
    }
  }
  if (!nodes_.allFinite()) throw ValidationError("mesh node coordinates must be finite");

  const auto box = bounding_box();
  const double extent = (box.row(1) - box.row(0)).maxCoeff();
  const double min_measure = 1e-14 * std::pow(extent, dim_);

  measures_.resize(ne);
  gradients_.assign(static_cast<std::size_t>(ne * (dim_ + 1) * dim_), 0.0);
  Eigen::MatrixXd edges(dim_, dim_);
  for (Index e = 0; e < ne; ++e) {
    for (int k = 0; k < dim_; ++k) {
      edges.col(k) = (nodes_.row(elements_(e, k + 1)) - nodes_.row(elements_(e, 0))).transpose();
    }
    double det = edges.determinant();
    if (det < 0) {
      std::swap(elements_(e, dim_ - 1), elements_(e, dim_));
      edges.col(dim_ - 2).swap(edges.col(dim_ - 1));
      det = -det;
    }
    const double measure = det / factorial(dim_);
    if (!(measure > min_measure)) {
      std::ostringstream msg;
      msg << "element " << e << " is degenerate (measure " << measure << ")";
      throw ValidationError(msg.str());
    }
    measures_(e) = measure;
    const Eigen::MatrixXd inv = edges.inverse();  // rows are gradients of lambda_1..lambda_d
    double* g = gradients_.data() + e * (dim_ + 1) * dim_;
    Eigen::Map<Eigen::MatrixXd> grad(g, dim_ + 1, dim_);
    grad.bottomRows(dim_) = inv;
    grad.row(0) = -inv.colwise().sum();
  }
}

void Mesh::build_boundary() {
  const Index ne = num_elements();
  std::vector<FaceKey> faces;
  faces.reserve(static_cast<std::size_t>(ne * (dim_ + 1)));
  for (Index e = 0; e < ne; ++e) {
    for (int opp = 0; opp <= dim_; ++opp) {
      FaceKey key;
      key.element = e;
      key.local = opp;
      int j = 0;
      for (int k = 0; k <= dim_; ++k) {
        if (k != opp) key.nodes[static_cast<std::size_t>(j++)] = elements_(e, k);
      }
      std::sort(key.nodes.begin(), key.nodes.begin() + dim_);
      faces.push_back(key);
    }
  }
  std::sort(faces.begin(), faces.end(), [](const FaceKey& a, const FaceKey& b) {
    return std::tie(a.nodes, a.element) < std::tie(b.nodes, b.element);
  });

  std::vector<const FaceKey*> boundary;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i + 1;
    while (j < faces.size() && faces[j].nodes == faces[i].nodes) ++j;
    if (j - i == 1) {
      boundary.push_back(&faces[i]);
    } else if (j - i > 2) {
      std::ostringstream msg;
      msg << "facet of element " << faces[i].element << " is shared by " << (j - i)
          << " elements (non-manifold mesh)";
      throw ValidationError(msg.str());
    }
    i = j;
  }
  if (boundary.empty()) throw ValidationError("mesh has no boundary facets");

  const Index nf = static_cast<Index>(boundary.size());
  facets_.resize(nf, dim_);
  facet_owner_.resize(static_cast<std::size_t>(nf));
  facet_measures_.resize(nf);
  node_facets_.assign(static_cast<std::size_t>(num_nodes()), {});
  for (Index f = 0; f < nf; ++f) {
    const FaceKey& key = *boundary[static_cast<std::size_t>(f)];
    for (int k = 0; k < dim_; ++k) {
      facets_(f, k) = key.nodes[static_cast<std::size_t>(k)];
      node_facets_[static_cast<std::size_t>(key.nodes[static_cast<std::size_t>(k)])].push_back(f);
    }
    facet_owner_[static_cast<std::size_t>(f)] = key.element;
    if (dim_ == 2) {
      facet_measures_(f) = (nodes_.row(facets_(f, 1)) - nodes_.row(facets_(f, 0))).norm();
    } else {
      const Eigen::Vector3d a = (nodes_.row(facets_(f, 1)) - nodes_.row(facets_(f, 0))).transpose();
      const Eigen::Vector3d b = (nodes_.row(facets_(f, 2)) - nodes_.row(facets_(f, 0))).transpose();
      facet_measures_(f) = 0.5 * a.cross(b).norm();
    }
  }
}

void Mesh::check_connected() const {
  const Index n = num_nodes();
  std::vector<std::vector<Index>> node_elements(static_cast<std::size_t>(n));
  for (Index e = 0; e < num_elements(); ++e) {
    for (int k = 0; k <= dim_; ++k) node_elements[static_cast<std::size_t>(elements_(e, k))].push_back(e);
  }
  for (Index v = 0; v < n; ++v) {
    if (node_elements[static_cast<std::size_t>(v)].empty()) {
      throw ValidationError("node " + std::to_string(v) + " is not referenced by any element");
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Index> queue;
  queue.push(0);
  seen[0] = 1;
  Index visited = 1;
  while (!queue.empty()) {
    const Index v = queue.front();
    queue.pop();
    for (Index e : node_elements[static_cast<std::size_t>(v)]) {
      for (int k = 0; k <= dim_; ++k) {
        const auto w = static_cast<std::size_t>(elements_(e, k));
        if (!seen[w]) {
          seen[w] = 1;
          ++visited;
          queue.push(static_cast<Index>(w));
        }
      }
    }
  }
  if (visited != n) {
    throw ValidationError("mesh node graph is disconnected (" + std::to_string(visited) + " of " +
                          std::to_string(n) + " nodes reachable from node 0)");
  }
}

void Mesh::compute_fingerprint() {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, static_cast<std::uint64_t>(dim_));
  std::vector<Index> order(static_cast<std::size_t>(num_nodes()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (int k = 0; k < dim_; ++k) {
      if (nodes_(a, k) != nodes_(b, k)) return nodes_(a, k) < nodes_(b, k);
    }
    return a < b;
  });
  for (Index v : order) {
    for (int k = 0; k < dim_; ++k) fnv_mix(h, std::bit_cast<std::uint64_t>(nodes_(v, k)));
  }
  std::vector<std::array<int, 4>> elems(static_cast<std::size_t>(num_elements()));
  for (Index e = 0; e < num_elements(); ++e) {
    auto& el = elems[static_cast<std::size_t>(e)];
    el.fill(-1);
    for (int k = 0; k <= dim_; ++k) el[static_cast<std::size_t>(k)] = elements_(e, k);
    std::sort(el.begin(), el.begin() + dim_ + 1);
  }
  std::sort(elems.begin(), elems.end());
  for (const auto& el : elems) {
    for (int v : el) fnv_mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  }
  fingerprint_ = h;
}

Eigen::VectorXd Mesh::element_centroid(Index e) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim_);
  for (int k = 0; k <= dim_; ++k) c += nodes_.row(elements_(e, k)).transpose();
  return c / static_cast<double>(dim_ + 1);
}

std::optional<Index> Mesh::find_boundary_facet(std::span<const int> facet_nodes) const {
  if (static_cast<int>(facet_nodes.size()) != dim_) return std::nullopt;
  std::array<int, 3> key{-1, -1, -1};
  std::copy(facet_nodes.begin(), facet_nodes.end(), key.begin());
  std::sort(key.begin(), key.begin() + dim_);
  if (key[0] < 0 || key[static_cast<std::size_t>(dim_ - 1)] >= num_nodes()) return std::nullopt;
  for (Index f : node_facets_[static_cast<std::size_t>(key[0])]) {
    std::array<int, 3> other{-1, -1, -1};
    for (int k = 0; k < dim_; ++k) other[static_cast<std::size_t>(k)] = facets_(f, k);
    if (other == key) return f;
  }
  return std::nullopt;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> Mesh::bounding_box() const {
  Eigen::Matrix<double, 2, Eigen::Dynamic> box(2, dim_);
  box.row(0) = nodes_.colwise().minCoeff();
  box.row(1) = nodes_.colwise().maxCoeff();
  return box;
}

Eigen::VectorXd Mesh::element_means(const Eigen::VectorXd& nodal) const {
  if (nodal.size() != num_nodes()) throw InputError("nodal field length does not match mesh");
  Eigen::VectorXd out(num_elements());
  for (Index e = 0; e < num_elements(); ++e) {
    double s = 0.0;
    for (int k = 0; k <= dim_; ++k) s += nodal(elements_(e, k));
    out(e) = s / static_cast<double>(dim_ + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------

ElectrodeLayout::ElectrodeLayout(const Mesh& mesh, std::vector<Electrode> electrodes)
    : electrodes_(std::move(electrodes)) {
  if (electrodes_.size() < 2) {
    throw ValidationError("electrode layout needs at least 2 electrodes, got " +
                          std::to_string(electrodes_.size()));
  }
  const int dim = mesh.dimension();
  std::vector<int> owner(static_cast<std::size_t>(mesh.num_boundary_facets()), -1);
  areas_.resize(electrodes_.size());
  for (std::size_t q = 0; q < electrodes_.size(); ++q) {
    const Electrode& el = electrodes_[q];
    const std::string name = "electrode " + std::to_string(q + 1);
    if (!(el.contact_impedance > 0.0) || !std::isfinite(el.contact_impedance)) {
      throw ValidationError(name + ": contact impedance must be positive");
    }
    if (el.facets.empty()) throw ValidationError(name + ": empty patch");
    double area = 0.0;
    for (Index f : el.facets) {
      if (f < 0 || f >= mesh.num_boundary_facets()) {
        throw ValidationError(name + ": facet index " + std::to_string(f) + " out of range");
      }
      int& o = owner[static_cast<std::size_t>(f)];
      if (o >= 0) {
        throw ValidationError(name + " overlaps electrode " + std::to_string(o + 1) + " at facet " +
                              std::to_string(f));
      }
      o = static_cast<int>(q);
      area += mesh.facet_measure(f);
    }
    areas_[q] = area;

    // Facet connectivity: facets are adjacent when they share dim-1 nodes.
    const std::size_t nf = el.facets.size();
    std::vector<char> seen(nf, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < nf; ++b) {
        if (seen[b]) continue;
        int shared = 0;
        for (int i = 0; i < dim; ++i) {
          for (int j = 0; j < dim; ++j) {
            shared += mesh.boundary_facets()(el.facets[a], i) == mesh.boundary_facets()(el.facets[b], j);
          }
        }
        if (shared >= dim - 1) {
          seen[b] = 1;
          ++reached;
          stack.push_back(b);
        }
      }
    }
    if (reached != nf) throw ValidationError(name + ": patch is not facet-connected");
  }
}

double ElectrodeLayout::total_area() const noexcept {
  return std::accumulate(areas_.begin(), areas_.end(), 0.0);
}

ElectrodeLayout ElectrodeLayout::scaled_impedances(double factor) const {
  if (!(factor > 0.0)) throw InputError("impedance scale factor must be positive");
  ElectrodeLayout copy = *this;
  for (auto& el : copy.electrodes_) el.contact_impedance *= factor;
  return copy;
}

ElectrodeLayout ElectrodeLayout::with_impedance(double z) const {
  if (!(z > 0.0)) throw InputError("contact impedance must be positive");
  ElectrodeLayout copy = *this;
  for (auto& el : copy.electrodes_) el.contact_impedance = z;
  return copy;
}

}  // namespace bcsr
