#include "bcsr/locator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Eigen::Vector3d closest_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                    const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

Eigen::Vector2d closest_on_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return a + t * ab;
}

}  // namespace

PointLocator::PointLocator(const Mesh& mesh) : mesh_(mesh) {
  const int d = mesh.dimension();
  const auto box = mesh.bounding_box();
  const Eigen::VectorXd lo = box.row(0).transpose();
  const Eigen::VectorXd hi = box.row(1).transpose();
  const Eigen::VectorXd span = (hi - lo).cwiseMax(1e-12);
  const double per_axis = std::pow(static_cast<double>(mesh.num_elements()), 1.0 / d);
  dims_.resize(d);
  for (int k = 0; k < d; ++k) dims_(k) = std::clamp(static_cast<int>(per_axis), 1, 256);
  origin_ = lo - 1e-9 * span;
  cell_ = (span * (1.0 + 2e-9)).cwiseQuotient(dims_.cast<double>());
  buckets_.assign(static_cast<std::size_t>(dims_.prod()), {});

  for (Index e = 0; e < mesh.num_elements(); ++e) {
    Eigen::VectorXd emin = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    Eigen::VectorXd emax = -emin;
    for (int k = 0; k <= d; ++k) {
      const Eigen::VectorXd x = mesh.nodes().row(mesh.elements()(e, k)).transpose();
      emin = emin.cwiseMin(x);
      emax = emax.cwiseMax(x);
    }
    for (Index b : bucket_range(emin, emax)) buckets_[static_cast<std::size_t>(b)].push_back(e);
  }
}

std::vector<Index> PointLocator::bucket_range(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const {
  const int d = mesh_.dimension();
  Eigen::VectorXi a(d);
  Eigen::VectorXi b(d);
  for (int k = 0; k < d; ++k) {
    a(k) = std::clamp(static_cast<int>(std::floor((lo(k) - origin_(k)) / cell_(k))), 0, dims_(k) - 1);
    b(k) = std::clamp(static_cast<int>(std::floor((hi(k) - origin_(k)) / cell_(k))), 0, dims_(k) - 1);
  }
  std::vector<Index> out;
  const int nz = d == 3 ? b(2) - a(2) + 1 : 1;
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = a(1); iy <= b(1); ++iy) {
      for (int ix = a(0); ix <= b(0); ++ix) {
        const Index z = d == 3 ? a(2) + iz : 0;
        out.push_back(ix + static_cast<Index>(dims_(0)) * (iy + static_cast<Index>(dims_(1)) * z));
      }
    }
  }
  return out;
}

Eigen::Vector4d PointLocator::barycentric(Index e, const Eigen::VectorXd& x) const {
  const int d = mesh_.dimension();
  const auto grads = mesh_.shape_gradients(e);
  Eigen::Vector4d lambda = Eigen::Vector4d::Zero();
  for (int k = 0; k <= d; ++k) {
    const Eigen::VectorXd xk = mesh_.nodes().row(mesh_.elements()(e, k)).transpose();
    lambda(k) = 1.0 + grads.row(k).dot(x - xk);
  }
  return lambda;
}

std::optional<PointLocation> PointLocator::locate(const Eigen::VectorXd& x, double tol) const {
  const int d = mesh_.dimension();
  if (x.size() != d) throw InputError("point dimension does not match mesh");
  const auto ids = bucket_range(x, x);
  for (Index e : buckets_[static_cast<std::size_t>(ids.front())]) {
    const Eigen::Vector4d lambda = barycentric(e, x);
    if (lambda.head(d + 1).minCoeff() >= -tol) {
      PointLocation loc;
      loc.element = e;
      loc.barycentric = lambda;
      return loc;
    }
  }
  return std::nullopt;
}

PointLocation PointLocator::locate_or_nearest(const Eigen::VectorXd& x, double tol) const {
  if (auto loc = locate(x, tol)) return *loc;
  const int d = mesh_.dimension();
  double best = std::numeric_limits<double>::infinity();
  Index best_facet = -1;
  Eigen::VectorXd best_point;
  for (Index f = 0; f < mesh_.num_boundary_facets(); ++f) {
    Eigen::VectorXd q;
    if (d == 2) {
      q = closest_on_segment(x, mesh_.nodes().row(mesh_.boundary_facets()(f, 0)).transpose(),
                             mesh_.nodes().row(mesh_.boundary_facets()(f, 1)).transpose());
    } else {
      q = closest_on_triangle(x, mesh_.nodes().row(mesh_.boundary_facets()(f, 0)).transpose(),
                              mesh_.nodes().row(mesh_.boundary_facets()(f, 1)).transpose(),
                              mesh_.nodes().row(mesh_.boundary_facets()(f, 2)).transpose());
    }
    const double dist = (q - x).norm();
    if (dist < best) {
      best = dist;
      best_facet = f;
      best_point = q;
    }
  }
  PointLocation loc;
  loc.element = mesh_.facet_owner(best_facet);
  Eigen::Vector4d lambda = barycentric(loc.element, best_point);
  lambda.head(d + 1) = lambda.head(d + 1).cwiseMax(0.0);
  lambda.head(d + 1) /= lambda.head(d + 1).sum();
  loc.barycentric = lambda;
  loc.distance = best;
  return loc;
}

double PointLocator::interpolate(const PointLocation& loc, const Eigen::VectorXd& nodal) const {
  double v = 0.0;
  for (int k = 0; k <= mesh_.dimension(); ++k) v += loc.barycentric(k) * nodal(mesh_.elements()(loc.element, k));
  return v;
}

}  // namespace bcsr
