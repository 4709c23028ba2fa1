#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bcsr/mesh.hpp"

namespace bcsr {

/// Element containing a point, with the point's barycentric coordinates.
struct PointLocation {
  Index element = -1;
  Eigen::Vector4d barycentric = Eigen::Vector4d::Zero();  ///< first d+1 entries used
  double distance = 0.0;                                  ///< 0 when inside
};

/// Uniform-bucket point locator over the elements of a mesh.
/// Holds a reference to the mesh, which must outlive the locator.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  /// Element containing `x` within barycentric tolerance `tol`, if any.
  std::optional<PointLocation> locate(const Eigen::VectorXd& x, double tol = 1e-9) const;

  /// Like `locate`, but falls back to the nearest element (projected
  /// barycentrics clamped into the simplex) for points outside the mesh.
  PointLocation locate_or_nearest(const Eigen::VectorXd& x, double tol = 1e-9) const;

  /// Linear interpolant of a nodal field at a located point.
  double interpolate(const PointLocation& loc, const Eigen::VectorXd& nodal) const;

 private:
  Eigen::Vector4d barycentric(Index e, const Eigen::VectorXd& x) const;
  std::vector<Index> bucket_range(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;

  const Mesh& mesh_;
  Eigen::VectorXd origin_;
  Eigen::VectorXd cell_;
  Eigen::VectorXi dims_;
  std::vector<std::vector<Index>> buckets_;
};

}  // namespace bcsr
