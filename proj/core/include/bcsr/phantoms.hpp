#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bcsr/basis.hpp"
#include "bcsr/forward.hpp"

namespace bcsr {

// Planar shapes act on (x, y) and are extruded along z on 3D meshes.
struct Circle {
  std::array<double, 2> center{};
  double radius = 0.0;
};
struct Ellipse {
  std::array<double, 2> center{};
  std::array<double, 2> semi_axes{};
  double angle_deg = 0.0;
};
struct Polygon {
  std::vector<std::array<double, 2>> vertices;
};
struct Sphere {
  std::array<double, 3> center{};
  double radius = 0.0;
};
struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> semi_axes{};
};
/// Vertical cylinder; z range [z0, z1].
struct Cylinder {
  std::array<double, 2> center{};
  double radius = 0.0;
  std::array<double, 2> z{};
};
/// Vertical truncated cone: radius r0 at z0 varying linearly to r1 at z1.
struct Frustum {
  std::array<double, 2> center{};
  std::array<double, 2> z{};
  std::array<double, 2> radii{};
};

using Geometry = std::variant<Circle, Ellipse, Polygon, Sphere, Ellipsoid, Cylinder, Frustum>;

bool contains(const Geometry& g, const Eigen::VectorXd& x);

/// Piecewise-constant inclusion: nodes inside take `sigma`.
struct Inclusion {
  Geometry geometry;
  double sigma = 1.0;
};

/// Additive smooth bump amplitude * exp(-|x - c|^2 / (2 width^2)) in (x, y).
struct GaussianBump {
  std::array<double, 2> center{};
  double width = 0.1;
  double amplitude = 0.0;
};

using Shape = std::variant<Inclusion, GaussianBump>;

/// Background plus shapes applied in order: inclusions overwrite (later shapes
/// win), bumps add to whatever value the node holds at that point.
struct Phantom {
  std::string name;
  double background = 1.0;
  std::vector<Shape> shapes;

  /// Conductivity at a point; throws InputError if the result is not positive.
  double value(const Eigen::VectorXd& x) const;
};

/// Nodal conductivity of the phantom on `mesh`.
Eigen::VectorXd rasterize_phantom(const Phantom& phantom, const Mesh& mesh);

/// Elements whose centroid lies inside `g`.
std::vector<char> element_mask(const Mesh& mesh, const Geometry& g);

struct DomainSpec {
  std::string type = "disk";  ///< "disk" or "cylinder"
  double radius = 1.0;
  double height = 0.0;  ///< cylinder only, centred on z = 0
  int rings = 1;        ///< electrode rings (cylinder only)
};

struct CaseSpec {
  std::string id;
  std::string description;
  DomainSpec domain;
  Phantom phantom;
  std::array<double, 2> fine_bounds{};
  std::array<double, 2> coarse_bounds{};
  TruncationRegime truncation = TruncationRegime::simulation;
  std::optional<Geometry> left_lung;
  std::optional<Geometry> right_lung;
};

/// Case ids in the shipped library.
std::vector<std::string> case_ids();

/// Throws InputError for an unknown id.
CaseSpec case_library(std::string_view id);

struct NoiseModel {
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  double realized_sigma = 0.0;  ///< |e| / sqrt(M)
};

struct SimulatedData {
  Eigen::VectorXd clean;
  Eigen::VectorXd noisy;
  NoiseModel noise;
};

/// Adds i.i.d. Gaussian noise rescaled so that 10 log10(|V|^2 / |e|^2) equals
/// `snr_db` for the drawn sample. An infinite SNR returns the input unchanged.
Eigen::VectorXd add_noise(const Eigen::VectorXd& clean, double snr_db, std::uint64_t seed,
                          double* realized_sigma = nullptr);

/// Clean data from the forward model on the simulation mesh, plus noise.
SimulatedData simulate_measurements(const Phantom& phantom, const ForwardModel& sim_model, double snr_db,
                                    std::uint64_t seed);

}  // namespace bcsr
