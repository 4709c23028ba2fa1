#include "bcsr/phantoms.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace detail {
std::string_view case_library_json();
}

namespace {

using nlohmann::json;

template <std::size_t N>
std::array<double, N> vec(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != N) throw FormatError(std::string("'") + key + "' must have " + std::to_string(N) + " entries");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
  return out;
}

Geometry parse_geometry(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "circle") return Circle{vec<2>(j, "center"), j.at("radius").get<double>()};
  if (type == "ellipse") return Ellipse{vec<2>(j, "center"), vec<2>(j, "semi_axes"), j.value("angle_deg", 0.0)};
  if (type == "polygon") {
    Polygon p;
    for (const auto& v : j.at("vertices")) p.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    if (p.vertices.size() < 3) throw FormatError("polygon needs at least 3 vertices");
    return p;
  }
  if (type == "sphere") return Sphere{vec<3>(j, "center"), j.at("radius").get<double>()};
  if (type == "ellipsoid") return Ellipsoid{vec<3>(j, "center"), vec<3>(j, "semi_axes")};
  if (type == "cylinder") return Cylinder{vec<2>(j, "center"), j.at("radius").get<double>(), vec<2>(j, "z")};
  if (type == "frustum") return Frustum{vec<2>(j, "center"), vec<2>(j, "z"), vec<2>(j, "radii")};
  throw FormatError("unknown shape type '" + type + "'");
}

Shape parse_shape(const json& j) {
  if (j.at("type").get<std::string>() == "gaussian") {
    return GaussianBump{vec<2>(j, "center"), j.at("width").get<double>(), j.at("amplitude").get<double>()};
  }
  const double sigma = j.at("sigma").get<double>();
  if (!(sigma > 0.0)) throw FormatError("inclusion conductivity must be positive");
  return Inclusion{parse_geometry(j), sigma};
}

// Horizontal extent (max distance from the z axis) and z range of a geometry.
void extent(const Geometry& g, double* rmax, double* zlo, double* zhi) {
  *zlo = -std::numeric_limits<double>::infinity();
  *zhi = std::numeric_limits<double>::infinity();
  auto radial = [](const std::array<double, 2>& c) { return std::hypot(c[0], c[1]); };
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          *rmax = radial(s.center) + s.radius;
        } else if constexpr (std::is_same_v<T, Ellipse>) {
          *rmax = radial(s.center) + std::max(s.semi_axes[0], s.semi_axes[1]);
        } else if constexpr (std::is_same_v<T, Polygon>) {
          *rmax = 0.0;
          for (const auto& v : s.vertices) *rmax = std::max(*rmax, radial(v));
        } else if constexpr (std::is_same_v<T, Sphere>) {
          *rmax = std::hypot(s.center[0], s.center[1]) + s.radius;
          *zlo = s.center[2] - s.radius;
          *zhi = s.center[2] + s.radius;
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          *rmax = std::hypot(s.center[0], s.center[1]) + std::max(s.semi_axes[0], s.semi_axes[1]);
          *zlo = s.center[2] - s.semi_axes[2];
          *zhi = s.center[2] + s.semi_axes[2];
        } else if constexpr (std::is_same_v<T, Cylinder>) {
          *rmax = radial(s.center) + s.radius;
          *zlo = s.z[0];
          *zhi = s.z[1];
        } else {
          *rmax = radial(s.center) + std::max(s.radii[0], s.radii[1]);
          *zlo = s.z[0];
          *zhi = s.z[1];
        }
      },
      g);
}

CaseSpec parse_case(const std::string& id, const json& j) {
  CaseSpec c;
  c.id = id;
  c.description = j.value("description", "");
  const auto& d = j.at("domain");
  c.domain.type = d.at("type").get<std::string>();
  c.domain.radius = d.at("radius").get<double>();
  c.domain.height = d.value("height", 0.0);
  c.domain.rings = d.value("rings", 1);
  c.phantom.name = id;
  c.phantom.background = j.at("background").get<double>();
  for (const auto& s : j.at("shapes")) c.phantom.shapes.push_back(parse_shape(s));
  c.fine_bounds = vec<2>(j.at("bounds"), "fine");
  c.coarse_bounds = vec<2>(j.at("bounds"), "coarse");
  c.truncation = j.at("truncation").get<std::string>() == "tank" ? TruncationRegime::tank : TruncationRegime::simulation;
  if (j.contains("lungs")) {
    c.left_lung = parse_geometry(j.at("lungs").at("left"));
    c.right_lung = parse_geometry(j.at("lungs").at("right"));
  }
  // Shapes must lie inside the domain.
  const double zmax = c.domain.type == "cylinder" ? 0.5 * c.domain.height : std::numeric_limits<double>::infinity();
  for (const auto& s : c.phantom.shapes) {
    if (const auto* inc = std::get_if<Inclusion>(&s)) {
      double r = 0.0;
      double zlo = 0.0;
      double zhi = 0.0;
      extent(inc->geometry, &r, &zlo, &zhi);
      if (r > c.domain.radius + 1e-12 || (std::isfinite(zlo) && (zlo < -zmax - 1e-12 || zhi > zmax + 1e-12))) {
        throw FormatError("case " + id + ": a shape extends outside the domain");
      }
    }
  }
  return c;
}

const json& library() {
  static const json lib = json::parse(detail::case_library_json());
  return lib;
}

}  // namespace

bool contains(const Geometry& g, const Eigen::VectorXd& x) {
  const double px = x(0);
  const double py = x(1);
  const double pz = x.size() > 2 ? x(2) : 0.0;
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return std::hypot(px - s.center[0], py - s.center[1]) <= s.radius;
        } else if constexpr (std::is_same_v<T, Ellipse>) {
          const double a = s.angle_deg * std::numbers::pi / 180.0;
          const double dx = px - s.center[0];
          const double dy = py - s.center[1];
          const double u = std::cos(a) * dx + std::sin(a) * dy;
          const double v = -std::sin(a) * dx + std::cos(a) * dy;
          return (u * u) / (s.semi_axes[0] * s.semi_axes[0]) + (v * v) / (s.semi_axes[1] * s.semi_axes[1]) <= 1.0;
        } else if constexpr (std::is_same_v<T, Polygon>) {
          // Even-odd crossing rule.
          bool inside = false;
          const auto& v = s.vertices;
          for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
            if ((v[i][1] > py) != (v[j][1] > py) &&
                px < (v[j][0] - v[i][0]) * (py - v[i][1]) / (v[j][1] - v[i][1]) + v[i][0]) {
              inside = !inside;
            }
          }
          return inside;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          const double dx = px - s.center[0];
          const double dy = py - s.center[1];
          const double dz = pz - s.center[2];
          return dx * dx + dy * dy + dz * dz <= s.radius * s.radius;
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          const double dx = (px - s.center[0]) / s.semi_axes[0];
          const double dy = (py - s.center[1]) / s.semi_axes[1];
          const double dz = (pz - s.center[2]) / s.semi_axes[2];
          return dx * dx + dy * dy + dz * dz <= 1.0;
        } else if constexpr (std::is_same_v<T, Cylinder>) {
          return pz >= s.z[0] && pz <= s.z[1] && std::hypot(px - s.center[0], py - s.center[1]) <= s.radius;
        } else {
          if (pz < s.z[0] || pz > s.z[1]) return false;
          const double t = (pz - s.z[0]) / (s.z[1] - s.z[0]);
          const double r = s.radii[0] + t * (s.radii[1] - s.radii[0]);
          return std::hypot(px - s.center[0], py - s.center[1]) <= r;
        }
      },
      g);
}

double Phantom::value(const Eigen::VectorXd& x) const {
  double v = background;
  for (const auto& shape : shapes) {
    if (const auto* inc = std::get_if<Inclusion>(&shape)) {
      if (contains(inc->geometry, x)) v = inc->sigma;
    } else {
      const auto& b = std::get<GaussianBump>(shape);
      const double r2 = std::pow(x(0) - b.center[0], 2) + std::pow(x(1) - b.center[1], 2);
      v += b.amplitude * std::exp(-r2 / (2.0 * b.width * b.width));
    }
  }
  if (!(v > 0.0)) {
    std::ostringstream msg;
    msg << "phantom '" << name << "' has non-positive conductivity " << v;
    throw InputError(msg.str());
  }
  return v;
}

Eigen::VectorXd rasterize_phantom(const Phantom& phantom, const Mesh& mesh) {
  Eigen::VectorXd sigma(mesh.num_nodes());
  for (Index n = 0; n < mesh.num_nodes(); ++n) sigma(n) = phantom.value(mesh.nodes().row(n).transpose());
  return sigma;
}

std::vector<char> element_mask(const Mesh& mesh, const Geometry& g) {
  std::vector<char> mask(static_cast<std::size_t>(mesh.num_elements()));
  for (Index e = 0; e < mesh.num_elements(); ++e) mask[static_cast<std::size_t>(e)] = contains(g, mesh.element_centroid(e));
  return mask;
}

std::vector<std::string> case_ids() {
  std::vector<std::string> ids;
  for (const auto& [key, value] : library().items()) ids.push_back(key);
  return ids;
}

CaseSpec case_library(std::string_view id) {
  const std::string key(id);
  if (!library().contains(key)) {
    std::string known;
    for (const auto& k : case_ids()) known += (known.empty() ? "" : ", ") + k;
    throw InputError("unknown case '" + key + "' (known: " + known + ")");
  }
  return parse_case(key, library().at(key));
}

Eigen::VectorXd add_noise(const Eigen::VectorXd& clean, double snr_db, std::uint64_t seed, double* realized_sigma) {
  if (std::isinf(snr_db) && snr_db > 0) {
    if (realized_sigma) *realized_sigma = 0.0;
    return clean;
  }
  if (!std::isfinite(snr_db)) throw InputError("SNR must be finite or +inf");
  if (clean.size() == 0 || clean.squaredNorm() == 0.0) throw InputError("cannot set an SNR for an all-zero signal");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd e(clean.size());
  for (Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  e *= clean.norm() / e.norm() * std::pow(10.0, -snr_db / 20.0);
  if (realized_sigma) *realized_sigma = e.norm() / std::sqrt(static_cast<double>(e.size()));
  return clean + e;
}

SimulatedData simulate_measurements(const Phantom& phantom, const ForwardModel& sim_model, double snr_db,
                                    std::uint64_t seed) {
  SimulatedData out;
  out.clean = sim_model.measure(rasterize_phantom(phantom, sim_model.mesh()));
  out.noise.snr_db = snr_db;
  out.noise.seed = seed;
  out.noisy = add_noise(out.clean, snr_db, seed, &out.noise.realized_sigma);
  return out;
}

}  // namespace bcsr
