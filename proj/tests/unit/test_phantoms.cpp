#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "bcsr/errors.hpp"
#include "bcsr/forward.hpp"
#include "bcsr/phantoms.hpp"

using namespace bcsr;

namespace {

Eigen::VectorXd pt(double x, double y) { return Eigen::Vector2d(x, y); }
Eigen::VectorXd pt(double x, double y, double z) { return Eigen::Vector3d(x, y, z); }

}  // namespace

TEST(Geometry, Containment) {
  EXPECT_TRUE(contains(Circle{{0.5, 0.0}, 0.2}, pt(0.6, 0.1)));
  EXPECT_FALSE(contains(Circle{{0.5, 0.0}, 0.2}, pt(0.0, 0.0)));
  EXPECT_TRUE(contains(Ellipse{{0, 0}, {0.5, 0.1}, 90.0}, pt(0.0, 0.4)));
  EXPECT_FALSE(contains(Ellipse{{0, 0}, {0.5, 0.1}, 90.0}, pt(0.4, 0.0)));
  const Polygon tri{{{0, 0}, {1, 0}, {0, 1}}};
  EXPECT_TRUE(contains(tri, pt(0.2, 0.2)));
  EXPECT_FALSE(contains(tri, pt(0.6, 0.6)));
  EXPECT_TRUE(contains(Sphere{{0, 0, 0.5}, 0.2}, pt(0.0, 0.1, 0.6)));
  EXPECT_FALSE(contains(Sphere{{0, 0, 0.5}, 0.2}, pt(0.0, 0.1, 0.1)));
  const Frustum f{{0, 0}, {-1.0, 1.0}, {0.5, 0.1}};
  EXPECT_TRUE(contains(f, pt(0.4, 0.0, -0.9)));
  EXPECT_FALSE(contains(f, pt(0.4, 0.0, 0.9)));
  EXPECT_FALSE(contains(Cylinder{{0, 0}, 0.5, {-0.2, 0.2}}, pt(0.0, 0.0, 0.5)));
  // planar shapes extrude along z
  EXPECT_TRUE(contains(Circle{{0.0, 0.0}, 0.2}, pt(0.1, 0.0, 0.7)));
}

TEST(Phantom, LaterInclusionsWinAndBumpsAdd) {
  Phantom p;
  p.background = 1.0;
  p.shapes = {Inclusion{Circle{{0, 0}, 0.5}, 2.0}, Inclusion{Circle{{0, 0}, 0.2}, 3.0},
              GaussianBump{{0.0, 0.0}, 0.1, 0.5}};
  EXPECT_NEAR(p.value(pt(0.0, 0.0)), 3.5, 1e-15);
  EXPECT_NEAR(p.value(pt(0.3, 0.0)), 2.0 + 0.5 * std::exp(-4.5), 1e-15);
  EXPECT_NEAR(p.value(pt(0.9, 0.0)), 1.0 + 0.5 * std::exp(-40.5), 1e-15);
  p.shapes.push_back(GaussianBump{{0.9, 0.0}, 0.1, -5.0});
  EXPECT_THROW(p.value(pt(0.9, 0.0)), InputError);
}

TEST(Phantom, RasterizationAndMasks) {
  const auto em = generate_disk_mesh(1.0, 10, 16, 0.5);
  const auto cs = case_library("case1");
  const Eigen::VectorXd s = rasterize_phantom(cs.phantom, em.mesh);
  ASSERT_EQ(s.size(), em.mesh.num_nodes());
  EXPECT_DOUBLE_EQ(s.minCoeff(), 0.25);
  EXPECT_DOUBLE_EQ(s.maxCoeff(), 2.0);
  const auto mask = element_mask(em.mesh, Circle{{-0.4, 0.2}, 0.25});
  double area = 0.0;
  for (Index e = 0; e < em.mesh.num_elements(); ++e)
    if (mask[static_cast<std::size_t>(e)]) area += em.mesh.element_measure(e);
  EXPECT_NEAR(area, std::numbers::pi * 0.0625, 0.03);
}

TEST(CaseLibrary, StudyParameters) {
  const auto ids = case_ids();
  for (const char* id : {"case1", "case2_smooth", "case3_sharp", "case4_shielded", "case5_lung", "case25d", "case3d",
                         "tank_analog"})
    EXPECT_NE(std::find(ids.begin(), ids.end(), id), ids.end()) << id;
  const auto c1 = case_library("case1");
  EXPECT_EQ(c1.fine_bounds, (std::array<double, 2>{0.2, 2.0}));
  EXPECT_EQ(c1.coarse_bounds, (std::array<double, 2>{0.1, 4.0}));
  const auto tank = case_library("tank_analog");
  EXPECT_EQ(tank.fine_bounds, (std::array<double, 2>{0.001, 0.543}));
  EXPECT_EQ(tank.truncation, TruncationRegime::tank);
  const auto c3 = case_library("case3d");
  EXPECT_EQ(c3.domain.type, "cylinder");
  EXPECT_EQ(c3.domain.rings, 4);
  EXPECT_DOUBLE_EQ(c3.phantom.background, 1.0);
  EXPECT_DOUBLE_EQ(c3.phantom.value(pt(-0.4, 0.3, 0.0)), 0.5);
  EXPECT_DOUBLE_EQ(c3.phantom.value(pt(0.35, 0.25, 0.35)), 5.0);
  EXPECT_DOUBLE_EQ(c3.phantom.value(pt(0.3, -0.35, -0.3)), 5.0);
  const auto lung = case_library("case5_lung");
  ASSERT_TRUE(lung.left_lung && lung.right_lung);
  EXPECT_TRUE(contains(*lung.left_lung, pt(-0.42, 0.0)));
  EXPECT_TRUE(contains(*lung.right_lung, pt(0.42, 0.0)));
  EXPECT_THROW(case_library("case9"), InputError);
}

TEST(Noise, ExactSnrAndDeterminism) {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(104, -2.0, 3.0);
  for (double snr : {60.0, 47.5, 30.0}) {
    double sigma = 0.0;
    const Eigen::VectorXd n = add_noise(v, snr, 11, &sigma);
    const double realized = 10.0 * std::log10(v.squaredNorm() / (n - v).squaredNorm());
    EXPECT_NEAR(realized, snr, 1e-9);
    EXPECT_NEAR(sigma, (n - v).norm() / std::sqrt(104.0), 1e-15);
  }
  EXPECT_EQ(add_noise(v, 40.0, 3), add_noise(v, 40.0, 3));
  EXPECT_NE(add_noise(v, 40.0, 3), add_noise(v, 40.0, 4));
  EXPECT_EQ(add_noise(v, std::numeric_limits<double>::infinity(), 3), v);
}

TEST(Noise, SimulatedDataCarriesMetadata) {
  const auto em = generate_disk_mesh(1.0, 6, 16, 0.5);
  const ForwardModel fm(em.mesh, em.layout, adjacent_protocol(16, true, true));
  const auto data = simulate_measurements(case_library("case1").phantom, fm, 50.0, 9);
  EXPECT_EQ(data.clean.size(), 104);
  EXPECT_EQ(data.noise.seed, 9u);
  EXPECT_EQ(data.noise.snr_db, 50.0);
  EXPECT_NEAR(10.0 * std::log10(data.clean.squaredNorm() / (data.noisy - data.clean).squaredNorm()), 50.0, 1e-9);
}
