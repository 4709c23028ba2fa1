#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "bcsr/errors.hpp"
#include "bcsr/metrics.hpp"
#include "bcsr/phantoms.hpp"

using namespace bcsr;

namespace {

Eigen::VectorXd field(const Mesh& m, double (*f)(double, double)) {
  Eigen::VectorXd v(m.num_nodes());
  for (Index i = 0; i < m.num_nodes(); ++i) v(i) = f(m.nodes()(i, 0), m.nodes()(i, 1));
  return v;
}

}  // namespace

TEST(Metrics, RmseAndPearson) {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 2, 4, 6, 8;
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  EXPECT_NEAR(rmse(a, b), std::sqrt(30.0 / 4.0), 1e-15);
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, -b), -1.0, 1e-15);
  EXPECT_TRUE(std::isnan(pearson(a, Eigen::VectorXd::Ones(4))));
  EXPECT_THROW(rmse(a, Eigen::VectorXd::Ones(3)), InputError);
}

TEST(Transfer, ExactForLinearFields) {
  const auto fine = generate_disk_mesh(1.0, 12, 16, 0.5);
  const auto coarse = generate_disk_mesh(1.0, 7, 16, 0.5);
  auto lin = [](double x, double y) { return 1.0 + 0.3 * x - 0.2 * y; };
  const Eigen::VectorXd moved = transfer_field(fine.mesh, field(fine.mesh, lin), coarse.mesh);
  const Eigen::VectorXd want = field(coarse.mesh, lin);
  for (Index i = 0; i < want.size(); ++i) {
    // Boundary nodes of one polygonal disk can fall just outside the other.
    const double tol = coarse.mesh.nodes().row(i).norm() < 0.95 ? 1e-12 : 1e-3;
    EXPECT_NEAR(moved(i), want(i), tol) << i;
  }
  const auto far = generate_disk_mesh(3.0, 5, 16, 0.5);
  EXPECT_THROW(transfer_field(coarse.mesh, field(coarse.mesh, lin), far.mesh), InputError);
}

TEST(SSIM, IdentitySymmetryAndDegradation) {
  const auto em = generate_disk_mesh(1.0, 12, 16, 0.5);
  const Eigen::VectorXd t = rasterize_phantom(case_library("case1").phantom, em.mesh);
  EXPECT_NEAR(ssim(em.mesh, t, t), 1.0, 1e-12);
  Eigen::VectorXd r = t;
  for (Index i = 0; i < r.size(); ++i) r(i) += 0.2 * std::sin(7.0 * em.mesh.nodes()(i, 0));
  SSIMOptions pair;
  pair.range = SSIMRange::pair;
  EXPECT_NEAR(ssim(em.mesh, t, r, pair), ssim(em.mesh, r, t, pair), 1e-12);
  Eigen::VectorXd worse = t;
  for (Index i = 0; i < worse.size(); ++i) worse(i) += 0.6 * std::sin(7.0 * em.mesh.nodes()(i, 0));
  EXPECT_LT(ssim(em.mesh, t, worse), ssim(em.mesh, t, r));
  EXPECT_LT(ssim(em.mesh, t, r), 1.0);
  EXPECT_EQ(parse_ssim_range("pair"), SSIMRange::pair);
  EXPECT_THROW(parse_ssim_range("max"), InputError);
}

TEST(SSIM, ThreeDimensionalSlices) {
  const auto em = generate_cylinder_mesh(1.0, 1.6, 9, 4, 4, {5, 0.5, 0.01});
  const Eigen::VectorXd t = rasterize_phantom(case_library("case3d").phantom, em.mesh);
  EXPECT_NEAR(ssim(em.mesh, t, t), 1.0, 1e-12);
  SSIMOptions vol;
  vol.volume = true;
  vol.resolution = 48;
  EXPECT_NEAR(ssim(em.mesh, t, t, vol), 1.0, 1e-12);
}

TEST(Report, CsvRow) {
  const auto em = generate_disk_mesh(1.0, 6, 16, 0.5);
  const Eigen::VectorXd t = rasterize_phantom(case_library("case1").phantom, em.mesh);
  auto rep = compute_metrics(t, t, em.mesh);
  EXPECT_NEAR(rep.cc, 1.0, 1e-15);
  EXPECT_EQ(rep.rmse, 0.0);
  rep.case_id = "case1";
  rep.method = "bcsr";
  rep.snr_db = 60;
  rep.seed = 3;
  EXPECT_EQ(metrics_csv_header(), "case,method,snr,seed,ssim,cc,rmse");
  EXPECT_EQ(to_csv_row(rep).rfind("case1,bcsr,60,3,", 0), 0u);
}

TEST(Ventilation, UniformDecreaseGivesRegionVolume) {
  const auto em = generate_disk_mesh(1.0, 10, 16, 0.5);
  const auto mask = element_mask(em.mesh, Circle{{0.3, 0.0}, 0.4});
  double vol = 0.0;
  for (Index e = 0; e < em.mesh.num_elements(); ++e)
    if (mask[static_cast<std::size_t>(e)]) vol += em.mesh.element_measure(e);
  const Eigen::VectorXd minus_one = -Eigen::VectorXd::Ones(em.mesh.num_nodes());
  EXPECT_NEAR(ventilation_index(em.mesh, minus_one, mask), vol, 1e-12 * vol);
  EXPECT_EQ(ventilation_index(em.mesh, -minus_one, mask), 0.0);
  // more negative never lowers the index
  Eigen::VectorXd d = field(em.mesh, [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y); });
  const double base = ventilation_index(em.mesh, d, mask);
  d(5) -= 0.5;
  EXPECT_GE(ventilation_index(em.mesh, d, mask), base);
  // dilation scales with the square of the factor in 2D
  const auto big = generate_disk_mesh(2.0, 10, 16, 0.5);
  const auto big_mask = element_mask(big.mesh, Circle{{0.6, 0.0}, 0.8});
  EXPECT_NEAR(ventilation_index(big.mesh, -Eigen::VectorXd::Ones(big.mesh.num_nodes()), big_mask), 4.0 * vol,
              1e-10 * vol);
  EXPECT_THROW(ventilation_index(em.mesh, minus_one, std::vector<char>(3, 1)), InputError);
}

TEST(Ventilation, SeriesFractions) {
  const auto em = generate_disk_mesh(1.0, 10, 16, 0.5);
  const auto cs = case_library("case5_lung");
  const auto left = element_mask(em.mesh, *cs.left_lung);
  const auto right = element_mask(em.mesh, *cs.right_lung);
  std::vector<Eigen::VectorXd> frames;
  for (double t : {0.0, 0.5, 1.0, 0.5}) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(em.mesh.num_nodes());
    for (Index i = 0; i < d.size(); ++i) d(i) = em.mesh.nodes()(i, 0) < 0 ? -0.2 * t : -0.3 * t;
    frames.push_back(d);
  }
  const auto s = ventilation_series(em.mesh, frames, left, right);
  EXPECT_EQ(s.peak, 2);
  EXPECT_NEAR(s.total[2], s.left[2] + s.right[2], 1e-15);
  EXPECT_NEAR(s.right_fraction + s.left_fraction, 1.0, 1e-15);
  EXPECT_EQ(s.to_csv().rfind("t,F_left,F_right,F_total\n", 0), 0u);
  const auto flat = ventilation_series(em.mesh, {Eigen::VectorXd::Zero(em.mesh.num_nodes())}, left, right);
  EXPECT_TRUE(std::isnan(flat.right_fraction));
  EXPECT_FALSE(flat.warnings.empty());
  EXPECT_THROW(ventilation_series(em.mesh, {}, left, right), InputError);
}
