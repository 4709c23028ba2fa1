#include <cmath>

#include <gtest/gtest.h>

#include "bcsr/boundmap.hpp"
#include "bcsr/errors.hpp"
#include "bcsr/recon.hpp"

using namespace bcsr;

namespace {

BoundMap make_map(double s0 = 0.7) { return BoundMap(0.2, 2.0, Eigen::VectorXd::Constant(5, s0), 0.9); }

}  // namespace

TEST(Sigmoid, StableTails) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), std::exp(-1000.0));
  EXPECT_DOUBLE_EQ(sigmoid(1000.0), 1.0);
  EXPECT_NEAR(sigmoid(3.0) + sigmoid(-3.0), 1.0, 1e-15);
}

TEST(BoundMap, ZeroLatentGivesSigma0) {
  Eigen::VectorXd s0(5);
  s0 << 0.25, 0.5, 1.0, 1.5, 1.99;
  const BoundMap map(0.2, 2.0, s0);
  const Eigen::VectorXd out = map.map(Eigen::VectorXd::Zero(5));
  for (Index i = 0; i < 5; ++i) EXPECT_NEAR(out(i), s0(i), 1e-12 * s0(i));
}

TEST(BoundMap, StrictlyInsideForLargeLatents) {
  const BoundMap map = make_map();
  for (double c = -1000.0; c <= 1000.0; c += 0.5) {
    const Eigen::VectorXd s = map.map(Eigen::VectorXd::Constant(5, c));
    EXPECT_GT(s.minCoeff(), 0.2) << c;
    EXPECT_LT(s.maxCoeff(), 2.0) << c;
  }
}

TEST(BoundMap, DerivativeMatchesFiniteDifferences) {
  const BoundMap map = make_map();
  for (double c : {-4.0, -1.0, 0.0, 0.3, 2.5}) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(5, c);
    const double h = 1e-6;
    const Eigen::VectorXd fd = (map.map(x.array() + h) - map.map(x.array() - h)) / (2 * h);
    const Eigen::VectorXd an = map.derivative(map.map(x));
    EXPECT_LT((fd - an).cwiseAbs().maxCoeff() / an.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((map.derivative_latent(x) - an).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(BoundMap, Errors) {
  EXPECT_THROW(BoundMap(2.0, 1.0, Eigen::VectorXd::Ones(2)), InputError);
  EXPECT_THROW(BoundMap(0.2, 2.0, Eigen::VectorXd::Constant(2, 2.0)), InputError);
  const BoundMap map = make_map();
  EXPECT_THROW(map.map(Eigen::VectorXd::Zero(4)), InputError);
  EXPECT_THROW(map.map(Eigen::VectorXd::Constant(5, std::nan(""))), InputError);
  EXPECT_THROW(map.derivative(Eigen::VectorXd::Constant(5, 2.0)), InputError);
}

TEST(Calibration, ScaleRules) {
  Eigen::VectorXd u(3), v(3);
  u << 1.0, 2.0, 3.0;
  v = 0.5 * u;  // measured voltages half the homogeneous ones -> twice the conductivity
  const auto cal = calibrate_sigma0(v, u, Eigen::VectorXd::Ones(4), 0.2, 4.0);
  // s = sum V^2 / sum U V = 0.5
  EXPECT_NEAR(cal.scale, 0.5, 1e-15);
  const auto ls = calibrate_sigma0(v, u, Eigen::VectorXd::Ones(4), 0.2, 4.0, ScaleRule::voltage_ls);
  EXPECT_NEAR(ls.scale, 2.0, 1e-15);
  // projection into the bounds
  const auto clipped = calibrate_sigma0(v, u, Eigen::VectorXd::Ones(4), 0.2, 0.4, ScaleRule::voltage_ls);
  EXPECT_NEAR(clipped.sigma0(0), 0.4 - 1e-3 * 0.2, 1e-15);
  EXPECT_THROW(calibrate_sigma0(v, -u, Eigen::VectorXd::Ones(4), 0.2, 4.0), InputError);
  EXPECT_THROW(calibrate_sigma0(v, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(4), 0.2, 4.0), InputError);
  EXPECT_EQ(parse_scale_rule("voltage_ls"), ScaleRule::voltage_ls);
  EXPECT_THROW(parse_scale_rule("other"), InputError);
}

TEST(WarmStart, ReproducesBaseline) {
  Eigen::VectorXd b(3);
  b << 0.5, 1.0, 1.5;
  const auto map = warm_start(b, 0.2, 2.0);
  EXPECT_LT((map.map(Eigen::VectorXd::Zero(3)) - b).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(map.scale(), 1.0);
  b(0) = 0.2;
  EXPECT_THROW(warm_start(b, 0.2, 2.0), InputError);
}

TEST(Fletcher, ThreeBranchesWithDefaults) {
  const LMFConfig cfg;
  EXPECT_EQ(cfg.mu0, 1e-4);
  EXPECT_EQ(fletcher_update(1e-4, 0.1, cfg), 4e-4);
  EXPECT_EQ(fletcher_update(1e-4, 0.5, cfg), 1e-4);
  EXPECT_EQ(fletcher_update(1e-4, 0.9, cfg), 2.5e-5);
  // boundaries stay in the middle branch
  EXPECT_EQ(fletcher_update(1.0, 0.25, cfg), 1.0);
  EXPECT_EQ(fletcher_update(1.0, 0.75, cfg), 1.0);
}
