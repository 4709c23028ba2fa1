#include <random>

#include <gtest/gtest.h>

#include "bcsr/errors.hpp"
#include "bcsr/forward.hpp"
#include "oracle.hpp"

using namespace bcsr;

namespace {

Eigen::VectorXd smooth_sigma(const Mesh& m) {
  Eigen::VectorXd s(m.num_nodes());
  for (Index i = 0; i < m.num_nodes(); ++i) s(i) = 1.0 + 0.4 * std::sin(2.0 * m.nodes()(i, 0)) * std::cos(m.nodes()(i, 1));
  return s;
}

}  // namespace

TEST(Forward, MatchesDenseLongDoubleSolve2D) {
  const auto dm = generate_disk_mesh(1.0, 5, 8, 0.5, 0.05);
  const auto prot = adjacent_protocol(8, false, false);
  const Eigen::VectorXd s = smooth_sigma(dm.mesh);
  const Eigen::VectorXd v = solve_forward(dm.mesh, dm.layout, prot, s).measurements;
  const Eigen::VectorXd ref = oracle::cem_measure(dm.mesh, dm.layout, prot, s).cast<double>();
  EXPECT_LT((v - ref).norm() / ref.norm(), 1e-10);
}

TEST(Forward, MatchesDenseLongDoubleSolve3D) {
  const auto cm = generate_cylinder_mesh(1.0, 1.0, 4, 1, 6, {3, 0.5, 0.02});
  const auto prot = adjacent_protocol(6, false, false);
  const Eigen::VectorXd s = smooth_sigma(cm.mesh);
  const Eigen::VectorXd v = solve_forward(cm.mesh, cm.layout, prot, s).measurements;
  const Eigen::VectorXd ref = oracle::cem_measure(cm.mesh, cm.layout, prot, s).cast<double>();
  EXPECT_LT((v - ref).norm() / ref.norm(), 1e-10);
}

TEST(Forward, ConservationAndZeroMean) {
  const auto dm = generate_disk_mesh(1.0, 8, 16, 0.5);
  const ForwardModel fm(dm.mesh, dm.layout, adjacent_protocol(16, false, false));
  const auto sol = fm.solve(smooth_sigma(dm.mesh));
  for (Index i = 0; i < fm.protocol().num_injections(); ++i) {
    const auto& u = sol.electrode_voltages[static_cast<std::size_t>(i)];
    EXPECT_LT(std::abs(u.sum()), 1e-12 * u.cwiseAbs().maxCoeff());
    const Eigen::VectorXd got = fm.electrode_currents(sol.potentials[static_cast<std::size_t>(i)], u);
    const Eigen::VectorXd want = fm.protocol().current_pattern(i);
    EXPECT_LT((got - want).norm() / want.norm(), 1e-9);
  }
}

TEST(Forward, Reciprocity) {
  const auto dm = generate_disk_mesh(1.0, 8, 16, 0.5);
  const auto prot = adjacent_protocol(16, false, false);
  const ForwardModel fm(dm.mesh, dm.layout, prot);
  const Eigen::VectorXd v = fm.measure(smooth_sigma(dm.mesh));
  const auto& m = prot.measurements();
  int pairs = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (reciprocal(prot, m[i], m[j])) {
        EXPECT_LT(std::abs(v(static_cast<Index>(i)) - v(static_cast<Index>(j))), 1e-10 * v.cwiseAbs().maxCoeff());
        ++pairs;
      }
  EXPECT_GT(pairs, 100);
}

TEST(Forward, LinearInAmplitudeAndInverseInSigma) {
  const auto dm = generate_disk_mesh(1.0, 6, 16, 0.5);
  const ForwardModel a(dm.mesh, dm.layout, adjacent_protocol(16, false, false, 1.0));
  const ForwardModel b(dm.mesh, dm.layout, adjacent_protocol(16, false, false, 3.0));
  const Eigen::VectorXd s = smooth_sigma(dm.mesh);
  EXPECT_LT((3.0 * a.measure(s) - b.measure(s)).norm(), 1e-12 * b.measure(s).norm());
  // scaling sigma and dividing z by the same factor scales V by the inverse
  const ForwardModel c(dm.mesh, dm.layout.scaled_impedances(0.5), adjacent_protocol(16, false, false));
  EXPECT_LT((a.measure(s) - 2.0 * c.measure(2.0 * s)).norm(), 1e-10 * a.measure(s).norm());
}

TEST(Forward, RejectsBadSigma) {
  const auto dm = generate_disk_mesh(1.0, 3, 4, 0.5);
  const ForwardModel fm(dm.mesh, dm.layout, adjacent_protocol(4, false, false));
  EXPECT_THROW(fm.solve(Eigen::VectorXd::Ones(3)), InputError);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(dm.mesh.num_nodes());
  s(2) = 0.0;
  EXPECT_THROW(fm.solve(s), InputError);
  s(2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fm.solve(s), InputError);
}

TEST(Jacobian, CentralDifferencesOnLongDoubleOracle2D) {
  const auto dm = generate_disk_mesh(1.0, 4, 8, 0.5, 0.05);
  const auto prot = adjacent_protocol(8, false, false);
  const Eigen::VectorXd s = smooth_sigma(dm.mesh);
  const Eigen::MatrixXd j = jacobian(dm.mesh, dm.layout, prot, s);
  std::mt19937 rng(7);
  std::uniform_int_distribution<Index> node(0, dm.mesh.num_nodes() - 1);
  for (int k = 0; k < 6; ++k) {
    const Index n = node(rng);
    const long double h = 1e-5L;
    Eigen::VectorXd sp = s, sm = s;
    sp(n) += static_cast<double>(h);
    sm(n) -= static_cast<double>(h);
    const oracle::VectorL fd = (oracle::cem_measure(dm.mesh, dm.layout, prot, sp) -
                                oracle::cem_measure(dm.mesh, dm.layout, prot, sm)) / (2.0L * h);
    const Eigen::VectorXd col = j.col(n);
    EXPECT_LT((col - fd.cast<double>()).norm() / fd.cast<double>().norm(), 1e-6) << "node " << n;
  }
}

TEST(Jacobian, AdjointMatchesLinearizeAndBatch) {
  const auto dm = generate_disk_mesh(1.0, 5, 16, 0.5);
  const ForwardModel fm(dm.mesh, dm.layout, adjacent_protocol(16, true, true));
  const Eigen::VectorXd s = smooth_sigma(dm.mesh);
  const auto lin = fm.linearize(s);
  EXPECT_EQ(lin.jacobian.rows(), 104);
  EXPECT_EQ(lin.jacobian.cols(), dm.mesh.num_nodes());
  EXPECT_LT((lin.jacobian - fm.jacobian(s)).norm(), 1e-14 * lin.jacobian.norm());
  const auto batch = solve_forward_batch(fm, {s, 2.0 * s});
  EXPECT_LT((batch[0].measurements - lin.solution.measurements).norm(), 1e-14 * batch[0].measurements.norm());
}
