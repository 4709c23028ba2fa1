// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Set BCSR_ACCEPT_ONLY=3,7 to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bcsr/baselines.hpp"
#include "bcsr/basis.hpp"
#include "bcsr/boundmap.hpp"
#include "bcsr/config.hpp"
#include "bcsr/forward.hpp"
#include "bcsr/metrics.hpp"
#include "bcsr/pipeline.hpp"
#include "bcsr/recon.hpp"
#include "bcsr/tv.hpp"
#include "oracle.hpp"

using namespace bcsr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects the individual checks of one criterion and the numbers behind them.
class Criterion {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_.push_back(what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool pass() const { return pass_; }
  std::string summary() const {
    std::string s;
    for (const auto& n : notes_) s += (s.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + ("failed: " + f);
    return s;
  }

 private:
  bool pass_ = true;
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// One reconstruction setup built the way the pipeline builds it.
struct Study {
  explicit Study(const std::string& config_json)
      : config(parse_config(config_json)),
        pipeline(config),
        sim_model(pipeline.sim_mesh()->mesh, pipeline.sim_mesh()->layout, pipeline.protocol()),
        recon_model(pipeline.recon_mesh().mesh, pipeline.recon_mesh().layout, pipeline.protocol()),
        truth(pipeline.truth_on_recon()),
        phantom(case_library(*config.case_id).phantom) {}

  const Mesh& mesh() const { return pipeline.recon_mesh().mesh; }

  Eigen::VectorXd data(double snr, std::uint64_t seed) const {
    return simulate_measurements(phantom, sim_model, snr, seed).noisy;
  }

  Calibration calibrate(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh().num_nodes());
    const auto [l, u] = pipeline.bounds();
    return calibrate_sigma0(v, recon_model.measure(ones), ones, l, u, config.scale_rule);
  }

  ReconResult bcsr(const Eigen::VectorXd& v, const GraphBasis& basis, bool tv, double snr) const {
    const Calibration cal = calibrate(v);
    const auto [l, u] = pipeline.bounds();
    const BoundMap map(l, u, cal.sigma0, cal.scale);
    ReconOptions o;
    o.lmf = config.lmf;
    o.tv = config.tv;
    o.tv.enabled = tv;
    o.snr_db = snr;
    return reconstruct(recon_model, v, basis, map, o);
  }

  ExperimentConfig config;
  Pipeline pipeline;
  ForwardModel sim_model;
  ForwardModel recon_model;
  Eigen::VectorXd truth;
  Phantom phantom;
};

const char* kCase1 = R"({
  "case": "case1",
  "sim_mesh": {"type": "disk", "rings": 22},
  "recon_mesh": {"type": "disk", "rings": 16},
  "protocol": {"type": "adjacent"},
  "bounds": "fine"
})";

// ---------------------------------------------------------------------------

Criterion forward_correctness() {
  Criterion c;
  const auto t0 = Clock::now();
  const auto em = generate_disk_mesh(1.0, 16, 16, 0.5);
  const auto prot = adjacent_protocol(16, false, false);
  const ForwardModel fm(em.mesh, em.layout, prot);
  Eigen::VectorXd sigma(em.mesh.num_nodes());
  for (Index i = 0; i < sigma.size(); ++i)
    sigma(i) = 1.0 + 0.5 * std::exp(-8.0 * (em.mesh.nodes().row(i) - Eigen::RowVector2d(0.3, -0.2)).squaredNorm());
  const auto sol = fm.solve(sigma);
  const double runtime = seconds_since(t0);
  const Eigen::VectorXd& v = sol.measurements;

  double recip = 0.0;
  const auto& m = prot.measurements();
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (reciprocal(prot, m[i], m[j]))
        recip = std::max(recip, std::abs(v(static_cast<Index>(i)) - v(static_cast<Index>(j))));
  recip /= v.cwiseAbs().maxCoeff();

  double conservation = 0.0, zero_sum = 0.0;
  for (Index q = 0; q < prot.num_injections(); ++q) {
    const auto& u = sol.electrode_voltages[static_cast<std::size_t>(q)];
    const Eigen::VectorXd want = prot.current_pattern(q);
    conservation = std::max(conservation,
                            (fm.electrode_currents(sol.potentials[static_cast<std::size_t>(q)], u) - want).norm() /
                                want.norm());
    zero_sum = std::max(zero_sum, std::abs(u.sum()) / u.cwiseAbs().maxCoeff());
  }
  c.note("N " + std::to_string(em.mesh.num_nodes()) + ", M " + std::to_string(v.size()));
  c.note("reciprocity " + fmt("%.1e", recip) + ", currents " + fmt("%.1e", conservation) + ", sum U " +
         fmt("%.1e", zero_sum) + ", " + fmt("%.2f s", runtime));
  c.check(em.mesh.num_nodes() > 1500 && em.mesh.num_nodes() < 2600, "mesh size near 2000 nodes");
  c.check(v.size() == 256, "256 measurements");
  c.check(recip < 1e-10, "reciprocity");
  c.check(conservation < 1e-9, "current conservation");
  c.check(zero_sum < 1e-12, "sum of electrode voltages");
  c.check(runtime < 5.0, "runtime");
  return c;
}

Criterion jacobian_accuracy() {
  Criterion c;
  const auto t0 = Clock::now();
  std::mt19937 rng(2024);
  double worst2d = 0.0, worst3d = 0.0;
  {
    const auto em = generate_disk_mesh(1.0, 16, 16, 0.5);
    const ForwardModel fm(em.mesh, em.layout, adjacent_protocol(16, true, true));
    Eigen::VectorXd sigma(em.mesh.num_nodes());
    for (Index i = 0; i < sigma.size(); ++i) sigma(i) = 1.0 + 0.3 * std::sin(2.0 * em.mesh.nodes()(i, 0));
    const Eigen::MatrixXd j = fm.jacobian(sigma);
    std::uniform_int_distribution<Index> row(0, j.rows() - 1), col(0, j.cols() - 1);
    for (int k = 0; k < 20; ++k) {
      // Entries well below the row scale carry no information at double precision.
      Index mi = row(rng), ni = col(rng);
      while (std::abs(j(mi, ni)) < 1e-3 * j.row(mi).cwiseAbs().maxCoeff()) {
        mi = row(rng);
        ni = col(rng);
      }
      const double h = 1e-4 * sigma(ni);
      Eigen::VectorXd sp = sigma, sm = sigma;
      sp(ni) += h;
      sm(ni) -= h;
      const double fd = (fm.measure(sp)(mi) - fm.measure(sm)(mi)) / (2 * h);
      worst2d = std::max(worst2d, std::abs(fd - j(mi, ni)) / std::abs(j(mi, ni)));
    }
  }
  {
    const auto em = generate_cylinder_mesh(1.0, 1.0, 4, 1, 8, {3, 0.5, 0.05});
    const auto prot = adjacent_protocol(8, false, false);
    Eigen::VectorXd sigma(em.mesh.num_nodes());
    for (Index i = 0; i < sigma.size(); ++i) sigma(i) = 1.0 + 0.3 * em.mesh.nodes()(i, 2);
    const Eigen::MatrixXd j = jacobian(em.mesh, em.layout, prot, sigma);
    std::uniform_int_distribution<Index> row(0, j.rows() - 1), col(0, j.cols() - 1);
    for (int k = 0; k < 10; ++k) {
      Index mi = row(rng), ni = col(rng);
      while (std::abs(j(mi, ni)) < 1e-3 * j.row(mi).cwiseAbs().maxCoeff()) {
        mi = row(rng);
        ni = col(rng);
      }
      const double h = 1e-5;
      Eigen::VectorXd sp = sigma, sm = sigma;
      sp(ni) += h;
      sm(ni) -= h;
      const long double fd = (oracle::cem_measure(em.mesh, em.layout, prot, sp)(mi) -
                              oracle::cem_measure(em.mesh, em.layout, prot, sm)(mi)) /
                             (2.0L * h);
      worst3d = std::max(worst3d, static_cast<double>(std::abs(fd - j(mi, ni)) / std::abs(j(mi, ni))));
    }
  }
  const double runtime = seconds_since(t0);
  c.note("2D worst " + fmt("%.1e", worst2d) + ", 3D worst " + fmt("%.1e", worst3d) + ", " + fmt("%.1f s", runtime));
  c.check(worst2d < 1e-4, "2D central differences");
  c.check(worst3d < 1e-4, "3D central differences");
  c.check(runtime < 30.0, "runtime");
  return c;
}

Criterion protocol_counts() {
  Criterion c;
  const Index m = adjacent_protocol(16, true, true).num_measurements();
  const Index inj = tank_protocol({1, 5, 9, 13}, 16).num_injections();
  c.note("adjacent filtered M " + std::to_string(m) + ", tank injections " + std::to_string(inj));
  c.check(m == 104, "adjacent M = 104");
  c.check(inj == 54, "tank 54 injections");
  return c;
}

Criterion basis_properties() {
  Criterion c;
  const auto small = generate_disk_mesh(1.0, 6, 8, 0.5);
  const Index n = small.mesh.num_nodes();
  const auto full = build_basis(build_adjacency(small.mesh), n);
  const Eigen::VectorXd dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(oracle::dense_laplacian(small.mesh)).eigenvalues();
  const double eig_err = (full.eigenvalues - dense).cwiseAbs().maxCoeff();
  c.note("dense oracle N " + std::to_string(n) + " max eigenvalue error " + fmt("%.1e", eig_err));
  c.check(n <= 200, "oracle graph size");
  c.check(eig_err < 1e-8, "dense eigenvalue agreement");

  const auto disk = generate_disk_mesh(1.0, 16, 16, 0.5);
  const auto cyl = generate_cylinder_mesh(1.0, 1.6, 9, 4, 4, {6, 0.5, 0.01});
  for (const auto* em : {&disk, &cyl}) {
    const Index nn = em->mesh.num_nodes();
    const auto b = basis_for_mesh(em->mesh, default_truncation(nn, TruncationRegime::simulation));
    const double ortho = (b.vectors.transpose() * b.vectors - Eigen::MatrixXd::Identity(b.size(), b.size()))
                             .cwiseAbs()
                             .maxCoeff();
    const double constant =
        (b.vectors.col(0).array() - 1.0 / std::sqrt(static_cast<double>(nn))).abs().maxCoeff();
    const std::string dim = std::to_string(em->mesh.dimension()) + "D";
    c.note(dim + " N " + std::to_string(nn) + " N_b " + std::to_string(b.size()) + " orthonormality " +
           fmt("%.1e", ortho) + " lambda1 " + fmt("%.1e", b.eigenvalues(0)));
    c.check(ortho < 1e-10, dim + " B^T B = I");
    c.check(std::abs(b.eigenvalues(0)) < 1e-10, dim + " lambda1 = 0");
    c.check(constant < 1e-10, dim + " constant first eigenvector");
  }
  return c;
}

Criterion bound_map() {
  Criterion c;
  Eigen::VectorXd s0(4);
  s0 << 0.21, 0.7, 1.3, 1.99;
  const BoundMap map(0.2, 2.0, s0);
  const double h0 = (map.map(Eigen::VectorXd::Zero(4)) - s0).cwiseAbs().maxCoeff();
  bool inside = true;
  for (double x = -1000.0; x <= 1000.0; x += 0.25) {
    const Eigen::VectorXd s = map.map(Eigen::VectorXd::Constant(4, x));
    inside = inside && s.minCoeff() > 0.2 && s.maxCoeff() < 2.0;
  }
  double deriv = 0.0;
  for (double x : {-3.0, -0.5, 0.0, 0.8, 2.0}) {
    const Eigen::VectorXd cv = Eigen::VectorXd::Constant(4, x);
    const double h = 1e-5;
    const Eigen::VectorXd fd = (map.map(cv.array() + h) - map.map(cv.array() - h)) / (2 * h);
    deriv = std::max(deriv, (fd - map.derivative(map.map(cv))).cwiseAbs().maxCoeff());
  }
  const LMFConfig lmf;
  const bool defaults = lmf.rho1 == 0.25 && lmf.rho2 == 0.75 && lmf.gamma1 == 0.25 && lmf.gamma2 == 4.0 &&
                        lmf.mu0 == 1e-4;
  const bool branches = fletcher_update(1e-4, 0.1, lmf) == 4e-4 && fletcher_update(1e-4, 0.5, lmf) == 1e-4 &&
                        fletcher_update(1e-4, 0.9, lmf) == 2.5e-5;
  c.note("|H(0) - sigma0| " + fmt("%.1e", h0) + ", derivative error " + fmt("%.1e", deriv));
  c.check(h0 < 1e-12, "H(0) = sigma0");
  c.check(inside, "outputs strictly inside the bounds");
  c.check(deriv < 1e-8, "derivative vs finite differences");
  c.check(defaults, "LMF defaults");
  c.check(branches, "Fletcher branches");
  return c;
}

Criterion tv_schedule() {
  Criterion c;
  const double l0 = 2.7e-3;
  const double want[] = {l0, std::sqrt(10.0) * l0, 10.0 * l0, 10.0 * std::sqrt(10.0) * l0};
  const double snr[] = {60, 50, 40, 30};
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(tv_weight(snr[i], l0) - want[i]) / want[i]);
  c.note("max relative error " + fmt("%.1e", worst));
  c.check(worst < 1e-12, "lambda(SNR)");
  return c;
}

Criterion end_to_end() {
  Criterion c;
  const auto t0 = Clock::now();
  const Study s(kCase1);
  const Index n = s.mesh().num_nodes();
  const GraphBasis basis = basis_for_mesh(s.mesh(), default_truncation(n, TruncationRegime::simulation));
  const auto [l, u] = s.pipeline.bounds();
  std::vector<double> e_bcsr, e_gn, e_ld;
  int worst_iters = 0;
  bool in_bounds = true, decreasing = true, converged = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Eigen::VectorXd v = s.data(60.0, seed);
    const ReconResult r = s.bcsr(v, basis, true, 60.0);
    in_bounds = in_bounds && r.sigma_min > l && r.sigma_max < u;
    const auto obj = r.accepted_objectives();
    for (std::size_t k = 1; k < obj.size(); ++k) decreasing = decreasing && obj[k] < obj[k - 1];
    converged = converged && r.termination == Termination::step_tol && r.outer_iterations <= 30;
    worst_iters = std::max(worst_iters, r.outer_iterations);
    e_bcsr.push_back(rmse(s.truth, r.sigma));

    const Calibration cal = s.calibrate(v);
    e_gn.push_back(rmse(s.truth, gn_l2_reconstruct(s.recon_model, v, cal.sigma0, 1e-2, 10).sigma));
    const LDOperator ld = build_ld(s.recon_model, cal.sigma0, 1e-2);
    e_ld.push_back(rmse(s.truth, ld_absolute(ld, s.recon_model, v)));
  }
  const double runtime = seconds_since(t0);
  c.note("N " + std::to_string(n) + ", N_b " + std::to_string(basis.size()) + ", max iterations " +
         std::to_string(worst_iters));
  c.note("mean RMSE bcsr " + fmt("%.4f", mean(e_bcsr)) + ", gn_l2 " + fmt("%.4f", mean(e_gn)) + ", ld " +
         fmt("%.4f", mean(e_ld)) + ", " + fmt("%.0f s", runtime));
  c.check(in_bounds, "iterates within bounds");
  c.check(decreasing, "objective decreasing on accepted steps");
  c.check(converged, "step_tol within 30 iterations");
  c.check(mean(e_bcsr) < mean(e_gn), "RMSE below gn_l2");
  c.check(mean(e_bcsr) < mean(e_ld), "RMSE below LD");
  c.check(runtime < 300.0, "runtime");
  return c;
}

Criterion noise_trend() {
  Criterion c;
  const Study s(kCase1);
  const GraphBasis basis =
      basis_for_mesh(s.mesh(), default_truncation(s.mesh().num_nodes(), TruncationRegime::simulation));
  std::vector<double> levels;
  std::string line;
  for (double snr : {60.0, 50.0, 40.0, 30.0}) {
    std::vector<double> q;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const ReconResult r = s.bcsr(s.data(snr, seed), basis, true, snr);
      q.push_back(ssim(s.mesh(), s.truth, r.sigma));
    }
    levels.push_back(mean(q));
    line += (line.empty() ? "" : ", ") + fmt("%.0f dB ", snr) + fmt("%.4f", levels.back());
  }
  c.note("mean SSIM " + line);
  for (std::size_t k = 1; k < levels.size(); ++k) c.check(levels[k] <= levels[k - 1] + 0.01, "SSIM trend");
  return c;
}

Criterion basis_size_robustness() {
  Criterion c;
  const Study s(kCase1);
  const GraphBasis big = basis_for_mesh(s.mesh(), 500);
  std::vector<double> means;
  std::string line;
  for (Index nb : {100, 200, 500}) {
    const GraphBasis b = nb == big.size() ? big : big.truncated(nb);
    std::vector<double> e;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) e.push_back(rmse(s.truth, s.bcsr(s.data(60.0, seed), b, false, 60.0).sigma));
    means.push_back(mean(e));
    line += (line.empty() ? "" : ", ") + std::to_string(nb) + ": " + fmt("%.4f", means.back());
  }
  const double spread = (*std::max_element(means.begin(), means.end()) - *std::min_element(means.begin(), means.end())) /
                        mean(means);
  c.note("mean RMSE by N_b " + line + ", spread " + fmt("%.1f%%", 100 * spread));
  c.check(spread < 0.25, "spread below 25% of mean");
  return c;
}

Criterion warm_start_fixed_point() {
  Criterion c;
  const Study s(kCase1);
  const GraphBasis basis =
      basis_for_mesh(s.mesh(), default_truncation(s.mesh().num_nodes(), TruncationRegime::simulation));
  const Eigen::VectorXd v = s.data(60.0, 1);
  const Calibration cal = s.calibrate(v);
  const auto [l, u] = s.pipeline.bounds();
  const BoundMap map = warm_start(cal.sigma0, l, u);
  const Eigen::VectorXd target = difference_target(s.recon_model, cal.sigma0, v, v);
  ReconOptions o;
  o.tv.enabled = true;
  const ReconResult r = reconstruct(s.recon_model, target, basis, map, o);
  const double diff = (r.sigma - cal.sigma0).cwiseAbs().maxCoeff();
  c.note("accepted steps " + std::to_string(r.accepted_steps) + ", max |sigma - baseline| " + fmt("%.1e", diff) +
         ", termination " + std::string(to_string(r.termination)));
  c.check(r.accepted_steps == 0, "zero accepted steps");
  c.check(diff == 0.0, "baseline returned exactly");
  return c;
}

Criterion smoke_3d() {
  Criterion c;
  const auto t0 = Clock::now();
  const Study s(R"({
    "case": "case3d",
    "sim_mesh": {"type": "cylinder", "layers": 20, "radial_rings": 10, "electrodes_per_ring": 4},
    "recon_mesh": {"type": "cylinder", "layers": 13, "radial_rings": 8, "electrodes_per_ring": 4},
    "protocol": {"type": "adjacent"},
    "bounds": "fine"
  })");
  const Index n = s.mesh().num_nodes();
  const GraphBasis basis = basis_for_mesh(s.mesh(), default_truncation(n, TruncationRegime::simulation));
  const ReconResult r = s.bcsr(s.data(60.0, 1), basis, true, 60.0);
  const double cc = pearson(s.truth, r.sigma);
  const double runtime = seconds_since(t0);
  c.note("N " + std::to_string(n) + ", L " + std::to_string(s.pipeline.recon_mesh().layout.size()) + ", N_b " +
         std::to_string(basis.size()) + ", " + std::to_string(r.outer_iterations) + " iterations (" +
         std::string(to_string(r.termination)) + "), CC " + fmt("%.3f", cc) + ", " + fmt("%.0f s", runtime));
  c.check(cc > 0.5, "CC above 0.5");
  c.check(runtime < 900.0, "runtime");
  return c;
}

Criterion ventilation() {
  Criterion c;
  const auto cs = case_library("case5_lung");
  const auto em = generate_disk_mesh(1.0, 16, 16, 0.5);
  const Mesh& mesh = em.mesh;
  const auto left = element_mask(mesh, *cs.left_lung);
  const auto right = element_mask(mesh, *cs.right_lung);
  double vol = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e)
    if (left[static_cast<std::size_t>(e)]) vol += mesh.element_measure(e);
  const double f = ventilation_index(mesh, -Eigen::VectorXd::Ones(mesh.num_nodes()), left);
  c.note("uniform frame relative error " + fmt("%.1e", std::abs(f - vol) / vol));
  c.check(std::abs(f - vol) <= 1e-9 * vol, "uniform decrease gives region volume");

  // Breathing cycle with the right lung changing 1.5 times as much as the left.
  auto frame = [&](const Mesh& m, double t) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(m.num_nodes());
    for (Index i = 0; i < m.num_nodes(); ++i) {
      const Eigen::VectorXd x = m.nodes().row(i).transpose();
      if (contains(*cs.left_lung, x)) d(i) = -0.1 * t;
      if (contains(*cs.right_lung, x)) d(i) = -0.15 * t;
    }
    return d;
  };
  const std::vector<double> ts{0, 0.25, 0.5, 0.75, 1, 0.75, 0.5, 0.25, 0};
  std::vector<Eigen::VectorXd> frames;
  for (double t : ts) frames.push_back(frame(mesh, t));
  const auto series = ventilation_series(mesh, frames, left, right);
  c.note("synthetic sequence: peak frame " + std::to_string(series.peak) + ", right fraction " +
         fmt("%.4f", series.right_fraction));
  c.check(series.peak == 4, "peak at full inspiration");
  c.check(std::abs(series.right_fraction - 0.60) <= 0.02, "right fraction 0.60 +/- 0.02");

  // Same sequence through difference-mode BC-SR; reported, not gated.
  const auto sim = generate_disk_mesh(1.0, 22, 16, 0.5);
  const auto prot = adjacent_protocol(16, false, false);
  const ForwardModel sm(sim.mesh, sim.layout, prot), rm(mesh, em.layout, prot);
  const Eigen::VectorXd base_sim = rasterize_phantom(cs.phantom, sim.mesh);
  const Eigen::VectorXd vb = add_noise(sm.measure(base_sim), 60.0, 100);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.num_nodes());
  const Calibration cal = calibrate_sigma0(vb, rm.measure(ones), ones, cs.coarse_bounds[0], cs.coarse_bounds[1]);
  const BoundMap map = warm_start(cal.sigma0, cs.coarse_bounds[0], cs.coarse_bounds[1]);
  const GraphBasis basis = basis_for_mesh(mesh, default_truncation(mesh.num_nodes(), TruncationRegime::simulation));
  std::vector<Eigen::VectorXd> recon;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const Eigen::VectorXd vt = add_noise(sm.measure(base_sim + frame(sim.mesh, ts[k])), 60.0, 200 + k);
    const ReconResult r = reconstruct(rm, difference_target(rm, cal.sigma0, vb, vt), basis, map);
    recon.push_back(r.sigma - cal.sigma0);
  }
  const auto rs = ventilation_series(mesh, recon, left, right);
  c.note("reconstructed sequence: peak frame " + std::to_string(rs.peak) + ", right fraction " +
         fmt("%.4f", rs.right_fraction) + " (informational)");
  return c;
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* env = std::getenv("BCSR_ACCEPT_ONLY")) {
    std::stringstream ss(env);
    std::string tok;
    while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
  }
  const std::vector<std::pair<const char*, std::function<Criterion()>>> criteria{
      {"forward correctness", forward_correctness},
      {"jacobian finite differences", jacobian_accuracy},
      {"protocol counts", protocol_counts},
      {"graph basis", basis_properties},
      {"bound map and Fletcher rule", bound_map},
      {"SNR-adaptive TV weight", tv_schedule},
      {"BC-SR end to end (case1, 60 dB)", end_to_end},
      {"noise trend", noise_trend},
      {"N_b robustness", basis_size_robustness},
      {"warm-start fixed point", warm_start_fixed_point},
      {"3D smoke test", smoke_3d},
      {"ventilation index", ventilation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Criterion c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.check(false, std::string("exception: ") + e.what());
    }
    std::printf("[%s] %2d %s: %s\n", c.pass() ? "PASS" : "FAIL", id, criteria[i].first, c.summary().c_str());
    std::fflush(stdout);
    failed += c.pass() ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
