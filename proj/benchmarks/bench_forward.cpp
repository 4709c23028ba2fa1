#include <map>

#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "bcsr/basis.hpp"
#include "bcsr/boundmap.hpp"
#include "bcsr/forward.hpp"
#include "bcsr/protocol.hpp"
#include "bcsr/recon.hpp"

namespace {

const bcsr::ElectrodeMesh& disk(int rings) {
  static std::map<int, bcsr::ElectrodeMesh> cache;
  auto it = cache.find(rings);
  if (it == cache.end()) it = cache.emplace(rings, bcsr::generate_disk_mesh(1.0, rings, 16, 0.5)).first;
  return it->second;
}

void BM_ForwardSolve(benchmark::State& state) {
  const auto& m = disk(static_cast<int>(state.range(0)));
  const bcsr::ForwardModel model(m.mesh, m.layout, bcsr::adjacent_protocol(16, false, false));
  const Eigen::VectorXd sigma = Eigen::VectorXd::Ones(m.mesh.num_nodes());
  for (auto _ : state) benchmark::DoNotOptimize(model.measure(sigma));
  state.counters["nodes"] = static_cast<double>(m.mesh.num_nodes());
}
BENCHMARK(BM_ForwardSolve)->Arg(8)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_Jacobian(benchmark::State& state) {
  const auto& m = disk(static_cast<int>(state.range(0)));
  const bcsr::ForwardModel model(m.mesh, m.layout, bcsr::adjacent_protocol(16, false, false));
  const Eigen::VectorXd sigma = Eigen::VectorXd::Ones(m.mesh.num_nodes());
  for (auto _ : state) benchmark::DoNotOptimize(model.linearize(sigma));
  state.counters["nodes"] = static_cast<double>(m.mesh.num_nodes());
}
BENCHMARK(BM_Jacobian)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Basis(benchmark::State& state) {
  const auto& m = disk(static_cast<int>(state.range(0)));
  const auto w = bcsr::build_adjacency(m.mesh);
  const auto nb = bcsr::default_truncation(m.mesh.num_nodes(), bcsr::TruncationRegime::simulation);
  for (auto _ : state) benchmark::DoNotOptimize(bcsr::build_basis(w, nb));
}
BENCHMARK(BM_Basis)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_LatentIteration(benchmark::State& state) {
  const auto& m = disk(12);
  const bcsr::ForwardModel model(m.mesh, m.layout, bcsr::adjacent_protocol(16, false, false));
  const auto basis = bcsr::basis_for_mesh(m.mesh, bcsr::default_truncation(m.mesh.num_nodes(),
                                                                             bcsr::TruncationRegime::simulation));
  const bcsr::BoundMap map(0.2, 2.0, Eigen::VectorXd::Ones(m.mesh.num_nodes()));
  const auto lin = model.linearize(map.sigma0());
  for (auto _ : state) {
    const auto ja = bcsr::latent_jacobian(lin.jacobian, map.derivative(map.sigma0()), basis.vectors);
    benchmark::DoNotOptimize(bcsr::lmf_step(ja, lin.solution.measurements, 1e-4));
  }
}
BENCHMARK(BM_LatentIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
