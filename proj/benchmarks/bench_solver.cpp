#include <conecap/mesh.hpp>
#include <conecap/solver.hpp>

#include <benchmark/benchmark.h>

#include <memory>

namespace {

using namespace conecap;

std::shared_ptr<const MeridianMesh> sphere_mesh(int n_theta, int cells_per_octave) {
  const ConeSpec cone = ConeSpec::circular(3, kPi / 2);
  const SigmaCurve curve = SigmaCurve::sphere(1.0, cone.theta_max());
  MeshOptions opt;
  opt.grading = Grading::Nested;
  opt.cells_per_octave = cells_per_octave;
  const int n_rho = nested_radial_cells(curve, 16.0, cells_per_octave);
  return std::make_shared<const MeridianMesh>(build_mesh(curve, cone, 16.0, n_theta, n_rho, opt));
}

void BM_Assembly(benchmark::State& state) {
  const auto mesh = sphere_mesh(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  EnergyAssembler assembler(*mesh, DofMap::dirichlet(*mesh));
  std::vector<double> u(mesh->node_count());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = 1.0 / mesh->node_rho(k);
  EnergyEvaluation eval;
  for (auto _ : state) {
    assembler.evaluate(u, 1.5, 1e-3, EnergyAssembler::kAll, eval);
    benchmark::DoNotOptimize(eval.energy);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(mesh->element_count()));
}
BENCHMARK(BM_Assembly)->Arg(16)->Arg(32)->Arg(64);

void BM_SolveP(benchmark::State& state) {
  const auto mesh = sphere_mesh(16, 16);
  SolverConfig cfg;
  cfg.p = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) {
    auto [field, report] = solve_potential(mesh, cfg);
    benchmark::DoNotOptimize(report.capacity.capacity);
  }
}
BENCHMARK(BM_SolveP)->Arg(15)->Arg(20)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_TruncationStudy(benchmark::State& state) {
  const ConeSpec cone = ConeSpec::circular(3, kPi / 2);
  const SigmaCurve curve = SigmaCurve::cosine_series(1.0, {0.2}, cone.theta_max());
  MeshSpec spec;
  spec.options.grading = Grading::Nested;
  SolverConfig cfg;
  const std::vector<double> radii{8.0, 16.0, 32.0};
  for (auto _ : state) {
    auto study = truncation_study(curve, cone, spec, cfg, radii);
    benchmark::DoNotOptimize(study.fit.limit);
  }
}
BENCHMARK(BM_TruncationStudy)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
