#include <benchmark/benchmark.h>

#include "varinv/fem.hpp"
#include "varinv/harness.hpp"
#include "varinv/optimizer.hpp"

namespace {

using namespace varinv;

void BM_StiffnessAssembly(benchmark::State& state) {
  const TriMesh mesh = build_structured_mesh(static_cast<int>(state.range(0)));
  const ElementGradients eg = p1_gradients(mesh);
  const Eigen::VectorXd sigma = Eigen::VectorXd::Constant(mesh.triangle_count(), 1.3);
  for (auto _ : state) {
    SparseMat k = weighted_stiffness(mesh, eg, sigma);
    benchmark::DoNotOptimize(k);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_StiffnessAssembly)->RangeMultiplier(2)->Range(8, 32)->Complexity();

void BM_FractionalEigendecomposition(benchmark::State& state) {
  const TriMesh mesh = build_structured_mesh(static_cast<int>(state.range(0)));
  const ElementGradients eg = p1_gradients(mesh);
  const SparseMat k = weighted_stiffness(mesh, eg, Eigen::VectorXd::Ones(mesh.triangle_count()));
  const SparseMat m = mass_matrix(mesh, eg);
  for (auto _ : state) {
    FractionalNormOperator op(k, m, 1.25);
    benchmark::DoNotOptimize(op);
  }
}
BENCHMARK(BM_FractionalEigendecomposition)->Arg(8)->Arg(16);

RunConfig bench_config(int n) {
  RunConfig cfg;
  cfg.mesh_n = n;
  cfg.experiments = 2;
  cfg.phantom.kind = PhantomSpec::Kind::affine;
  cfg.phantom.background = 1.0;
  cfg.sigma_lower = 0.5;
  cfg.sigma_upper = 2.0;
  cfg.delta = 0.0;
  return cfg;
}

void BM_ObjectiveGradient(benchmark::State& state) {
  const RunConfig cfg = bench_config(static_cast<int>(state.range(0)));
  const EitInstance inst = build_instance(cfg);
  const AlphaChoice alpha = alpha_schedule(cfg.reg, 0.0);
  const EitProblem problem = EitProblem::make(inst.mesh, inst.eg, inst.trace, inst.reg_ops,
                                              cfg.reg, inst.noisy, SolveMode::maao_ls,
                                              alpha.alpha);
  for (auto _ : state) {
    ObjectiveEval ev = problem.objective(inst.sigma_true, inst.state_true);
    benchmark::DoNotOptimize(ev);
  }
}
BENCHMARK(BM_ObjectiveGradient)->Arg(8)->Arg(16);

void BM_StatePolishPass(benchmark::State& state) {
  const RunConfig cfg = bench_config(8);
  const EitInstance inst = build_instance(cfg);
  const AlphaChoice alpha = alpha_schedule(cfg.reg, 0.0);
  const EitProblem problem = EitProblem::make(inst.mesh, inst.eg, inst.trace, inst.reg_ops,
                                              cfg.reg, inst.noisy, SolveMode::maao_ls,
                                              alpha.alpha);
  ConductivityField sigma0;
  StateEnsemble state0;
  make_default_start(problem, cfg.sigma_lower, cfg.sigma_upper, sigma0, state0);
  for (auto _ : state) {
    StateEnsemble polished = state_qp_polish(problem, sigma0, state0, 1e-6, nullptr, 50);
    benchmark::DoNotOptimize(polished);
  }
}
BENCHMARK(BM_StatePolishPass);

}  // namespace

BENCHMARK_MAIN();
