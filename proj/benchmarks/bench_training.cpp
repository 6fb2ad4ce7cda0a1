#include <benchmark/benchmark.h>

#include <vector>

#include "qpinn/loss.hpp"
#include "qpinn/model.hpp"
#include "qpinn/oracle.hpp"
#include "qpinn/pde.hpp"

using namespace qpinn;

// One loss + gradient evaluation on the 13x13 desk grid, per model kind.
static void BM_LossGradient(benchmark::State& state) {
  const auto p = pde::default_problem_1d();
  train::ModelConfig mc;
  mc.kind = static_cast<train::ModelKind>(state.range(0));
  const auto m = train::build_model(mc, p);
  const auto c = pde::sample_collocation(p, 13, 13);
  train::LossEvaluator ev(m, p, c, {});
  const auto theta = m.initial_parameters(7);
  std::vector<double> g(theta.size());
  for (auto _ : state) benchmark::DoNotOptimize(ev.value_and_gradient(theta, g).total);
  state.SetLabel(train::to_string(mc.kind));
}
BENCHMARK(BM_LossGradient)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

static void BM_Rk45(benchmark::State& state) {
  const auto p = state.range(0) == 1 ? pde::default_problem_1d() : pde::default_problem_2d();
  const std::size_t nx = p.dim == 1 ? 201 : 50;
  const std::vector<double> times{p.t_max};
  for (auto _ : state) benchmark::DoNotOptimize(oracle::rk45_solve(p, nx, times).values.data());
}
BENCHMARK(BM_Rk45)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
