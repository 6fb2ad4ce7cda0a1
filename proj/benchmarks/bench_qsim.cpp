#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qpinn/qmodel.hpp"
#include "qpinn/qsim.hpp"

using namespace qpinn;

static void BM_RyLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto s = qsim::zero_state(n);
  for (auto _ : state) {
    for (std::size_t q = 0; q < n; ++q) s.ry(q, 0.1);
    benchmark::DoNotOptimize(s.amplitudes().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_RyLayer)->DenseRange(4, 16, 4);

static void BM_CnotRing(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto s = qsim::zero_state(n);
  for (std::size_t q = 0; q < n; ++q) s.ry(q, 0.3);
  for (auto _ : state) {
    for (std::size_t q = 0; q < n; ++q) s.cnot(q, (q + 1) % n);
    benchmark::DoNotOptimize(s.amplitudes().data());
  }
}
BENCHMARK(BM_CnotRing)->DenseRange(4, 16, 4);

namespace {

std::vector<double> random_angles(const qmodel::CircuitLayout& lay) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(-3.0, 3.0);
  std::vector<double> v(lay.num_angles());
  for (auto& x : v) x = a(rng);
  return v;
}

}  // namespace

// complex statevector path vs the real-amplitude kernel on the same circuit
static void BM_ExpectationComplex(benchmark::State& state) {
  const qmodel::CircuitLayout lay{static_cast<std::size_t>(state.range(0)), 5};
  const auto a = random_angles(lay);
  const std::vector<double> gamma(a.begin(), a.begin() + lay.n_qubits);
  const qmodel::VarParams th(lay, std::vector<double>(a.begin() + lay.n_qubits, a.end()));
  for (auto _ : state) benchmark::DoNotOptimize(qmodel::expectation(lay, gamma, th));
}
BENCHMARK(BM_ExpectationComplex)->Arg(4)->Arg(8);

static void BM_ExpectationReal(benchmark::State& state) {
  const qmodel::CircuitLayout lay{static_cast<std::size_t>(state.range(0)), 5};
  const auto a = random_angles(lay);
  for (auto _ : state) benchmark::DoNotOptimize(qmodel::evaluate_angles(lay, qmodel::Observable::all(), a));
}
BENCHMARK(BM_ExpectationReal)->Arg(4)->Arg(8);

static void BM_AdjointGradient(benchmark::State& state) {
  const qmodel::CircuitLayout lay{static_cast<std::size_t>(state.range(0)), 5};
  const auto a = random_angles(lay);
  std::vector<double> g(a.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(qmodel::evaluate_angles_with_gradient(lay, qmodel::Observable::all(), a, g));
  }
}
BENCHMARK(BM_AdjointGradient)->Arg(4)->Arg(8);
