#include <benchmark/benchmark.h>

#include <random>

#include "dgflow/energy.hpp"
#include "dgflow/generate.hpp"
#include "dgflow/integrators.hpp"
#include "dgflow/models.hpp"
#include "dgflow/systems.hpp"
#include "dgflow/train.hpp"

using namespace dgflow;

namespace {

Tensor normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(rows * cols);
  for (double& x : v) x = nd(rng);
  return Tensor::matrix(rows, cols, std::move(v));
}

EnergyModel mlp(std::size_t dim, std::size_t width) {
  ArchSpec a;
  a.state_dim = dim;
  a.hidden = {width, width};
  return EnergyModel(a, 1);
}

}  // namespace

// Ordinary gradient against the discrete gradient of the same network; the
// ratio is the overhead of automatic discrete differentiation.
void BM_Gradient(benchmark::State& st) {
  const EnergyModel h = mlp(2, static_cast<std::size_t>(st.range(0)));
  const Tensor u = normal(200, 2, 1);
  for (auto _ : st) benchmark::DoNotOptimize(gradient(h, u));
  st.SetItemsProcessed(st.iterations() * 200);
}
BENCHMARK(BM_Gradient)->Arg(50)->Arg(200);

void BM_DiscreteGradient(benchmark::State& st) {
  const EnergyModel h = mlp(2, static_cast<std::size_t>(st.range(0)));
  const Tensor u = normal(200, 2, 1), v = normal(200, 2, 2);
  for (auto _ : st) benchmark::DoNotOptimize(discrete_gradient(h, u, v));
  st.SetItemsProcessed(st.iterations() * 200);
}
BENCHMARK(BM_DiscreteGradient)->Arg(50)->Arg(200);

void BM_TanhForwardBackward(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Tensor x = normal(n / 100, 100, 3);
  for (auto _ : st) {
    Tape tape;
    const Var v = tape.leaf(x);
    const Var y = sum(tanh(v));
    benchmark::DoNotOptimize(tape.backward(y, {v}));
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TanhForwardBackward)->Arg(10000)->Arg(1000000);

void BM_DgStepKdv(benchmark::State& st) {
  const KdvGenConfig gc;
  const auto sys = kdv_system(gc.n, gc.dx, gc.alpha, gc.beta);
  const Tensor u0 = kdv_initial_state(gc, 1);
  DgSolverConfig cfg;
  cfg.tol = 1e-12;
  for (auto _ : st) benchmark::DoNotOptimize(step_discrete_gradient(*sys, sys->gspec(), u0, gc.dt, cfg));
}
BENCHMARK(BM_DgStepKdv);

void BM_DgStepLearnedConv(benchmark::State& st) {
  const KdvGenConfig gc;
  ArchSpec a;
  a.kind = ArchKind::conv;
  a.state_dim = gc.n;
  a.hidden = {200, 200};
  a.dx = gc.dx;
  const EnergyModel h(a, 1);
  const GSpec g = GSpec::central_diff(gc.n, gc.dx);
  const Tensor u0 = kdv_initial_state(gc, 1);
  for (auto _ : st) benchmark::DoNotOptimize(step_discrete_gradient(h, g, u0, gc.dt));
}
BENCHMARK(BM_DgStepLearnedConv);

// One Adam iteration of DGNet on mass-spring pairs (batch 200, single precision).
void BM_TrainIterationMassSpring(benchmark::State& st) {
  OdeGenConfig gc = OdeGenConfig::defaults("mass_spring");
  gc.deterministic = true;
  const Dataset ds = gen_ode(gc);
  const PairSet pairs = make_pairs(ds.train, ds.dt);
  const auto sys = ode_system("mass_spring");
  TrainConfig tc;
  tc.iterations = 1;
  tc.precision = Precision::f32;
  ArchSpec a;
  EnergyModel h(a, 0, Precision::f32);
  for (auto _ : st) benchmark::DoNotOptimize(train_energy(h, sys->gspec(), pairs, tc));
}
BENCHMARK(BM_TrainIterationMassSpring)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
