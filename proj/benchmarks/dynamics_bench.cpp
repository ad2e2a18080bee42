#include <benchmark/benchmark.h>

#include "eapo/dynamics.hpp"
#include "eapo/environment.hpp"

namespace {

using namespace eapo;

void BM_ForwardDynamics(benchmark::State& state) {
  const PlantParams p;
  const PlantState s{0.4, -1.1, 2.0, -0.5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_dynamics(s, {0.5, 0.0}, p));
  }
}
BENCHMARK(BM_ForwardDynamics);

// One control step: integrator_substeps RK4 substeps.
void BM_Step(benchmark::State& state) {
  PlantParams p;
  p.integrator_substeps = static_cast<int>(state.range(0));
  PlantState s{0.4, -1.1, 2.0, -0.5};
  for (auto _ : state) {
    s = step(s, {0.1, 0.0}, p);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Step)->Arg(1)->Arg(5)->Arg(20);

void BM_EnvStep(benchmark::State& state) {
  Environment env(RobotVariant::Pendubot, PlantParams{}, EnvConfig{}, make_stream(1, 0));
  env.reset();
  double a = 0.3;
  for (auto _ : state) {
    const StepOutcome out = env.step(a);
    if (out.truncated) env.reset();
    a = -a;
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_EnvStep);

}  // namespace
