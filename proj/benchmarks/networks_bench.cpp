#include <benchmark/benchmark.h>

#include <random>

#include "eapo/networks.hpp"

namespace {

using namespace eapo;

Matrix inputs(Eigen::Index n) {
  Rng rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(kObservationSize, n);
  for (auto& v : x.reshaped()) v = normal(rng);
  return x;
}

// Arg: hidden width (two hidden layers), batch.
void BM_MlpForward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const Eigen::Index batch = state.range(1);
  Rng rng(1);
  const MlpLayout layout({kObservationSize, width, width, 2});
  Vector params = Vector::Zero(layout.num_params());
  orthogonal_init(layout, params, 1.0, rng);
  const Matrix x = inputs(batch);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(layout, params, x));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Args({256, 64})->Args({512, 64})->Args({512, 1024});

void BM_MlpForwardBackward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const Eigen::Index batch = state.range(1);
  Rng rng(1);
  const MlpLayout layout({kObservationSize, width, width, 2});
  Vector params = Vector::Zero(layout.num_params());
  orthogonal_init(layout, params, 1.0, rng);
  const Matrix x = inputs(batch);
  const Matrix up = Matrix::Ones(2, batch);
  Vector grad = Vector::Zero(layout.num_params());
  MlpCache cache;
  for (auto _ : state) {
    mlp_forward(layout, params, x, &cache);
    mlp_backward(layout, params, cache, up, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Args({256, 1024})->Args({512, 1024});

void BM_SampleAction(benchmark::State& state) {
  Rng rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_action(0.3, 1.2, rng));
  }
}
BENCHMARK(BM_SampleAction);

}  // namespace
