#include <benchmark/benchmark.h>

#include <random>

#include "eapo/trainer.hpp"

namespace {

using namespace eapo;

void BM_DualGae(benchmark::State& state) {
  const TrainerConfig cfg;
  Rng rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  RolloutBuffer b = RolloutBuffer::allocate(cfg.n_envs, cfg.n_rollout_steps);
  for (Vector* v : {&b.rewards, &b.entropies, &b.v_r, &b.v_e, &b.next_v_r, &b.next_v_e}) {
    for (auto& x : *v) x = normal(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_dual_gae(b, {0.1, 0.2}, cfg));
  }
  state.SetItemsProcessed(state.iterations() * b.size());
}
BENCHMARK(BM_DualGae);

void BM_CollectRollouts(benchmark::State& state) {
  const TrainerConfig cfg;
  const TrainingState s = init_training_state(cfg, 1);
  VectorEnv envs(RobotVariant::Pendubot, PlantParams{}, EnvConfig{}, cfg.n_envs, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(collect_rollouts(envs, s.policy, s.critic, cfg));
  }
  state.SetItemsProcessed(state.iterations() * cfg.frames_per_iteration());
}
BENCHMARK(BM_CollectRollouts)->Unit(benchmark::kMillisecond);

void BM_PpoLossMinibatch(benchmark::State& state) {
  const TrainerConfig cfg;
  const TrainingState s = init_training_state(cfg, 1);
  Rng rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Minibatch mb;
  const int n = cfg.batch_size;
  mb.observations.resize(kObservationSize, n);
  for (auto& v : mb.observations.reshaped()) v = normal(rng);
  mb.actions = Vector::Constant(n, 0.2);
  mb.old_log_probs = Vector::Constant(n, -1.0);
  mb.advantages.resize(n);
  for (auto& v : mb.advantages) v = normal(rng);
  mb.target_r = Vector::Zero(n);
  mb.target_e = Vector::Zero(n);
  Vector pg;
  Vector cg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ppo_loss(s.policy, s.critic, mb, cfg, &pg, &cg));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_PpoLossMinibatch)->Unit(benchmark::kMillisecond);

}  // namespace
