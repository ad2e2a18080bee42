#ifndef EAPO_SETTINGS_HPP_
#define EAPO_SETTINGS_HPP_

#include <cstdint>
#include <vector>

#include "eapo/dynamics.hpp"
#include "eapo/environment.hpp"

namespace eapo {

// How the average-reward estimate is tracked.
//   PerStream: rho_r for the reward stream, rho_e for the entropy stream.
//   Combined:  a single gain held in rho_r and subtracted from the reward
//              stream only; rho_e stays 0.
enum class GainMode { PerStream, Combined };

// Optimizer settings. Defaults are the reference training hyperparameters;
// the truncation probability lives in EnvConfig::p_trunc.
struct TrainerConfig {
  double tau = 1.5;        // entropy temperature
  double lambda_r = 0.8;   // reward-stream GAE lambda
  double lambda_e = 0.6;   // entropy-stream GAE lambda
  double clip_eps = 0.05;
  double gain_lr = 0.01;
  double lr = 5e-4;
  double c2 = 0.5;         // weight of the entropy-critic loss
  double vf_coef = 0.25;
  int n_envs = 64;
  int n_rollout_steps = 128;
  int n_epochs = 6;
  int batch_size = 1024;
  double max_grad_norm = 10.0;
  bool adv_minibatch_norm = true;
  double log_std_init = 0.5;
  std::vector<int> policy_hidden{256, 256};
  std::vector<int> critic_hidden{512, 512};
  GainMode gain_mode = GainMode::PerStream;
  std::int64_t total_frames = 30'000'000;
  // Frames between evaluations; 0 disables periodic evaluation.
  std::int64_t eval_period = 1'000'000;
  // Consecutive aborted (non-finite) updates tolerated before giving up.
  int max_consecutive_aborts = 3;

  std::int64_t frames_per_iteration() const {
    return static_cast<std::int64_t>(n_envs) * n_rollout_steps;
  }
  void validate() const;
};

struct EvalConfig {
  double duration = 60.0;  // s
  // Empty means the variant's standard seed list.
  std::vector<std::uint64_t> seeds;
  bool disturbances = true;
  DisturbanceConfig disturbance;
  // Diverged trials report 0 instead of their accumulated time.
  bool strict = true;

  void validate() const;
};

struct RunConfig {
  PlantParams plant;
  EnvConfig env;
  TrainerConfig trainer;
  EvalConfig eval;

  void validate() const;
};

// Standard five-seed lists for each variant.
std::vector<std::uint64_t> default_seeds(RobotVariant variant);

}  // namespace eapo

#endif  // EAPO_SETTINGS_HPP_
