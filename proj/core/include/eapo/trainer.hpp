#ifndef EAPO_TRAINER_HPP_
#define EAPO_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eapo/environment.hpp"
#include "eapo/networks.hpp"
#include "eapo/settings.hpp"

namespace eapo {

// Running estimate of the entropy-regularized average reward.
struct GainEstimate {
  double rho_r = 0.0;  // reward per step
  double rho_e = 0.0;  // entropy (-log pi) per step

  double effective(double tau) const { return rho_r + tau * rho_e; }
  friend bool operator==(const GainEstimate&, const GainEstimate&) = default;
};

// Transitions from n_envs environments over n_steps steps. Sample index is
// step * n_envs + env, i.e. the order of collection.
struct RolloutBuffer {
  int n_envs = 0;
  int n_steps = 0;
  Matrix observations;  // 4 x size()
  Vector actions;
  Vector log_probs;     // behaviour policy
  Vector rewards;
  Vector entropies;     // -log_probs
  Vector v_r;
  Vector v_e;
  // Critic values of the state reached by each transition, taken before any
  // reset. For a non-truncated step t < n_steps - 1 these equal v(t + 1).
  Vector next_v_r;
  Vector next_v_e;
  std::vector<std::uint8_t> truncated;
  // Critic values for the observation after each env's final step.
  Vector bootstrap_v_r;  // n_envs
  Vector bootstrap_v_e;
  int diverged_resets = 0;

  static RolloutBuffer allocate(int n_envs, int n_steps);
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(n_envs) * n_steps;
  }
  Eigen::Index index(int step, int env) const {
    return static_cast<Eigen::Index>(step) * n_envs + env;
  }
};

struct AdvantageBatch {
  Vector delta_r;
  Vector delta_e;
  Vector adv_r;
  Vector adv_e;
  Vector adv_total;  // adv_r + tau * adv_e
  Vector target_r;   // adv_r + v_r
  Vector target_e;   // adv_e + v_e
};

// n_envs environments, each with its own rng stream
// make_stream(master_seed, stream::kEnvBase + i), reset on construction.
class VectorEnv {
 public:
  VectorEnv(RobotVariant variant, const PlantParams& params,
            const EnvConfig& cfg, int n_envs, std::uint64_t master_seed);

  int size() const { return static_cast<int>(envs_.size()); }
  Environment& env(int i) { return envs_[static_cast<std::size_t>(i)]; }
  const std::vector<Observation>& observations() const { return obs_; }
  Observation& observation(int i) { return obs_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Environment> envs_;
  std::vector<Observation> obs_;
};

// Steps every env n_rollout_steps times with actions sampled from the
// policy (noise drawn from each env's own stream). A truncated env is reset
// in place after its transition is recorded. A diverged env is reset too and
// its transition is recorded as truncated with the pre-step reward and value.
RolloutBuffer collect_rollouts(VectorEnv& envs, const PolicyNet& policy,
                               const CriticNet& critic,
                               const TrainerConfig& cfg);

// Undiscounted dual GAE. Per env, backwards in time:
//   delta_r = r - rho_r + v_r(s') - v_r(s)
//   delta_e = -log pi(a|s) - rho_e + v_e(s') - v_e(s)
//   adv(t)  = delta(t) + lambda * adv(t + 1)
// with the carry cut after a truncated step (the critic value of s' is still
// used: truncation bootstraps). In Combined gain mode rho_r holds the whole
// gain and the entropy stream is not centred.
AdvantageBatch compute_dual_gae(const RolloutBuffer& buffer,
                                const GainEstimate& gain,
                                const TrainerConfig& cfg);

// rho += gain_lr * mean(delta), once per iteration, from the deltas that
// produced this iteration's advantages.
GainEstimate update_gain(const GainEstimate& gain,
                         const AdvantageBatch& advantages,
                         const TrainerConfig& cfg);

// Per-minibatch advantage normalization (mean 0, population std 1, 1e-8
// guard). A constant input maps to all zeros.
Vector normalize_advantages(const Vector& adv);

struct Minibatch {
  Matrix observations;
  Vector actions;
  Vector old_log_probs;
  Vector advantages;  // adv_total, not yet normalized
  Vector target_r;
  Vector target_e;
};

struct LossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;  // mse_r + c2 * mse_e
  double total = 0.0;       // policy_loss + vf_coef * value_loss
  double max_ratio_deviation = 0.0;  // max |ratio - 1|
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Clipped surrogate plus two-headed critic loss. When the gradient pointers
// are non-null they receive d(total)/d(params) (overwritten).
LossTerms ppo_loss(const PolicyNet& policy, const CriticNet& critic,
                   const Minibatch& batch, const TrainerConfig& cfg,
                   Vector* policy_grad, Vector* critic_grad);

struct TrainingState {
  PolicyNet policy;
  CriticNet critic;
  AdamState policy_adam;
  AdamState critic_adam;
  GainEstimate gain;
  std::int64_t iteration = 0;
  std::int64_t frames = 0;
};

TrainingState init_training_state(const TrainerConfig& cfg,
                                  std::uint64_t master_seed);

struct UpdateStats {
  double policy_loss = 0.0;  // means over minibatches
  double value_loss = 0.0;
  double grad_norm = 0.0;    // pre-clip
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  // max |ratio - 1| on the first minibatch of the first epoch.
  double first_ratio_deviation = 0.0;
  int minibatches = 0;
  bool aborted = false;
};

// n_epochs passes over minibatches of batch_size drawn from a shuffled
// flattening of (env, step) pairs. A non-finite loss restores the parameters
// and optimizer states from before the call and sets `aborted`.
UpdateStats ppo_update(const RolloutBuffer& buffer,
                       const AdvantageBatch& advantages, TrainingState& state,
                       const TrainerConfig& cfg, Rng& shuffle_rng);

struct MetricsRow {
  std::int64_t iteration = 0;
  std::int64_t frames = 0;
  double rho_r = 0.0;
  double rho_e = 0.0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double grad_norm = 0.0;
  std::optional<double> eval_score;
};

inline constexpr const char* kMetricsHeader =
    "iteration,frames,rho_r,rho_e,mean_reward,mean_entropy,policy_loss,"
    "value_loss,grad_norm,eval_score";
std::string format_metrics_row(const MetricsRow& row);

struct TrainResult {
  TrainingState final_state;
  std::vector<MetricsRow> metrics;
  std::optional<double> best_score;
  std::filesystem::path best_checkpoint;  // empty when not written
  std::vector<std::filesystem::path> checkpoints;
  int aborted_updates = 0;
  int diverged_resets = 0;
};

struct TrainOptions {
  // When non-empty: metrics.csv, checkpoints/ and best.ckpt go here.
  std::filesystem::path out_dir;
  // Resolved config text embedded in every checkpoint.
  std::string config_snapshot;
  std::function<void(const MetricsRow&)> on_iteration;
};

// collect -> dual GAE -> gain update -> PPO until total_frames (rounded up to
// whole iterations). Every eval_period frames the deterministic policy is
// evaluated on the eval seeds and checkpointed; the final artifact is the
// best checkpoint by score. Throws NumericalFailure after
// max_consecutive_aborts aborted updates (the last good state is saved to
// last_good.ckpt first).
TrainResult train(const RunConfig& config, RobotVariant variant,
                  std::uint64_t master_seed, const TrainOptions& options = {});

}  // namespace eapo

#endif  // EAPO_TRAINER_HPP_
