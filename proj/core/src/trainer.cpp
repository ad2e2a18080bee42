#include "eapo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "eapo/checkpoint.hpp"
#include "eapo/config.hpp"
#include "eapo/errors.hpp"
#include "eapo/evaluation.hpp"

namespace eapo {

RolloutBuffer RolloutBuffer::allocate(int n_envs, int n_steps) {
  RolloutBuffer b;
  b.n_envs = n_envs;
  b.n_steps = n_steps;
  const Eigen::Index n = b.size();
  b.observations = Matrix::Zero(kObservationSize, n);
  for (Vector* v : {&b.actions, &b.log_probs, &b.rewards, &b.entropies, &b.v_r,
                    &b.v_e, &b.next_v_r, &b.next_v_e}) {
    *v = Vector::Zero(n);
  }
  b.truncated.assign(static_cast<std::size_t>(n), 0);
  b.bootstrap_v_r = Vector::Zero(n_envs);
  b.bootstrap_v_e = Vector::Zero(n_envs);
  return b;
}

VectorEnv::VectorEnv(RobotVariant variant, const PlantParams& params,
                     const EnvConfig& cfg, int n_envs,
                     std::uint64_t master_seed) {
  envs_.reserve(static_cast<std::size_t>(n_envs));
  obs_.reserve(static_cast<std::size_t>(n_envs));
  for (int i = 0; i < n_envs; ++i) {
    envs_.emplace_back(
        variant, params, cfg,
        make_stream(master_seed, stream::kEnvBase + static_cast<std::uint64_t>(i)));
    obs_.push_back(envs_.back().reset());
  }
}

RolloutBuffer collect_rollouts(VectorEnv& envs, const PolicyNet& policy,
                               const CriticNet& critic,
                               const TrainerConfig& cfg) {
  const int n = envs.size();
  RolloutBuffer buf = RolloutBuffer::allocate(n, cfg.n_rollout_steps);
  const double std = policy.std();

  // Pre-reset observations of envs that truncated on the current step.
  std::vector<int> cut_envs;
  std::vector<Observation> cut_obs;

  for (int t = 0; t < cfg.n_rollout_steps; ++t) {
    const Matrix x = observation_matrix(envs.observations());
    const RowVector means = policy_mean_batch(policy, x);
    const Matrix values = critic_forward_batch(critic, x);

    if (t > 0) {
      for (int e = 0; e < n; ++e) {
        const Eigen::Index prev = buf.index(t - 1, e);
        if (!buf.truncated[static_cast<std::size_t>(prev)]) {
          buf.next_v_r[prev] = values(0, e);
          buf.next_v_e[prev] = values(1, e);
        }
      }
    }

    cut_envs.clear();
    cut_obs.clear();
    for (int e = 0; e < n; ++e) {
      const Eigen::Index i = buf.index(t, e);
      Environment& env = envs.env(e);
      buf.observations.col(i) = x.col(e);
      buf.v_r[i] = values(0, e);
      buf.v_e[i] = values(1, e);

      const ActionSample sample = sample_action(means[e], std, env.rng());
      buf.actions[i] = sample.action;
      buf.log_probs[i] = sample.log_prob;
      buf.entropies[i] = -sample.log_prob;

      try {
        const StepOutcome out = env.step(sample.action);
        buf.rewards[i] = out.reward;
        if (out.truncated) {
          buf.truncated[static_cast<std::size_t>(i)] = 1;
          cut_envs.push_back(e);
          cut_obs.push_back(out.next_observation);
          envs.observation(e) = env.reset();
        } else {
          envs.observation(e) = out.next_observation;
        }
      } catch (const SimulationDivergedError&) {
        buf.rewards[i] = reward(envs.observation(e), sample.action, env.config());
        buf.truncated[static_cast<std::size_t>(i)] = 1;
        buf.next_v_r[i] = values(0, e);
        buf.next_v_e[i] = values(1, e);
        ++buf.diverged_resets;
        envs.observation(e) = env.reset();
      }
    }

    if (!cut_envs.empty()) {
      const Matrix cut_values =
          critic_forward_batch(critic, observation_matrix(cut_obs));
      for (std::size_t k = 0; k < cut_envs.size(); ++k) {
        const Eigen::Index i = buf.index(t, cut_envs[k]);
        buf.next_v_r[i] = cut_values(0, static_cast<Eigen::Index>(k));
        buf.next_v_e[i] = cut_values(1, static_cast<Eigen::Index>(k));
      }
    }
  }

  const Matrix final_values =
      critic_forward_batch(critic, observation_matrix(envs.observations()));
  for (int e = 0; e < n; ++e) {
    buf.bootstrap_v_r[e] = final_values(0, e);
    buf.bootstrap_v_e[e] = final_values(1, e);
    const Eigen::Index last = buf.index(cfg.n_rollout_steps - 1, e);
    if (!buf.truncated[static_cast<std::size_t>(last)]) {
      buf.next_v_r[last] = final_values(0, e);
      buf.next_v_e[last] = final_values(1, e);
    }
  }
  return buf;
}

AdvantageBatch compute_dual_gae(const RolloutBuffer& buffer,
                                const GainEstimate& gain,
                                const TrainerConfig& cfg) {
  const Eigen::Index n = buffer.size();
  AdvantageBatch out;
  out.delta_r = Vector::Zero(n);
  out.delta_e = Vector::Zero(n);
  out.adv_r = Vector::Zero(n);
  out.adv_e = Vector::Zero(n);

  // Combined mode: one gain on the reward stream, entropy stream uncentred.
  const double rho_r = gain.rho_r;
  const double rho_e = cfg.gain_mode == GainMode::PerStream ? gain.rho_e : 0.0;

  for (int e = 0; e < buffer.n_envs; ++e) {
    double carry_r = 0.0;
    double carry_e = 0.0;
    for (int t = buffer.n_steps - 1; t >= 0; --t) {
      const Eigen::Index i = buffer.index(t, e);
      if (buffer.truncated[static_cast<std::size_t>(i)]) {
        carry_r = 0.0;
        carry_e = 0.0;
      }
      const double dr =
          buffer.rewards[i] - rho_r + buffer.next_v_r[i] - buffer.v_r[i];
      const double de =
          buffer.entropies[i] - rho_e + buffer.next_v_e[i] - buffer.v_e[i];
      carry_r = dr + cfg.lambda_r * carry_r;
      carry_e = de + cfg.lambda_e * carry_e;
      out.delta_r[i] = dr;
      out.delta_e[i] = de;
      out.adv_r[i] = carry_r;
      out.adv_e[i] = carry_e;
    }
  }
  out.adv_total = out.adv_r + cfg.tau * out.adv_e;
  out.target_r = out.adv_r + buffer.v_r;
  out.target_e = out.adv_e + buffer.v_e;
  return out;
}

GainEstimate update_gain(const GainEstimate& gain,
                         const AdvantageBatch& advantages,
                         const TrainerConfig& cfg) {
  GainEstimate next = gain;
  if (advantages.delta_r.size() == 0) return next;
  const double mean_r = advantages.delta_r.mean();
  const double mean_e = advantages.delta_e.mean();
  if (cfg.gain_mode == GainMode::PerStream) {
    next.rho_r += cfg.gain_lr * mean_r;
    next.rho_e += cfg.gain_lr * mean_e;
  } else {
    next.rho_r += cfg.gain_lr * (mean_r + cfg.tau * mean_e);
    next.rho_e = 0.0;
  }
  return next;
}

Vector normalize_advantages(const Vector& adv) {
  if (adv.size() == 0) return adv;
  if ((adv.array() == adv[0]).all()) return Vector::Zero(adv.size());
  const double mean = adv.mean();
  const Vector centred = adv.array() - mean;
  const double std = std::sqrt(centred.squaredNorm() / static_cast<double>(adv.size()));
  return centred / (std + 1e-8);
}

LossTerms ppo_loss(const PolicyNet& policy, const CriticNet& critic,
                   const Minibatch& batch, const TrainerConfig& cfg,
                   Vector* policy_grad, Vector* critic_grad) {
  const Eigen::Index n = batch.actions.size();
  if (batch.observations.cols() != n || batch.old_log_probs.size() != n ||
      batch.advantages.size() != n || batch.target_r.size() != n ||
      batch.target_e.size() != n || n == 0) {
    throw ContractViolation("ppo_loss: minibatch fields disagree in size");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want_grad = policy_grad != nullptr || critic_grad != nullptr;

  MlpCache policy_cache;
  const RowVector means =
      policy_mean_batch(policy, batch.observations, want_grad ? &policy_cache : nullptr);
  const double std = policy.std();
  const Vector adv = cfg.adv_minibatch_norm ? normalize_advantages(batch.advantages)
                                            : batch.advantages;

  LossTerms terms;
  RowVector d_mean(n);
  double d_log_std = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lp = log_prob(means[i], std, batch.actions[i]);
    const double log_ratio = lp - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double surr = ratio * adv[i];
    const double surr_clipped = clipped * adv[i];
    terms.policy_loss -= std::min(surr, surr_clipped);
    terms.max_ratio_deviation = std::max(terms.max_ratio_deviation, std::abs(ratio - 1.0));
    if (std::abs(ratio - 1.0) > cfg.clip_eps) terms.clip_fraction += 1.0;
    terms.approx_kl += (ratio - 1.0) - log_ratio;

    // The unclipped branch carries the gradient whenever min() selects it.
    const double d_lp = surr <= surr_clipped ? -adv[i] * ratio * inv_n : 0.0;
    const LogProbGrad g = log_prob_grad(means[i], std, batch.actions[i]);
    d_mean[i] = d_lp * g.d_mean;
    d_log_std += d_lp * g.d_log_std;
  }
  terms.policy_loss *= inv_n;
  terms.clip_fraction *= inv_n;
  terms.approx_kl *= inv_n;

  MlpCache critic_cache;
  const Matrix values = critic_forward_batch(critic, batch.observations,
                                             want_grad ? &critic_cache : nullptr);
  const RowVector err_r = values.row(0) - batch.target_r.transpose();
  const RowVector err_e = values.row(1) - batch.target_e.transpose();
  const double mse_r = err_r.squaredNorm() * inv_n;
  const double mse_e = err_e.squaredNorm() * inv_n;
  terms.value_loss = mse_r + cfg.c2 * mse_e;
  terms.total = terms.policy_loss + cfg.vf_coef * terms.value_loss;

  if (policy_grad) *policy_grad = policy_backward(policy, policy_cache, d_mean, d_log_std);
  if (critic_grad) {
    Matrix d_heads(2, n);
    d_heads.row(0) = (2.0 * cfg.vf_coef * inv_n) * err_r;
    d_heads.row(1) = (2.0 * cfg.vf_coef * cfg.c2 * inv_n) * err_e;
    *critic_grad = critic_backward(critic, critic_cache, d_heads);
  }
  return terms;
}

TrainingState init_training_state(const TrainerConfig& cfg,
                                  std::uint64_t master_seed) {
  Rng rng = make_stream(master_seed, stream::kInit);
  TrainingState s;
  s.policy = PolicyNet::create(cfg.policy_hidden, cfg.log_std_init, rng);
  s.critic = CriticNet::create(cfg.critic_hidden, rng);
  s.policy_adam = AdamState::zeros(s.policy.params.size());
  s.critic_adam = AdamState::zeros(s.critic.params.size());
  return s;
}

UpdateStats ppo_update(const RolloutBuffer& buffer,
                       const AdvantageBatch& advantages, TrainingState& state,
                       const TrainerConfig& cfg, Rng& shuffle_rng) {
  const TrainingState snapshot = state;
  const Eigen::Index n = buffer.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  UpdateStats stats;
  Minibatch mb;
  Vector policy_grad;
  Vector critic_grad;
  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index m = std::min<Eigen::Index>(cfg.batch_size, n - start);
      mb.observations.resize(kObservationSize, m);
      mb.actions.resize(m);
      mb.old_log_probs.resize(m);
      mb.advantages.resize(m);
      mb.target_r.resize(m);
      mb.target_e.resize(m);
      for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(start + k)];
        mb.observations.col(k) = buffer.observations.col(i);
        mb.actions[k] = buffer.actions[i];
        mb.old_log_probs[k] = buffer.log_probs[i];
        mb.advantages[k] = advantages.adv_total[i];
        mb.target_r[k] = advantages.target_r[i];
        mb.target_e[k] = advantages.target_e[i];
      }

      const LossTerms terms =
          ppo_loss(state.policy, state.critic, mb, cfg, &policy_grad, &critic_grad);
      if (!std::isfinite(terms.total) || !policy_grad.allFinite() ||
          !critic_grad.allFinite()) {
        state = snapshot;
        stats.aborted = true;
        return stats;
      }
      if (stats.minibatches == 0) stats.first_ratio_deviation = terms.max_ratio_deviation;

      Vector* grads[] = {&policy_grad, &critic_grad};
      const double norm = clip_grad_norm(grads, cfg.max_grad_norm);
      adam_update(state.policy.params, policy_grad, state.policy_adam, cfg.lr);
      adam_update(state.critic.params, critic_grad, state.critic_adam, cfg.lr);

      stats.policy_loss += terms.policy_loss;
      stats.value_loss += terms.value_loss;
      stats.grad_norm += norm;
      stats.clip_fraction += terms.clip_fraction;
      stats.approx_kl += terms.approx_kl;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double k = 1.0 / stats.minibatches;
    stats.policy_loss *= k;
    stats.value_loss *= k;
    stats.grad_norm *= k;
    stats.clip_fraction *= k;
    stats.approx_kl *= k;
  }
  return stats;
}

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream os;
  os << std::setprecision(17) << row.iteration << ',' << row.frames << ','
     << row.rho_r << ',' << row.rho_e << ',' << row.mean_reward << ','
     << row.mean_entropy << ',' << row.policy_loss << ',' << row.value_loss
     << ',' << row.grad_norm << ',';
  if (row.eval_score) os << *row.eval_score;
  return os.str();
}

TrainResult train(const RunConfig& config, RobotVariant variant,
                  std::uint64_t master_seed, const TrainOptions& options) {
  config.validate();
  const TrainerConfig& cfg = config.trainer;
  EnvConfig env_cfg = config.env;
  env_cfg.mode = EpisodeMode::Train;

  TrainResult result;
  TrainingState state = init_training_state(cfg, master_seed);
  VectorEnv envs(variant, config.plant, env_cfg, cfg.n_envs, master_seed);
  Rng shuffle_rng = make_stream(master_seed, stream::kShuffle);

  const bool write = !options.out_dir.empty();
  std::ofstream metrics;
  std::filesystem::path ckpt_dir;
  if (write) {
    ckpt_dir = options.out_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    const auto path = options.out_dir / "metrics.csv";
    metrics.open(path);
    if (!metrics) throw IoError("cannot open '" + path.string() + "' for writing");
    metrics << kMetricsHeader << '\n';
  }

  const auto make_checkpoint = [&](const TrainingState& s,
                                   std::optional<double> score) {
    return Checkpoint{variant, master_seed, options.config_snapshot, score, s};
  };

  const std::int64_t per_iteration = cfg.frames_per_iteration();
  int consecutive_aborts = 0;
  while (state.frames < cfg.total_frames) {
    RolloutBuffer buffer = collect_rollouts(envs, state.policy, state.critic, cfg);
    result.diverged_resets += buffer.diverged_resets;
    const AdvantageBatch adv = compute_dual_gae(buffer, state.gain, cfg);
    const GainEstimate next_gain = update_gain(state.gain, adv, cfg);
    const UpdateStats stats = ppo_update(buffer, adv, state, cfg, shuffle_rng);

    if (stats.aborted) {
      ++result.aborted_updates;
      if (++consecutive_aborts >= cfg.max_consecutive_aborts) {
        if (write) save_checkpoint(make_checkpoint(state, std::nullopt),
                                   options.out_dir / "last_good.ckpt");
        result.final_state = state;
        throw NumericalFailure("training aborted after " +
                               std::to_string(consecutive_aborts) +
                               " consecutive non-finite updates");
      }
    } else {
      consecutive_aborts = 0;
      state.gain = next_gain;
    }
    ++state.iteration;
    state.frames += per_iteration;

    MetricsRow row;
    row.iteration = state.iteration;
    row.frames = state.frames;
    row.rho_r = state.gain.rho_r;
    row.rho_e = state.gain.rho_e;
    row.mean_reward = buffer.rewards.mean();
    row.mean_entropy = buffer.entropies.mean();
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.grad_norm = stats.grad_norm;

    const bool last = state.frames >= cfg.total_frames;
    const bool due = cfg.eval_period > 0 &&
                     (state.frames / cfg.eval_period !=
                          (state.frames - per_iteration) / cfg.eval_period ||
                      last);
    if (due) {
      const EvalReport report =
          evaluate_multi_seed(policy_controller(state.policy), "training",
                              variant, config.plant, config.env, config.eval);
      row.eval_score = report.average;
      if (write) {
        const auto path =
            ckpt_dir / ("ckpt_" + std::to_string(state.frames) + ".ckpt");
        save_checkpoint(make_checkpoint(state, report.average), path);
        result.checkpoints.push_back(path);
        if (!result.best_score || report.average > *result.best_score) {
          std::filesystem::copy_file(
              path, options.out_dir / "best.ckpt",
              std::filesystem::copy_options::overwrite_existing);
          result.best_checkpoint = options.out_dir / "best.ckpt";
        }
      }
      if (!result.best_score || report.average > *result.best_score) {
        result.best_score = report.average;
      }
    }

    result.metrics.push_back(row);
    if (write) {
      metrics << format_metrics_row(row) << '\n';
      metrics.flush();
    }
    if (options.on_iteration) options.on_iteration(row);
  }

  if (write) {
    const auto final_path = options.out_dir / "final.ckpt";
    save_checkpoint(make_checkpoint(state, std::nullopt), final_path);
    if (result.best_checkpoint.empty()) {
      std::filesystem::copy_file(final_path, options.out_dir / "best.ckpt",
                                 std::filesystem::copy_options::overwrite_existing);
      result.best_checkpoint = options.out_dir / "best.ckpt";
    }
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace eapo
