#include "eapo/environment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "eapo/errors.hpp"

namespace eapo {

void EnvConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha", "must be positive");
  for (double q : q_diag) {
    if (!(q >= 0.0)) throw ConfigError("q_diag", "entries must be >= 0");
  }
  for (double s : reset_std) {
    if (!(s >= 0.0)) throw ConfigError("reset_std", "entries must be >= 0");
  }
  if (!(p_trunc >= 0.0 && p_trunc < 1.0)) {
    throw ConfigError("p_trunc", "must lie in [0, 1)");
  }
  if (!(vel_norm > 0.0)) throw ConfigError("vel_norm", "must be positive");
  if (!(goal_height_fraction > -1.0 && goal_height_fraction <= 1.0)) {
    throw ConfigError("goal_height_fraction", "must lie in (-1, 1]");
  }
}

Observation observe(const PlantState& state, const EnvConfig& cfg) {
  return {wrap_angle(state.q1), wrap_angle(state.q2), state.qd1 / cfg.vel_norm,
          state.qd2 / cfg.vel_norm};
}

double reward(const Observation& obs, double /*action*/, const EnvConfig& cfg) {
  const double d1 = wrap_angle(obs.q1 - cfg.goal[0]);
  const double d2 = wrap_angle(obs.q2 - cfg.goal[1]);
  const double d3 = obs.qd1 - cfg.goal[2];
  const double d4 = obs.qd2 - cfg.goal[3];
  const double cost = cfg.q_diag[0] * d1 * d1 + cfg.q_diag[1] * d2 * d2 +
                      cfg.q_diag[2] * d3 * d3 + cfg.q_diag[3] * d4 * d4;
  return -cfg.alpha * cost;
}

PlantState reset(const EnvConfig& cfg, Rng& rng) {
  std::array<double, 4> x{};
  for (int i = 0; i < 4; ++i) {
    if (cfg.reset_std[i] > 0.0) {
      std::normal_distribution<double> dist(0.0, cfg.reset_std[i]);
      x[i] = dist(rng);
    }
  }
  return {x[0], x[1], x[2], x[3]};
}

bool should_truncate(const EnvConfig& cfg, Rng& rng) {
  if (cfg.mode == EpisodeMode::Eval) return false;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < cfg.p_trunc;
}

double end_effector_height(const PlantState& state, const PlantParams& params) {
  return -params.length_1 * std::cos(state.q1) -
         params.length_2 * std::cos(state.q1 + state.q2);
}

bool in_goal_region(const PlantState& state, const EnvConfig& cfg,
                    const PlantParams& params) {
  const double threshold =
      cfg.goal_height_fraction * (params.length_1 + params.length_2);
  return end_effector_height(state, params) >= threshold;
}

StepOutcome env_step(const PlantState& state, double action,
                     const EnvConfig& cfg, RobotVariant variant,
                     const PlantParams& params, Rng& rng,
                     std::optional<JointTorques> disturbance) {
  JointTorques torques = apply_actuation(variant, action, params);
  if (disturbance) torques = torques + *disturbance;
  const PlantState next = step(state, torques, params);

  StepOutcome out;
  out.next_observation = observe(next, cfg);
  out.reward = reward(out.next_observation, action, cfg);
  out.truncated = should_truncate(cfg, rng);
  out.info.state = next;
  out.info.in_goal = in_goal_region(next, cfg, params);
  return out;
}

JointTorques DisturbanceSchedule::torque_at(double t) const {
  for (const auto& e : events) {
    if (t < e.start_time) break;
    if (t < e.start_time + e.duration) return e.torque;
  }
  return {};
}

DisturbanceSchedule make_disturbance_schedule(double duration, Rng& rng,
                                              const DisturbanceConfig& cfg) {
  const auto ordered = [](const std::pair<double, double>& r) {
    return r.first > 0.0 && r.first <= r.second;
  };
  if (!ordered(cfg.interval)) {
    throw ConfigError("disturbance_interval", "range must be positive and ordered");
  }
  if (!ordered(cfg.pulse_duration)) {
    throw ConfigError("disturbance_pulse_duration",
                      "range must be positive and ordered");
  }
  if (!(cfg.magnitude >= 0.0)) {
    throw ConfigError("disturbance_magnitude", "must be >= 0");
  }

  std::uniform_real_distribution<double> gap(cfg.interval.first,
                                             cfg.interval.second);
  std::uniform_real_distribution<double> width(cfg.pulse_duration.first,
                                               cfg.pulse_duration.second);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  DisturbanceSchedule schedule;
  double t = 0.0;
  while (true) {
    const double start = t + gap(rng);
    const double len = width(rng);
    const double tau1 = cfg.magnitude * unit(rng);
    const double tau2 = cfg.magnitude * unit(rng);
    if (start + len > duration) break;
    schedule.events.push_back({start, len, {tau1, tau2}});
    t = start + len;
  }
  return schedule;
}

DisturbanceSchedule make_disturbance_schedule(double duration,
                                              std::uint64_t seed,
                                              const DisturbanceConfig& cfg) {
  Rng rng = make_stream(seed, stream::kDisturbance);
  DisturbanceSchedule schedule = make_disturbance_schedule(duration, rng, cfg);
  schedule.seed = seed;
  return schedule;
}

void write_disturbance_csv(const DisturbanceSchedule& schedule,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "start_time,duration,tau1,tau2\n" << std::setprecision(17);
  for (const auto& e : schedule.events) {
    out << e.start_time << ',' << e.duration << ',' << e.torque.tau1 << ','
        << e.torque.tau2 << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

Environment::Environment(RobotVariant variant, PlantParams params,
                         EnvConfig cfg, Rng rng)
    : variant_(variant),
      params_(params),
      cfg_(std::move(cfg)),
      rng_(std::move(rng)) {}

Observation Environment::reset() {
  state_ = eapo::reset(cfg_, rng_);
  return observe(state_, cfg_);
}

StepOutcome Environment::step(double action) {
  StepOutcome out = env_step(state_, action, cfg_, variant_, params_, rng_);
  state_ = out.info.state;
  return out;
}

}  // namespace eapo
