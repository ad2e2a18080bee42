#ifndef EAPO_ENVIRONMENT_HPP_
#define EAPO_ENVIRONMENT_HPP_

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eapo/dynamics.hpp"
#include "eapo/rng.hpp"

namespace eapo {

enum class EpisodeMode { Train, Eval };

// The swing-up MDP: quadratic cost around the upright goal, Gaussian resets
// around the hanging state and Bernoulli truncation during training.
struct EnvConfig {
  double alpha = 0.001;
  std::array<double, 4> q_diag{100.0, 100.0, 4.0, 2.0};
  std::array<double, 4> goal{std::numbers::pi, 0.0, 0.0, 0.0};
  // Standard deviation of each reset component. 2.0 corresponds to a reset
  // noise variance of 4.0; set 6.0 for the wider spread.
  std::array<double, 4> reset_std{2.0, 2.0, 2.0, 2.0};
  double p_trunc = 0.005;
  // rad/s. Velocities are divided by this before reaching the networks.
  double vel_norm = 20.0;
  // Goal region: end-effector height >= fraction * (length_1 + length_2).
  double goal_height_fraction = 0.75;
  EpisodeMode mode = EpisodeMode::Train;

  void validate() const;
};

struct Observation {
  double q1 = 0.0;   // wrapped, (-pi, pi]
  double q2 = 0.0;   // wrapped, (-pi, pi]
  double qd1 = 0.0;  // qd1 / vel_norm
  double qd2 = 0.0;  // qd2 / vel_norm

  std::array<double, 4> as_array() const { return {q1, q2, qd1, qd2}; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

inline constexpr int kObservationSize = 4;

struct StepInfo {
  PlantState state;
  bool in_goal = false;
};

struct StepOutcome {
  Observation next_observation;
  double reward = 0.0;
  // The only episode-ending signal; the task has no terminal states.
  bool truncated = false;
  StepInfo info;

  friend bool operator==(const StepOutcome& a, const StepOutcome& b) {
    return a.next_observation == b.next_observation && a.reward == b.reward &&
           a.truncated == b.truncated && a.info.state == b.info.state &&
           a.info.in_goal == b.info.in_goal;
  }
};

Observation observe(const PlantState& state, const EnvConfig& cfg);

// -alpha * sum_i q_diag[i] * d_i^2 with shortest wrapped angle differences.
// The action does not enter the cost.
double reward(const Observation& obs, double action, const EnvConfig& cfg);

// Independent Normal(0, reset_std[i]) draws in the order q1, q2, qd1, qd2.
// Angles are left unwrapped.
PlantState reset(const EnvConfig& cfg, Rng& rng);

// One uniform draw per call. Always false in Eval mode (no draw consumed).
bool should_truncate(const EnvConfig& cfg, Rng& rng);

// Closed boundary: height exactly at the threshold counts as in goal.
bool in_goal_region(const PlantState& state, const EnvConfig& cfg,
                    const PlantParams& params);

double end_effector_height(const PlantState& state, const PlantParams& params);

// Applies actuation plus an optional external disturbance torque (which is
// not subject to the torque limit), steps the plant, scores the post-step
// observation and draws truncation in Train mode.
// Propagates SimulationDivergedError.
StepOutcome env_step(const PlantState& state, double action,
                     const EnvConfig& cfg, RobotVariant variant,
                     const PlantParams& params, Rng& rng,
                     std::optional<JointTorques> disturbance = std::nullopt);

// --- disturbances -----------------------------------------------------------

struct DisturbanceEvent {
  double start_time = 0.0;  // s
  double duration = 0.0;    // s
  JointTorques torque;

  friend bool operator==(const DisturbanceEvent&,
                         const DisturbanceEvent&) = default;
};

struct DisturbanceSchedule {
  std::vector<DisturbanceEvent> events;  // sorted, non-overlapping
  std::uint64_t seed = 0;

  // Torque active at time t; zero outside every event. Events cover
  // [start_time, start_time + duration).
  JointTorques torque_at(double t) const;
  friend bool operator==(const DisturbanceSchedule&,
                         const DisturbanceSchedule&) = default;
};

struct DisturbanceConfig {
  double magnitude = 1.5;                        // N m, per joint, symmetric
  std::pair<double, double> interval{2.0, 6.0};  // s, gap between pulses
  std::pair<double, double> pulse_duration{0.05, 0.2};  // s
};

// Events are laid out left to right: gap ~ U(interval), duration ~
// U(pulse_duration), each joint torque ~ U(-magnitude, magnitude). An event
// that would end after `duration` is dropped and generation stops.
DisturbanceSchedule make_disturbance_schedule(double duration, Rng& rng,
                                              const DisturbanceConfig& cfg);
DisturbanceSchedule make_disturbance_schedule(double duration,
                                              std::uint64_t seed,
                                              const DisturbanceConfig& cfg);

// CSV with header start_time,duration,tau1,tau2.
void write_disturbance_csv(const DisturbanceSchedule& schedule,
                           const std::string& path);

// Stateful wrapper used by the trainer: owns its plant state and rng stream.
// Per step the rng is consumed in a fixed order: action noise (by the
// caller, through rng()), then the truncation draw, then four reset draws if
// the step truncated or diverged.
class Environment {
 public:
  Environment(RobotVariant variant, PlantParams params, EnvConfig cfg,
              Rng rng);

  // Samples a reset state and returns its observation.
  Observation reset();
  StepOutcome step(double action);

  const PlantState& state() const { return state_; }
  void set_state(const PlantState& state) { state_ = state; }
  Rng& rng() { return rng_; }
  const EnvConfig& config() const { return cfg_; }
  const PlantParams& params() const { return params_; }
  RobotVariant variant() const { return variant_; }

 private:
  RobotVariant variant_;
  PlantParams params_;
  EnvConfig cfg_;
  Rng rng_;
  PlantState state_;
};

}  // namespace eapo

#endif  // EAPO_ENVIRONMENT_HPP_
