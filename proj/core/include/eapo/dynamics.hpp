#ifndef EAPO_DYNAMICS_HPP_
#define EAPO_DYNAMICS_HPP_

#include <array>
#include <string>

namespace eapo {

// Physical parameters of the torque-limited two-link pendulum.
//
// Inertias are taken about each link's own joint axis (not the centre of
// mass). Defaults follow the reference double-pendulum hardware;
// every field can be overridden from the `plant` config section.
struct PlantParams {
  double mass_1 = 0.5234;     // kg
  double mass_2 = 0.6235;     // kg
  double length_1 = 0.2;      // m
  double length_2 = 0.3;      // m
  double com_1 = 0.2;         // m, joint 1 to centre of mass of link 1
  double com_2 = 0.3;         // m, joint 2 to centre of mass of link 2
  double inertia_1 = 0.031887;  // kg m^2
  double inertia_2 = 0.05172;   // kg m^2
  double gravity = 9.81;      // m/s^2
  double damping_1 = 0.001;   // N m s / rad
  double damping_2 = 0.001;
  double coulomb_1 = 0.0;     // N m
  double coulomb_2 = 0.0;
  double torque_limit = 6.0;  // N m
  double dt = 0.01;           // s, control step
  int integrator_substeps = 5;

  // Throws ConfigError naming the first field that breaks an invariant.
  void validate() const;
};

// Raw joint state. Angles are unwrapped; q = 0 is hanging straight down.
struct PlantState {
  double q1 = 0.0;
  double q2 = 0.0;
  double qd1 = 0.0;
  double qd2 = 0.0;

  bool finite() const;
  friend bool operator==(const PlantState&, const PlantState&) = default;
};

enum class RobotVariant { Acrobot, Pendubot };

const char* to_string(RobotVariant variant);
// Accepts "acrobot" / "pendubot" (case-insensitive). Throws ConfigError.
RobotVariant parse_variant(const std::string& name);

struct JointTorques {
  double tau1 = 0.0;
  double tau2 = 0.0;

  JointTorques operator+(const JointTorques& o) const {
    return {tau1 + o.tau1, tau2 + o.tau2};
  }
  friend bool operator==(const JointTorques&, const JointTorques&) = default;
};

using JointAccelerations = std::array<double, 2>;

// Velocity scale of the tanh-smoothed Coulomb term, rad/s.
inline constexpr double kCoulombSmoothing = 1e-2;
// Any state component above this magnitude counts as divergence.
inline constexpr double kDivergenceBound = 1e6;

// Solves M(q) qdd + C(q, qd) qd + G(q) + F(qd) = tau for qdd.
// Throws InvalidStateError for non-finite inputs.
JointAccelerations forward_dynamics(const PlantState& state,
                                    const JointTorques& torques,
                                    const PlantParams& params);

// Maps a normalized action onto the actuated joint. Out-of-range actions are
// clipped to [-1, 1]; non-finite actions throw InvalidActionError.
JointTorques apply_actuation(RobotVariant variant, double normalized_action,
                             const PlantParams& params);

// Advances one control step with classical RK4 over `integrator_substeps`
// equal substeps, holding the torque constant. Throws
// SimulationDivergedError if the result leaves the divergence bound.
PlantState step(const PlantState& state, const JointTorques& torques,
                const PlantParams& params);

// Wraps to (-pi, pi].
double wrap_angle(double q);

// Kinetic plus potential energy; potential is zero at the hanging rest state.
double total_energy(const PlantState& state, const PlantParams& params);

// Gravity torque vector dV/dq, exposed for tests and diagnostics.
std::array<double, 2> gravity_torques(const PlantState& state,
                                      const PlantParams& params);

}  // namespace eapo

#endif  // EAPO_DYNAMICS_HPP_
