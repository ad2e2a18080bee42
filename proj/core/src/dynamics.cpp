#include "eapo/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "eapo/errors.hpp"

namespace eapo {

namespace {

using Vec4 = std::array<double, 4>;

void require_positive(double value, const char* key) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(key, "must be finite and strictly positive");
  }
}

void require_nonnegative(double value, const char* key) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ConfigError(key, "must be finite and non-negative");
  }
}

// sin with exact zeros at the equilibria, so that both rest states are exact
// fixed points of the dynamics.
double periodic_sin(double q) {
  const double r = wrap_angle(q);
  if (r == 0.0 || r == std::numbers::pi) return 0.0;
  return std::sin(r);
}

double friction(double velocity, double damping, double coulomb) {
  return damping * velocity + coulomb * std::tanh(velocity / kCoulombSmoothing);
}

// Unchecked right-hand side of the first-order system.
Vec4 derivative(const Vec4& x, const JointTorques& tau, const PlantParams& p) {
  const double s1 = periodic_sin(x[0]);
  const double s2 = periodic_sin(x[1]);
  const double c2 = std::cos(x[1]);
  const double s12 = periodic_sin(x[0] + x[1]);
  const double qd1 = x[2];
  const double qd2 = x[3];

  const double coupling = p.mass_2 * p.length_1 * p.com_2;
  const double m11 = p.inertia_1 + p.inertia_2 +
                     p.mass_2 * p.length_1 * p.length_1 + 2.0 * coupling * c2;
  const double m12 = p.inertia_2 + coupling * c2;
  const double m22 = p.inertia_2;

  const double h = coupling * s2;
  const double coriolis_1 = -2.0 * h * qd1 * qd2 - h * qd2 * qd2;
  const double coriolis_2 = h * qd1 * qd1;

  const double g2 = p.gravity * p.mass_2 * p.com_2 * s12;
  const double g1 =
      p.gravity * (p.mass_1 * p.com_1 + p.mass_2 * p.length_1) * s1 + g2;

  const double rhs1 = tau.tau1 - coriolis_1 - g1 -
                      friction(qd1, p.damping_1, p.coulomb_1);
  const double rhs2 = tau.tau2 - coriolis_2 - g2 -
                      friction(qd2, p.damping_2, p.coulomb_2);

  const double det = m11 * m22 - m12 * m12;
  return {qd1, qd2, (m22 * rhs1 - m12 * rhs2) / det,
          (m11 * rhs2 - m12 * rhs1) / det};
}

Vec4 axpy(const Vec4& x, double a, const Vec4& k) {
  return {x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2], x[3] + a * k[3]};
}

}  // namespace

void PlantParams::validate() const {
  require_positive(mass_1, "mass_1");
  require_positive(mass_2, "mass_2");
  require_positive(length_1, "length_1");
  require_positive(length_2, "length_2");
  require_nonnegative(com_1, "com_1");
  require_nonnegative(com_2, "com_2");
  require_positive(inertia_1, "inertia_1");
  require_positive(inertia_2, "inertia_2");
  if (!std::isfinite(gravity)) throw ConfigError("gravity", "must be finite");
  require_nonnegative(damping_1, "damping_1");
  require_nonnegative(damping_2, "damping_2");
  require_nonnegative(coulomb_1, "coulomb_1");
  require_nonnegative(coulomb_2, "coulomb_2");
  require_positive(torque_limit, "torque_limit");
  require_positive(dt, "dt");
  if (integrator_substeps < 1) {
    throw ConfigError("integrator_substeps", "must be at least 1");
  }
}

bool PlantState::finite() const {
  return std::isfinite(q1) && std::isfinite(q2) && std::isfinite(qd1) &&
         std::isfinite(qd2);
}

const char* to_string(RobotVariant variant) {
  return variant == RobotVariant::Acrobot ? "acrobot" : "pendubot";
}

RobotVariant parse_variant(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "acrobot") return RobotVariant::Acrobot;
  if (lower == "pendubot") return RobotVariant::Pendubot;
  throw ConfigError("variant", "expected 'acrobot' or 'pendubot', got '" +
                                   name + "'");
}

JointAccelerations forward_dynamics(const PlantState& state,
                                    const JointTorques& torques,
                                    const PlantParams& params) {
  if (!state.finite()) {
    throw InvalidStateError("forward_dynamics: non-finite state");
  }
  if (!std::isfinite(torques.tau1) || !std::isfinite(torques.tau2)) {
    throw InvalidStateError("forward_dynamics: non-finite torque");
  }
  const Vec4 dx =
      derivative({state.q1, state.q2, state.qd1, state.qd2}, torques, params);
  return {dx[2], dx[3]};
}

JointTorques apply_actuation(RobotVariant variant, double normalized_action,
                             const PlantParams& params) {
  if (!std::isfinite(normalized_action)) {
    throw InvalidActionError("apply_actuation: non-finite action");
  }
  const double torque =
      std::clamp(normalized_action, -1.0, 1.0) * params.torque_limit;
  if (variant == RobotVariant::Acrobot) return {0.0, torque};
  return {torque, 0.0};
}

PlantState step(const PlantState& state, const JointTorques& torques,
                const PlantParams& params) {
  if (!state.finite()) throw InvalidStateError("step: non-finite state");
  if (!std::isfinite(torques.tau1) || !std::isfinite(torques.tau2)) {
    throw InvalidStateError("step: non-finite torque");
  }
  const double h = params.dt / params.integrator_substeps;
  Vec4 x{state.q1, state.q2, state.qd1, state.qd2};
  for (int i = 0; i < params.integrator_substeps; ++i) {
    const Vec4 k1 = derivative(x, torques, params);
    const Vec4 k2 = derivative(axpy(x, 0.5 * h, k1), torques, params);
    const Vec4 k3 = derivative(axpy(x, 0.5 * h, k2), torques, params);
    const Vec4 k4 = derivative(axpy(x, h, k3), torques, params);
    for (int j = 0; j < 4; ++j) {
      x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }
  for (double v : x) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceBound) {
      throw SimulationDivergedError("step: state left the divergence bound");
    }
  }
  return {x[0], x[1], x[2], x[3]};
}

double wrap_angle(double q) {
  constexpr double pi = std::numbers::pi;
  if (q > -pi && q <= pi) return q;
  double r = std::fmod(q + pi, 2.0 * pi);
  if (r <= 0.0) r += 2.0 * pi;
  return r - pi;
}

double total_energy(const PlantState& s, const PlantParams& p) {
  const double c2 = std::cos(s.q2);
  const double coupling = p.mass_2 * p.length_1 * p.com_2;
  const double m11 = p.inertia_1 + p.inertia_2 +
                     p.mass_2 * p.length_1 * p.length_1 + 2.0 * coupling * c2;
  const double m12 = p.inertia_2 + coupling * c2;
  const double m22 = p.inertia_2;
  const double kinetic = 0.5 * (m11 * s.qd1 * s.qd1 + 2.0 * m12 * s.qd1 * s.qd2 +
                                m22 * s.qd2 * s.qd2);
  const double potential =
      p.gravity * ((p.mass_1 * p.com_1 + p.mass_2 * p.length_1) *
                       (1.0 - std::cos(s.q1)) +
                   p.mass_2 * p.com_2 * (1.0 - std::cos(s.q1 + s.q2)));
  return kinetic + potential;
}

std::array<double, 2> gravity_torques(const PlantState& s,
                                      const PlantParams& p) {
  const double g2 = p.gravity * p.mass_2 * p.com_2 * periodic_sin(s.q1 + s.q2);
  const double g1 = p.gravity * (p.mass_1 * p.com_1 + p.mass_2 * p.length_1) *
                        periodic_sin(s.q1) +
                    g2;
  return {g1, g2};
}

}  // namespace eapo
