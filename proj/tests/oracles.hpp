// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code path it is used to check.
#ifndef EAPO_TESTS_ORACLES_HPP_
#define EAPO_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "eapo/dynamics.hpp"
#include "eapo/networks.hpp"

namespace eapo::oracle {

// Mechanical energy from Cartesian centre-of-mass kinematics and the
// rotational inertia about each centre of mass (I_com = I_joint - m r^2).
inline double cartesian_energy(const PlantState& s, const PlantParams& p) {
  const double a1 = s.q1;
  const double a2 = s.q1 + s.q2;
  const double w1 = s.qd1;
  const double w2 = s.qd1 + s.qd2;
  // y measured upwards, zero at the hanging configuration of each point.
  const double vx1 = p.com_1 * std::cos(a1) * w1;
  const double vy1 = p.com_1 * std::sin(a1) * w1;
  const double vx2 = p.length_1 * std::cos(a1) * w1 + p.com_2 * std::cos(a2) * w2;
  const double vy2 = p.length_1 * std::sin(a1) * w1 + p.com_2 * std::sin(a2) * w2;
  const double y1 = p.com_1 * (1.0 - std::cos(a1));
  const double y2 = p.length_1 * (1.0 - std::cos(a1)) + p.com_2 * (1.0 - std::cos(a2));
  const double i1 = p.inertia_1 - p.mass_1 * p.com_1 * p.com_1;
  const double i2 = p.inertia_2 - p.mass_2 * p.com_2 * p.com_2;
  const double kinetic = 0.5 * p.mass_1 * (vx1 * vx1 + vy1 * vy1) +
                         0.5 * p.mass_2 * (vx2 * vx2 + vy2 * vy2) +
                         0.5 * i1 * w1 * w1 + 0.5 * i2 * w2 * w2;
  return kinetic + p.gravity * (p.mass_1 * y1 + p.mass_2 * y2);
}

// One env's stream for the brute-force advantage.
struct Stream {
  std::vector<double> signal;   // reward or entropy sample
  std::vector<double> value;    // v(s_t)
  std::vector<double> next_value;  // v(s_{t+1}) before any reset
  std::vector<bool> truncated;
};

// Advantage as the explicit lambda-weighted mixture of k-step
// average-adjusted returns within the segment that ends at the next
// truncation (or the end of the rollout):
//   A(k) = sum_{i<k} (x_{t+i} - rho) + v(s_{t+k}) - v(s_t)
//   A    = (1 - lambda) sum_{k=1}^{K-1} lambda^{k-1} A(k) + lambda^{K-1} A(K)
inline std::vector<double> brute_force_gae(const Stream& s, double rho,
                                           double lambda) {
  const int n = static_cast<int>(s.signal.size());
  std::vector<double> adv(n);
  for (int t = 0; t < n; ++t) {
    int end = t;  // last index of the segment
    while (end < n - 1 && !s.truncated[end]) ++end;
    const int horizon = end - t + 1;
    auto k_step = [&](int k) {
      double sum = 0.0;
      for (int i = 0; i < k; ++i) sum += s.signal[t + i] - rho;
      return sum + s.next_value[t + k - 1] - s.value[t];
    };
    double total = 0.0;
    for (int k = 1; k < horizon; ++k) {
      total += (1.0 - lambda) * std::pow(lambda, k - 1) * k_step(k);
    }
    total += std::pow(lambda, horizon - 1) * k_step(horizon);
    adv[t] = total;
  }
  return adv;
}

// Central differences of f around x, one coordinate at a time.
inline Vector central_difference(const std::function<double(const Vector&)>& f,
                                 const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest relative error between two gradients; entries where both are
// below `floor` in magnitude are compared on an absolute basis.
inline double max_relative_error(const Vector& a, const Vector& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace eapo::oracle

#endif  // EAPO_TESTS_ORACLES_HPP_
