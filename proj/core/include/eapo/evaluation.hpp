#ifndef EAPO_EVALUATION_HPP_
#define EAPO_EVALUATION_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eapo/environment.hpp"
#include "eapo/networks.hpp"
#include "eapo/settings.hpp"

namespace eapo {

// Maps the current plant state (and its observation) to a normalized action.
using Controller =
    std::function<double(const PlantState& state, const Observation& obs)>;

// Deterministic policy: tanh of the mean. The network is copied.
Controller policy_controller(PolicyNet policy);
Controller zero_controller();

struct TrajectorySample {
  double t = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double qd1 = 0.0;
  double qd2 = 0.0;
  double tau = 0.0;  // actuator torque commanded at this state, N m
  bool in_goal = false;

  friend bool operator==(const TrajectorySample&,
                         const TrajectorySample&) = default;
};

struct TrialResult {
  std::uint64_t seed = 0;
  double score = 0.0;         // time_in_goal / duration, in [0, 1]
  double time_in_goal = 0.0;  // s
  std::vector<TrajectorySample> trajectory;  // duration/dt + 1 samples
  DisturbanceSchedule disturbances;
  bool diverged = false;
};

// Number of control steps in a trial of the given duration.
std::int64_t trial_steps(double duration, double dt);

// Time-in-goal score of a trajectory whose first sample is the initial
// state: every later in-goal sample contributes dt. Clamped to [0, 1].
double score_trajectory(std::span<const TrajectorySample> trajectory,
                        double dt, double duration);

// One evaluation trial from the hanging rest state. Disturbances (if
// enabled) come from make_disturbance_schedule(seed). Divergence ends the
// trial early and sets `diverged`; it is never thrown.
TrialResult run_trial(const Controller& controller, RobotVariant variant,
                      const PlantParams& params, const EnvConfig& env,
                      const EvalConfig& eval, std::uint64_t seed);

struct EvalReport {
  std::string controller_id;
  RobotVariant variant = RobotVariant::Pendubot;
  bool strict = true;
  std::vector<TrialResult> trials;
  std::vector<double> scores;  // per trial, after the strict rule
  double average = 0.0;
  std::string config_snapshot;  // resolved YAML
};

// Score that enters the average: strict mode zeroes diverged trials.
double reported_score(const TrialResult& trial, bool strict);

// Runs one trial per seed in order. Uses eval.seeds, or the variant's
// standard list when that is empty. Throws ContractViolation on an empty
// seed list.
EvalReport evaluate_multi_seed(const Controller& controller,
                               const std::string& controller_id,
                               RobotVariant variant, const PlantParams& params,
                               const EnvConfig& env, const EvalConfig& eval);

// Report as JSON (no timestamps, so identical inputs give identical bytes).
std::string report_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);
// Flat CSV: seed,score,diverged.
void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path);
// Text table: one row per trial, then the average; "(E)" marks divergence.
std::string format_score_table(const EvalReport& report);

// --- trajectory export ------------------------------------------------------

// Writes <stem>.csv (t,q1,q2,qd1,qd2,tau) and <stem>.svg. Throws IoError.
void export_trajectory(const TrialResult& result,
                       const std::filesystem::path& stem, double torque_limit);

void write_trajectory_csv(std::span<const TrajectorySample> trajectory,
                          const std::filesystem::path& path);

// Parses a trajectory CSV. Throws IoError naming the first bad row (1-based,
// header is row 1) or the empty body.
std::vector<TrajectorySample> read_trajectory_csv(
    const std::filesystem::path& path);

// SVG geometry. Panel i (q1, q2, qd1, qd2, tau) occupies
// [top(i), top(i) + kPanelHeight] with top(i) = kMarginTop + i * (kPanelHeight
// + kPanelGap). A value v maps to
//   y = top(i) + kPanelHeight * (ymax - v) / (ymax - ymin)
// where ymin/ymax are written on the panel as data-ymin / data-ymax.
namespace svg {
inline constexpr double kWidth = 900.0;
inline constexpr double kMarginLeft = 70.0;
inline constexpr double kMarginRight = 20.0;
inline constexpr double kMarginTop = 20.0;
inline constexpr double kPanelHeight = 120.0;
inline constexpr double kPanelGap = 30.0;
inline constexpr int kPanels = 5;
}  // namespace svg

std::string render_trajectory_svg(std::span<const TrajectorySample> trajectory,
                                  double torque_limit);

}  // namespace eapo

#endif  // EAPO_EVALUATION_HPP_
