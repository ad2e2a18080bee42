#include "eapo/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "eapo/errors.hpp"

namespace eapo {

Controller policy_controller(PolicyNet policy) {
  return [net = std::move(policy)](const PlantState&, const Observation& obs) {
    return std::tanh(policy_forward(net, obs).mean);
  };
}

Controller zero_controller() {
  return [](const PlantState&, const Observation&) { return 0.0; };
}

std::int64_t trial_steps(double duration, double dt) {
  return static_cast<std::int64_t>(std::llround(duration / dt));
}

double score_trajectory(std::span<const TrajectorySample> trajectory,
                        double dt, double duration) {
  std::int64_t in_goal = 0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (trajectory[i].in_goal) ++in_goal;
  }
  const double score = static_cast<double>(in_goal) * dt / duration;
  return std::clamp(score, 0.0, 1.0);
}

TrialResult run_trial(const Controller& controller, RobotVariant variant,
                      const PlantParams& params, const EnvConfig& env,
                      const EvalConfig& eval, std::uint64_t seed) {
  EnvConfig cfg = env;
  cfg.mode = EpisodeMode::Eval;
  const std::int64_t steps = trial_steps(eval.duration, params.dt);

  TrialResult result;
  result.seed = seed;
  result.disturbances.seed = seed;
  if (eval.disturbances) {
    result.disturbances =
        make_disturbance_schedule(eval.duration, seed, eval.disturbance);
  }
  result.trajectory.reserve(static_cast<std::size_t>(steps) + 1);

  // Eval mode draws nothing from this stream; env_step still needs one.
  Rng rng = make_stream(seed, 0);
  PlantState state;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * params.dt;
    const Observation obs = observe(state, cfg);
    const double action = controller(state, obs);
    TrajectorySample sample{t,   state.q1, state.q2, state.qd1, state.qd2,
                            0.0, in_goal_region(state, cfg, params)};
    if (!std::isfinite(action)) {
      result.trajectory.push_back(sample);
      result.diverged = true;
      break;
    }
    const JointTorques motor = apply_actuation(variant, action, params);
    sample.tau = variant == RobotVariant::Acrobot ? motor.tau2 : motor.tau1;
    result.trajectory.push_back(sample);
    if (k == steps) break;
    try {
      const StepOutcome out =
          env_step(state, action, cfg, variant, params, rng,
                   result.disturbances.torque_at(t));
      state = out.info.state;
    } catch (const SimulationDivergedError&) {
      result.diverged = true;
      break;
    } catch (const InvalidStateError&) {
      result.diverged = true;
      break;
    }
  }
  result.score = score_trajectory(result.trajectory, params.dt, eval.duration);
  result.time_in_goal = result.score * eval.duration;
  return result;
}

double reported_score(const TrialResult& trial, bool strict) {
  return strict && trial.diverged ? 0.0 : trial.score;
}

EvalReport evaluate_multi_seed(const Controller& controller,
                               const std::string& controller_id,
                               RobotVariant variant, const PlantParams& params,
                               const EnvConfig& env, const EvalConfig& eval) {
  const std::vector<std::uint64_t> seeds =
      eval.seeds.empty() ? default_seeds(variant) : eval.seeds;
  if (seeds.empty()) throw ContractViolation("evaluate_multi_seed: no seeds");
  EvalReport report;
  report.controller_id = controller_id;
  report.variant = variant;
  report.strict = eval.strict;
  double sum = 0.0;
  for (std::uint64_t seed : seeds) {
    report.trials.push_back(
        run_trial(controller, variant, params, env, eval, seed));
    report.scores.push_back(reported_score(report.trials.back(), eval.strict));
    sum += report.scores.back();
  }
  report.average = sum / static_cast<double>(seeds.size());
  return report;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["controller_id"] = report.controller_id;
  j["variant"] = to_string(report.variant);
  j["strict"] = report.strict;
  j["average_score"] = report.average;
  auto& trials = j["trials"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    const TrialResult& t = report.trials[i];
    trials.push_back({{"seed", t.seed},
                      {"score", report.scores[i]},
                      {"raw_score", t.score},
                      {"time_in_goal", t.time_in_goal},
                      {"diverged", t.diverged},
                      {"steps", t.trajectory.size()},
                      {"disturbance_events", t.disturbances.events.size()}});
  }
  j["config"] = report.config_snapshot;
  return j.dump(2) + "\n";
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << report_json(report);
  finish(out, path);
}

void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "seed,score,diverged\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    out << report.trials[i].seed << ',' << report.scores[i] << ','
        << (report.trials[i].diverged ? 1 : 0) << '\n';
  }
  finish(out, path);
}

std::string format_score_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Trial #" << std::setw(10)
     << report.controller_id << "seed\n";
  os << std::fixed << std::setprecision(3);
  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    std::ostringstream score;
    score << std::fixed << std::setprecision(3) << report.scores[i];
    if (report.trials[i].diverged) score << " (E)";
    os << std::setw(12) << ("Trial_" + std::to_string(i + 1)) << std::setw(10)
       << score.str() << report.trials[i].seed << '\n';
  }
  os << std::setw(12) << "Avg Score" << report.average << '\n';
  return os.str();
}

void write_trajectory_csv(std::span<const TrajectorySample> trajectory,
                          const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "t,q1,q2,qd1,qd2,tau\n" << std::setprecision(17);
  for (const auto& s : trajectory) {
    out << s.t << ',' << s.q1 << ',' << s.q2 << ',' << s.qd1 << ',' << s.qd2
        << ',' << s.tau << '\n';
  }
  finish(out, path);
}

std::vector<TrajectorySample> read_trajectory_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("row 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,q1,q2,qd1,qd2,tau") {
    throw IoError("row 1: expected header t,q1,q2,qd1,qd2,tau");
  }
  std::vector<TrajectorySample> samples;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 6> v{};
    std::size_t pos = 0;
    for (int c = 0; c < 6; ++c) {
      const std::size_t end = line.find(',', pos);
      if ((c < 5) == (end == std::string::npos)) {
        throw IoError("row " + std::to_string(row) + ": expected 6 columns");
      }
      const std::string cell = line.substr(pos, end - pos);
      std::size_t used = 0;
      try {
        v[c] = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || !std::isfinite(v[c])) {
        throw IoError("row " + std::to_string(row) + ": bad number '" + cell +
                      "'");
      }
      pos = end + 1;
    }
    samples.push_back({v[0], v[1], v[2], v[3], v[4], v[5], false});
  }
  if (samples.empty()) throw IoError("row 2: trajectory has no data rows");
  return samples;
}

namespace {

struct Panel {
  const char* label;
  double TrajectorySample::*field;
  std::vector<double> references;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string render_trajectory_svg(std::span<const TrajectorySample> trajectory,
                                  double torque_limit) {
  using namespace svg;
  constexpr double pi = std::numbers::pi;
  const std::array<Panel, kPanels> panels{{
      {"q1 [rad]", &TrajectorySample::q1, {pi, -pi}},
      {"q2 [rad]", &TrajectorySample::q2, {pi, -pi}},
      {"qd1 [rad/s]", &TrajectorySample::qd1, {0.0}},
      {"qd2 [rad/s]", &TrajectorySample::qd2, {0.0}},
      {"tau [N m]", &TrajectorySample::tau, {torque_limit, -torque_limit}},
  }};

  const double plot_width = kWidth - kMarginLeft - kMarginRight;
  const double height =
      kMarginTop + kPanels * (kPanelHeight + kPanelGap) + kMarginTop;
  const double t0 = trajectory.empty() ? 0.0 : trajectory.front().t;
  double t1 = trajectory.empty() ? 1.0 : trajectory.back().t;
  if (t1 <= t0) t1 = t0 + 1.0;
  const auto x_of = [&](double t) {
    return kMarginLeft + plot_width * (t - t0) / (t1 - t0);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth, 0)
     << "\" height=\"" << fmt(height, 0) << "\" viewBox=\"0 0 " << fmt(kWidth, 0)
     << ' ' << fmt(height, 0) << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int i = 0; i < kPanels; ++i) {
    const Panel& panel = panels[i];
    double lo = panel.references.front();
    double hi = lo;
    for (double r : panel.references) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    for (const auto& s : trajectory) {
      lo = std::min(lo, s.*panel.field);
      hi = std::max(hi, s.*panel.field);
    }
    const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
    lo -= pad;
    hi += pad;
    const double top = kMarginTop + i * (kPanelHeight + kPanelGap);
    const auto y_of = [&](double v) {
      return top + kPanelHeight * (hi - v) / (hi - lo);
    };

    os << "<g class=\"panel\" data-index=\"" << i << "\" data-label=\""
       << panel.label << "\" data-ymin=\"" << fmt(lo, 12) << "\" data-ymax=\""
       << fmt(hi, 12) << "\">\n"
       << "<rect x=\"" << fmt(kMarginLeft) << "\" y=\"" << fmt(top)
       << "\" width=\"" << fmt(plot_width) << "\" height=\""
       << fmt(kPanelHeight)
       << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"0.5\"/>\n"
       << "<text x=\"5\" y=\"" << fmt(top + kPanelHeight / 2)
       << "\" font-size=\"11\" font-family=\"sans-serif\">" << panel.label
       << "</text>\n";
    for (double r : panel.references) {
      os << "<line class=\"reference\" data-value=\"" << fmt(r, 12)
         << "\" x1=\"" << fmt(kMarginLeft) << "\" x2=\""
         << fmt(kMarginLeft + plot_width) << "\" y1=\"" << fmt(y_of(r), 9)
         << "\" y2=\"" << fmt(y_of(r), 9)
         << "\" stroke=\"#555\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
    }
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"#1f77b4\" "
          "stroke-width=\"1\" points=\"";
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
      if (k) os << ' ';
      os << fmt(x_of(trajectory[k].t)) << ','
         << fmt(y_of(trajectory[k].*panel.field));
    }
    os << "\"/>\n</g>\n";
  }
  os << "<text x=\"" << fmt(kMarginLeft + plot_width / 2) << "\" y=\""
     << fmt(height - 5)
     << "\" font-size=\"11\" font-family=\"sans-serif\" "
        "text-anchor=\"middle\">time [s]</text>\n"
     << "</svg>\n";
  return os.str();
}

void export_trajectory(const TrialResult& result,
                       const std::filesystem::path& stem, double torque_limit) {
  std::filesystem::path csv = stem;
  csv += ".csv";
  std::filesystem::path svg_path = stem;
  svg_path += ".svg";
  write_trajectory_csv(result.trajectory, csv);
  auto out = open_for_write(svg_path);
  out << render_trajectory_svg(result.trajectory, torque_limit);
  finish(out, svg_path);
}

}  // namespace eapo
