#include "cli.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "eapo/checkpoint.hpp"
#include "eapo/config.hpp"
#include "eapo/errors.hpp"
#include "eapo/evaluation.hpp"
#include "eapo/trainer.hpp"

#ifndef EAPO_VERSION
#define EAPO_VERSION "unknown"
#endif

namespace eapo::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp(const char* format) {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, format);
  return os.str();
}

fs::path resolve_out_dir(const std::optional<fs::path>& out,
                         const std::string& run_id) {
  if (out) return *out;
  const char* root = std::getenv(kRunRootEnv);
  return fs::path(root && *root ? root : "runs") / run_id;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

// Run manifest: everything needed to reproduce the run plus the list of
// artifacts it produced (paths relative to the run directory).
void write_manifest(const fs::path& dir, const std::string& run_id,
                    const std::string& command, const RunConfig& config,
                    RobotVariant variant, std::uint64_t seed,
                    const std::vector<fs::path>& artifacts) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "run_id" << YAML::Value << run_id;
  e << YAML::Key << "timestamp" << YAML::Value
    << utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
  e << YAML::Key << "code_version" << YAML::Value << EAPO_VERSION;
  e << YAML::Key << "command" << YAML::Value << command;
  e << YAML::Key << "variant" << YAML::Value << to_string(variant);
  e << YAML::Key << "master_seed" << YAML::Value << seed;
  e << YAML::Key << "config" << YAML::Value << YAML::Load(dump_config(config));
  e << YAML::Key << "artifacts" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : artifacts) {
    e << fs::relative(a, dir).generic_string();
  }
  e << YAML::EndSeq << YAML::EndMap;
  write_text(dir / "manifest.yaml", std::string(e.c_str()) + "\n");
}

RunConfig load_or_default(const std::optional<fs::path>& path) {
  if (!path) return RunConfig{};
  if (!fs::exists(*path)) {
    throw ConfigError("", "config file '" + path->string() + "' does not exist");
  }
  return load_config(*path);
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config = load_or_default(args.config);
    const RobotVariant variant = parse_variant(args.variant);
    if (args.frames) {
      if (*args.frames <= 0) throw ConfigError("frames", "must be positive");
      config.trainer.total_frames = *args.frames;
    }
    config.validate();

    const std::string run_id = std::string(to_string(variant)) + "-s" +
                               std::to_string(args.seed) + "-" +
                               utc_timestamp("%Y%m%d-%H%M%S");
    const fs::path dir = resolve_out_dir(args.out, run_id);
    fs::create_directories(dir);
    const std::string resolved = dump_config(config);
    write_text(dir / "config.yaml", resolved);

    TrainOptions options;
    options.out_dir = dir;
    options.config_snapshot = resolved;
    options.on_iteration = [&out](const MetricsRow& row) {
      out << "iter " << row.iteration << " frames " << row.frames
          << " reward " << row.mean_reward << " rho_r " << row.rho_r;
      if (row.eval_score) out << " eval " << *row.eval_score;
      out << std::endl;
    };

    std::vector<fs::path> artifacts{dir / "config.yaml", dir / "metrics.csv"};
    int code = kExitOk;
    try {
      TrainResult result = train(config, variant, args.seed, options);
      artifacts.insert(artifacts.end(), result.checkpoints.begin(),
                       result.checkpoints.end());
      artifacts.push_back(dir / "final.ckpt");
      artifacts.push_back(dir / "best.ckpt");
      out << "finished " << result.metrics.size() << " iterations; best "
          << (result.best_score ? std::to_string(*result.best_score) : "n/a")
          << "\nrun directory: " << dir.string() << '\n';
    } catch (const NumericalFailure& e) {
      err << "numerical failure: " << e.what() << '\n';
      if (fs::exists(dir / "last_good.ckpt")) {
        artifacts.push_back(dir / "last_good.ckpt");
      }
      code = kExitNumerical;
    }
    write_manifest(dir, run_id, "train", config, variant, args.seed, artifacts);
    return code;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    RunConfig config;
    if (args.config) {
      config = load_or_default(args.config);
    } else if (!ckpt.config_yaml.empty()) {
      config = parse_config(ckpt.config_yaml);
    }
    check_network_shapes(ckpt, config.trainer);
    const RobotVariant variant =
        args.variant ? parse_variant(*args.variant) : ckpt.variant;
    if (!args.seeds.empty()) config.eval.seeds = args.seeds;
    if (args.strict) config.eval.strict = *args.strict;
    if (args.disturbances) config.eval.disturbances = *args.disturbances;
    config.validate();

    EvalReport report = evaluate_multi_seed(
        policy_controller(ckpt.state.policy), "AR-EAPO", variant, config.plant,
        config.env, config.eval);
    report.config_snapshot = dump_config(config);
    out << format_score_table(report);

    const std::string run_id = "eval-" + std::string(to_string(variant)) + "-" +
                               utc_timestamp("%Y%m%d-%H%M%S");
    const fs::path dir = resolve_out_dir(args.out, run_id);
    const fs::path traj_dir = dir / "trajectories";
    fs::create_directories(traj_dir);
    std::vector<fs::path> artifacts{dir / "report.json", dir / "report.csv"};
    write_report(report, artifacts[0]);
    write_report_csv(report, artifacts[1]);
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
      const TrialResult& trial = report.trials[i];
      const fs::path stem = traj_dir / ("trial_" + std::to_string(i + 1) +
                                        "_seed_" + std::to_string(trial.seed));
      export_trajectory(trial, stem, config.plant.torque_limit);
      fs::path disturbances = stem;
      disturbances += "_disturbances.csv";
      write_disturbance_csv(trial.disturbances, disturbances.string());
      for (const char* ext : {".csv", ".svg"}) {
        fs::path p = stem;
        p += ext;
        artifacts.push_back(p);
      }
      artifacts.push_back(disturbances);
    }
    write_manifest(dir, run_id, "eval", config, variant, ckpt.master_seed,
                   artifacts);
    out << "report: " << (dir / "report.json").string() << '\n';
    return kExitOk;
  });
}

int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto samples = read_trajectory_csv(args.trajectory);
    const double limit = args.torque_limit.value_or(PlantParams{}.torque_limit);
    if (!(limit > 0.0)) throw ConfigError("torque-limit", "must be positive");
    if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
    write_text(args.out, render_trajectory_svg(samples, limit));
    out << "wrote " << args.out.string() << '\n';
    return kExitOk;
  });
}

int cmd_inspect(const fs::path& checkpoint, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint c = load_checkpoint(checkpoint);
    const auto widths = [](const MlpLayout& layout) {
      std::ostringstream os;
      for (std::size_t i = 0; i < layout.widths().size(); ++i) {
        os << (i ? " -> " : "") << layout.widths()[i];
      }
      return os.str();
    };
    out << std::setprecision(10) << "variant:     " << to_string(c.variant)
        << "\nmaster_seed: " << c.master_seed
        << "\niteration:   " << c.state.iteration
        << "\nframes:      " << c.state.frames
        << "\nrho_r:       " << c.state.gain.rho_r
        << "\nrho_e:       " << c.state.gain.rho_e
        << "\nlog_std:     " << c.state.policy.log_std()
        << "\npolicy:      " << widths(c.state.policy.layout) << " ("
        << c.state.policy.params.size() << " params)"
        << "\ncritic:      " << widths(c.state.critic.layout) << " ("
        << c.state.critic.params.size() << " params)"
        << "\neval_score:  "
        << (c.eval_score ? std::to_string(*c.eval_score) : "n/a") << '\n';
    return kExitOk;
  });
}

int cmd_config(const std::optional<fs::path>& config, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    out << dump_config(load_or_default(config));
    return kExitOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Average-reward MaxEnt swing-up controller: train, evaluate, plot"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::string train_config;
  std::int64_t frames = 0;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a policy");
  train_cmd->add_option("config", train_config, "YAML config file (optional)");
  train_cmd->add_option("--variant", train_args.variant, "acrobot or pendubot")
      ->check(CLI::IsMember({"acrobot", "pendubot"}, CLI::ignore_case));
  train_cmd->add_option("--seed", train_args.seed, "Master seed");
  train_cmd->add_option("--frames", frames, "Total frame budget override");
  train_cmd->add_option("--out", train_out, "Run directory");

  EvalArgs eval_args;
  std::string eval_ckpt;
  std::string eval_config;
  std::string eval_variant;
  std::string eval_out;
  bool strict = true;
  bool disturbances = true;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--config", eval_config, "YAML config overriding the stored one");
  eval_cmd->add_option("--variant", eval_variant, "acrobot or pendubot")
      ->check(CLI::IsMember({"acrobot", "pendubot"}, CLI::ignore_case));
  eval_cmd->add_option("--seeds", eval_args.seeds, "Trial seeds")->delimiter(',');
  auto* strict_flag = eval_cmd->add_flag("--strict,!--no-strict", strict,
                                         "Score diverged trials as 0");
  auto* dist_flag = eval_cmd->add_flag("--disturbances,!--no-disturbances",
                                       disturbances, "Inject disturbances");
  eval_cmd->add_option("--out", eval_out, "Output directory");

  PlotArgs plot_args;
  std::string plot_in;
  std::string plot_out;
  double torque_limit = 0.0;
  auto* plot_cmd = app.add_subcommand("plot", "Render a trajectory CSV as SVG");
  plot_cmd->add_option("trajectory", plot_in, "Trajectory CSV")->required();
  plot_cmd->add_option("--out", plot_out, "Output SVG")->required();
  auto* limit_opt =
      plot_cmd->add_option("--torque-limit", torque_limit, "Torque reference, N m");

  std::string inspect_ckpt;
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect_cmd->add_option("checkpoint", inspect_ckpt, "Checkpoint file")->required();

  std::string show_config;
  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration");
  config_cmd->add_option("config", show_config, "YAML config file (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*train_cmd) {
    if (!train_config.empty()) train_args.config = train_config;
    if (train_cmd->count("--frames")) train_args.frames = frames;
    if (!train_out.empty()) train_args.out = train_out;
    std::transform(train_args.variant.begin(), train_args.variant.end(),
                   train_args.variant.begin(), ::tolower);
    return cmd_train(train_args, out, err);
  }
  if (*eval_cmd) {
    eval_args.checkpoint = eval_ckpt;
    if (!eval_config.empty()) eval_args.config = eval_config;
    if (!eval_variant.empty()) eval_args.variant = eval_variant;
    if (strict_flag->count()) eval_args.strict = strict;
    if (dist_flag->count()) eval_args.disturbances = disturbances;
    if (!eval_out.empty()) eval_args.out = eval_out;
    return cmd_eval(eval_args, out, err);
  }
  if (*plot_cmd) {
    plot_args.trajectory = plot_in;
    plot_args.out = plot_out;
    if (limit_opt->count()) plot_args.torque_limit = torque_limit;
    return cmd_plot(plot_args, out, err);
  }
  if (*inspect_cmd) return cmd_inspect(inspect_ckpt, out, err);
  if (*config_cmd) {
    return cmd_config(show_config.empty()
                          ? std::nullopt
                          : std::optional<fs::path>(show_config),
                      out, err);
  }
  return kExitUsage;
}

}  // namespace eapo::cli
