#include "eapo/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <type_traits>
#include <functional>
#include <map>
#include <sstream>

#include "eapo/errors.hpp"

namespace eapo {

void TrainerConfig::validate() const {
  auto unit = [](double v, const char* key) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
  };
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(key, "must be positive");
  };
  unit(lambda_r, "lambda_r");
  unit(lambda_e, "lambda_e");
  if (!(tau >= 0.0)) throw ConfigError("tau", "must be >= 0");
  positive(clip_eps, "clip_eps");
  if (!(gain_lr >= 0.0)) throw ConfigError("gain_lr", "must be >= 0");
  positive(lr, "lr");
  if (!(c2 >= 0.0)) throw ConfigError("c2", "must be >= 0");
  if (!(vf_coef >= 0.0)) throw ConfigError("vf_coef", "must be >= 0");
  positive(n_envs, "n_envs");
  positive(n_rollout_steps, "n_rollout_steps");
  positive(n_epochs, "n_epochs");
  positive(batch_size, "batch_size");
  positive(max_grad_norm, "max_grad_norm");
  if (policy_hidden.empty()) throw ConfigError("policy_hidden", "needs at least one layer");
  if (critic_hidden.empty()) throw ConfigError("critic_hidden", "needs at least one layer");
  for (int w : policy_hidden) positive(w, "policy_hidden");
  for (int w : critic_hidden) positive(w, "critic_hidden");
  if (total_frames < 0) throw ConfigError("total_frames", "must be >= 0");
  if (eval_period < 0) throw ConfigError("eval_period", "must be >= 0");
  positive(max_consecutive_aborts, "max_consecutive_aborts");
}

void EvalConfig::validate() const {
  if (!(duration > 0.0)) throw ConfigError("duration", "must be positive");
}

void RunConfig::validate() const {
  plant.validate();
  env.validate();
  trainer.validate();
  eval.validate();
}

std::vector<std::uint64_t> default_seeds(RobotVariant variant) {
  if (variant == RobotVariant::Acrobot) return {35, 177, 1670, 334, 15793};
  return {6362, 1709, 49219, 83, 558};
}

namespace {

using Setter = std::function<void(const YAML::Node&)>;
using Getter = std::function<YAML::Node()>;

struct Field {
  Setter set;
  Getter get;
};

// Shortest decimal form that reads back to the same double.
YAML::Node number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return YAML::Node(std::string(buf, res.ptr));
}

template <typename T>
Field bind(T& target) {
  return {[&target](const YAML::Node& n) { target = n.as<T>(); },
          [&target] {
            if constexpr (std::is_same_v<T, double>) {
              return number(target);
            } else {
              return YAML::Node(target);
            }
          }};
}

YAML::Node number_list(const double* first, std::size_t count) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (std::size_t i = 0; i < count; ++i) n.push_back(number(first[i]));
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

template <std::size_t N>
Field bind(std::array<double, N>& target) {
  return {[&target](const YAML::Node& n) {
            const auto v = n.as<std::vector<double>>();
            if (v.size() != N) {
              throw std::invalid_argument("expected a list of " +
                                          std::to_string(N) + " numbers");
            }
            std::copy(v.begin(), v.end(), target.begin());
          },
          [&target] { return number_list(target.data(), N); }};
}

Field bind_list(std::vector<int>& target) {
  return {[&target](const YAML::Node& n) { target = n.as<std::vector<int>>(); },
          [&target] {
            YAML::Node n(target);
            n.SetStyle(YAML::EmitterStyle::Flow);
            return n;
          }};
}

Field bind_seeds(std::vector<std::uint64_t>& target) {
  return {[&target](const YAML::Node& n) {
            target = n.as<std::vector<std::uint64_t>>();
          },
          [&target] {
            YAML::Node n(YAML::NodeType::Sequence);
            for (auto s : target) n.push_back(s);
            n.SetStyle(YAML::EmitterStyle::Flow);
            return n;
          }};
}

Field bind_range(std::pair<double, double>& target) {
  return {[&target](const YAML::Node& n) {
            const auto v = n.as<std::vector<double>>();
            if (v.size() != 2) throw std::invalid_argument("expected [low, high]");
            target = {v[0], v[1]};
          },
          [&target] {
            const double v[2] = {target.first, target.second};
            return number_list(v, 2);
          }};
}

Field bind_mode(EpisodeMode& target) {
  return {[&target](const YAML::Node& n) {
            const auto s = n.as<std::string>();
            if (s == "train") target = EpisodeMode::Train;
            else if (s == "eval") target = EpisodeMode::Eval;
            else throw std::invalid_argument("expected 'train' or 'eval'");
          },
          [&target] {
            return YAML::Node(target == EpisodeMode::Train ? "train" : "eval");
          }};
}

Field bind_gain_mode(GainMode& target) {
  return {[&target](const YAML::Node& n) {
            const auto s = n.as<std::string>();
            if (s == "per_stream") target = GainMode::PerStream;
            else if (s == "combined") target = GainMode::Combined;
            else throw std::invalid_argument("expected 'per_stream' or 'combined'");
          },
          [&target] {
            return YAML::Node(target == GainMode::PerStream ? "per_stream"
                                                            : "combined");
          }};
}

// Ordered (section, key) -> binding table over one RunConfig instance.
using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

Schema schema(RunConfig& c) {
  auto& p = c.plant;
  auto& e = c.env;
  auto& t = c.trainer;
  auto& v = c.eval;
  return {
      {"plant",
       {{"mass_1", bind(p.mass_1)},
        {"mass_2", bind(p.mass_2)},
        {"length_1", bind(p.length_1)},
        {"length_2", bind(p.length_2)},
        {"com_1", bind(p.com_1)},
        {"com_2", bind(p.com_2)},
        {"inertia_1", bind(p.inertia_1)},
        {"inertia_2", bind(p.inertia_2)},
        {"gravity", bind(p.gravity)},
        {"damping_1", bind(p.damping_1)},
        {"damping_2", bind(p.damping_2)},
        {"coulomb_1", bind(p.coulomb_1)},
        {"coulomb_2", bind(p.coulomb_2)},
        {"torque_limit", bind(p.torque_limit)},
        {"dt", bind(p.dt)},
        {"integrator_substeps", bind(p.integrator_substeps)}}},
      {"env",
       {{"alpha", bind(e.alpha)},
        {"q_diag", bind(e.q_diag)},
        {"goal", bind(e.goal)},
        {"reset_std", bind(e.reset_std)},
        {"p_trunc", bind(e.p_trunc)},
        {"vel_norm", bind(e.vel_norm)},
        {"goal_height_fraction", bind(e.goal_height_fraction)},
        {"mode", bind_mode(e.mode)}}},
      {"trainer",
       {{"tau", bind(t.tau)},
        {"lambda_r", bind(t.lambda_r)},
        {"lambda_e", bind(t.lambda_e)},
        {"clip_eps", bind(t.clip_eps)},
        {"gain_lr", bind(t.gain_lr)},
        {"lr", bind(t.lr)},
        {"c2", bind(t.c2)},
        {"vf_coef", bind(t.vf_coef)},
        {"n_envs", bind(t.n_envs)},
        {"n_rollout_steps", bind(t.n_rollout_steps)},
        {"n_epochs", bind(t.n_epochs)},
        {"batch_size", bind(t.batch_size)},
        {"max_grad_norm", bind(t.max_grad_norm)},
        {"adv_minibatch_norm", bind(t.adv_minibatch_norm)},
        {"log_std_init", bind(t.log_std_init)},
        {"policy_hidden", bind_list(t.policy_hidden)},
        {"critic_hidden", bind_list(t.critic_hidden)},
        {"gain_mode", bind_gain_mode(t.gain_mode)},
        {"total_frames", bind(t.total_frames)},
        {"eval_period", bind(t.eval_period)},
        {"max_consecutive_aborts", bind(t.max_consecutive_aborts)}}},
      {"eval",
       {{"duration", bind(v.duration)},
        {"seeds", bind_seeds(v.seeds)},
        {"disturbances", bind(v.disturbances)},
        {"disturbance_magnitude", bind(v.disturbance.magnitude)},
        {"disturbance_interval", bind_range(v.disturbance.interval)},
        {"disturbance_pulse_duration", bind_range(v.disturbance.pulse_duration)},
        {"strict", bind(v.strict)}}},
  };
}

}  // namespace

RunConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed YAML: ") + e.what());
  }
  RunConfig config;
  if (root.IsNull()) return config;
  if (!root.IsMap()) throw ConfigError("", "top level must be a mapping");

  Schema table = schema(config);
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const auto& s) { return s.first == name; });
    if (it == table.end()) throw ConfigError(name, "unknown section");
    if (section.second.IsNull()) continue;
    if (!section.second.IsMap()) throw ConfigError(name, "section must be a mapping");
    for (const auto& entry : section.second) {
      const auto key = entry.first.as<std::string>();
      const std::string qualified = name + "." + key;
      auto field = std::find_if(it->second.begin(), it->second.end(),
                                [&](const auto& f) { return f.first == key; });
      if (field == it->second.end()) throw ConfigError(qualified, "unknown key");
      try {
        field->second.set(entry.second);
      } catch (const YAML::Exception&) {
        throw ConfigError(qualified, "value has the wrong type");
      } catch (const std::invalid_argument& e) {
        throw ConfigError(qualified, e.what());
      }
    }
  }

  // Re-throw validation failures with the section prefix attached.
  const auto prefixed = [](const char* section, const auto& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(section) + "." + e.key(), e.detail());
    }
  };
  prefixed("plant", [&] { config.plant.validate(); });
  prefixed("env", [&] { config.env.validate(); });
  prefixed("trainer", [&] { config.trainer.validate(); });
  prefixed("eval", [&] { config.eval.validate(); });
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string dump_config(const RunConfig& config) {
  RunConfig copy = config;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  for (const auto& [section, fields] : schema(copy)) {
    out << YAML::Key << section << YAML::Value << YAML::BeginMap;
    for (const auto& [key, field] : fields) {
      out << YAML::Key << key << YAML::Value << field.get();
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace eapo
