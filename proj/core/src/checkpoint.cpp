#include "eapo/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "eapo/errors.hpp"

namespace eapo {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'A', 'P', 'O', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void pod(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vector(const Vector& v) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T pod() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ull << 30)) throw CheckpointError("checkpoint: string too long");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  Vector vector(Eigen::Index expected, const char* what) {
    const auto n = pod<std::uint64_t>();
    if (n != static_cast<std::uint64_t>(expected)) {
      throw CheckpointError(std::string("checkpoint: ") + what + " has " +
                            std::to_string(n) + " entries, layer widths imply " +
                            std::to_string(expected));
    }
    Vector v(static_cast<Eigen::Index>(n));
    in_.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }

 private:
  void check() {
    if (!in_) throw CheckpointError("checkpoint: unexpected end of file");
  }
  std::istream& in_;
};

void write_network(Writer& w, const MlpLayout& layout, const Vector& params,
                   const AdamState& adam) {
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(layout.widths().size()));
  for (int width : layout.widths()) w.pod<std::int32_t>(width);
  w.vector(params);
  w.pod<std::int64_t>(adam.step);
  w.pod(adam.beta1);
  w.pod(adam.beta2);
  w.pod(adam.eps);
  w.vector(adam.m);
  w.vector(adam.v);
}

template <typename Net>
void read_network(Reader& r, Net& net, AdamState& adam, Eigen::Index extra,
                  const char* name) {
  const auto count = r.pod<std::uint32_t>();
  if (count < 2 || count > 64) {
    throw CheckpointError(std::string("checkpoint: bad layer count for ") + name);
  }
  std::vector<int> widths(count);
  for (auto& width : widths) {
    width = r.pod<std::int32_t>();
    if (width <= 0) {
      throw CheckpointError(std::string("checkpoint: bad width in ") + name);
    }
  }
  net.layout = MlpLayout(widths);
  const Eigen::Index n = net.layout.num_params() + extra;
  net.params = r.vector(n, name);
  adam.step = r.pod<std::int64_t>();
  adam.beta1 = r.pod<double>();
  adam.beta2 = r.pod<double>();
  adam.eps = r.pod<double>();
  adam.m = r.vector(n, "optimizer first moment");
  adam.v = r.vector(n, "optimizer second moment");
}

std::string widths_string(const std::vector<int>& widths) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < widths.size(); ++i) {
    os << (i ? ", " : "") << widths[i];
  }
  os << ']';
  return os.str();
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  // Written to a temporary name first so readers never see a partial file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    Writer w(out);
    out.write(kMagic.data(), kMagic.size());
    w.pod(kCheckpointVersion);
    w.pod<std::uint8_t>(checkpoint.variant == RobotVariant::Acrobot ? 0 : 1);
    w.pod(checkpoint.master_seed);
    w.string(checkpoint.config_yaml);
    const TrainingState& s = checkpoint.state;
    w.pod<std::int64_t>(s.iteration);
    w.pod<std::int64_t>(s.frames);
    w.pod(s.gain.rho_r);
    w.pod(s.gain.rho_e);
    w.pod<std::uint8_t>(checkpoint.eval_score ? 1 : 0);
    w.pod(checkpoint.eval_score.value_or(0.0));
    write_network(w, s.policy.layout, s.policy.params, s.policy_adam);
    write_network(w, s.critic.layout, s.critic.params, s.critic_adam);
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw CheckpointError("'" + path.string() + "' is not a checkpoint file");
  }
  Reader r(in);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  Checkpoint c;
  const auto variant = r.pod<std::uint8_t>();
  if (variant > 1) throw CheckpointError("checkpoint: bad variant tag");
  c.variant = variant == 0 ? RobotVariant::Acrobot : RobotVariant::Pendubot;
  c.master_seed = r.pod<std::uint64_t>();
  c.config_yaml = r.string();
  TrainingState& s = c.state;
  s.iteration = r.pod<std::int64_t>();
  s.frames = r.pod<std::int64_t>();
  s.gain.rho_r = r.pod<double>();
  s.gain.rho_e = r.pod<double>();
  const bool has_score = r.pod<std::uint8_t>() != 0;
  const double score = r.pod<double>();
  if (has_score) c.eval_score = score;
  read_network(r, s.policy, s.policy_adam, 1, "policy parameters");
  read_network(r, s.critic, s.critic_adam, 0, "critic parameters");
  if (s.policy.layout.input_size() != kObservationSize ||
      s.policy.layout.output_size() != 1) {
    throw CheckpointError("checkpoint: policy network has the wrong input/output size");
  }
  if (s.critic.layout.input_size() != kObservationSize ||
      s.critic.layout.output_size() != 2) {
    throw CheckpointError("checkpoint: critic network has the wrong input/output size");
  }
  return c;
}

void check_network_shapes(const Checkpoint& checkpoint,
                          const TrainerConfig& cfg) {
  const auto hidden = [](const MlpLayout& layout) {
    const auto& w = layout.widths();
    return std::vector<int>(w.begin() + 1, w.end() - 1);
  };
  const auto policy = hidden(checkpoint.state.policy.layout);
  const auto critic = hidden(checkpoint.state.critic.layout);
  if (policy != cfg.policy_hidden) {
    throw CheckpointError("checkpoint policy hidden widths " +
                          widths_string(policy) + " do not match config " +
                          widths_string(cfg.policy_hidden));
  }
  if (critic != cfg.critic_hidden) {
    throw CheckpointError("checkpoint critic hidden widths " +
                          widths_string(critic) + " do not match config " +
                          widths_string(cfg.critic_hidden));
  }
}

}  // namespace eapo
