#ifndef EAPO_TOOLS_CLI_HPP_
#define EAPO_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eapo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Environment variable naming the directory that holds run directories when
// --out is not given.
inline constexpr const char* kRunRootEnv = "EAPO_RUN_ROOT";

struct TrainArgs {
  std::optional<std::filesystem::path> config;
  std::string variant = "pendubot";
  std::uint64_t seed = 0;
  std::optional<std::int64_t> frames;
  std::optional<std::filesystem::path> out;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> variant;
  std::vector<std::uint64_t> seeds;
  std::optional<bool> strict;
  std::optional<bool> disturbances;
  std::optional<std::filesystem::path> out;
};

struct PlotArgs {
  std::filesystem::path trajectory;
  std::filesystem::path out;
  std::optional<double> torque_limit;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err);
int cmd_inspect(const std::filesystem::path& checkpoint, std::ostream& out,
                std::ostream& err);
// Prints the resolved default configuration (or the given file, resolved).
int cmd_config(const std::optional<std::filesystem::path>& config,
               std::ostream& out, std::ostream& err);

// Parses argv and dispatches. Usage errors return kExitUsage.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eapo::cli

#endif  // EAPO_TOOLS_CLI_HPP_
