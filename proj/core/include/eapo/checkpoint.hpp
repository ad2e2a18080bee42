#ifndef EAPO_CHECKPOINT_HPP_
#define EAPO_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "eapo/dynamics.hpp"
#include "eapo/settings.hpp"
#include "eapo/trainer.hpp"

namespace eapo {

// Binary checkpoint, little-endian host layout:
//   magic "EAPOCKPT", u32 version,
//   variant, master seed, config text, iteration, frames, gain, eval score,
//   policy {widths, params, adam}, critic {widths, params, adam}.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RobotVariant variant = RobotVariant::Pendubot;
  std::uint64_t master_seed = 0;
  std::string config_yaml;
  std::optional<double> eval_score;
  TrainingState state;
};

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);

// Throws CheckpointError on a bad magic/version, truncated data, or
// parameter counts that do not match the stored layer widths.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws CheckpointError when the stored networks do not have the hidden
// widths the trainer config asks for.
void check_network_shapes(const Checkpoint& checkpoint,
                          const TrainerConfig& cfg);

}  // namespace eapo

#endif  // EAPO_CHECKPOINT_HPP_
