#ifndef EAPO_RNG_HPP_
#define EAPO_RNG_HPP_

#include <cstdint>
#include <random>

namespace eapo {

using Rng = std::mt19937_64;

// Stream identifiers used when splitting a master seed. Each consumer gets
// its own engine so that adding draws in one place never shifts another.
namespace stream {
inline constexpr std::uint64_t kEnvBase = 0x1000;     // + env index
inline constexpr std::uint64_t kShuffle = 0x2;         // minibatch order
inline constexpr std::uint64_t kInit = 0x3;            // network weights
inline constexpr std::uint64_t kDisturbance = 0x4;     // eval schedules
}  // namespace stream

// Derives an independent engine from (master_seed, stream_id). The splitting
// rule is a std::seed_seq over the four 32-bit halves of both values, so the
// mapping is fixed for a given standard library.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

}  // namespace eapo

#endif  // EAPO_RNG_HPP_
