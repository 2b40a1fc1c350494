#pragma once

#include <cstdint>
#include <random>

namespace wigtomo::rng {

using Engine = std::mt19937_64;

/// Independent stream families derived from one user seed.
enum class Stream : std::uint64_t {
  vacuum_batch = 1,
  heralded_batch = 2,
  bootstrap = 3,
};

/// Seed for substream `index` of family `stream`. Each consumer that needs
/// reproducible parallel output (segments, bootstrap replicas) keys its
/// generator on its own index, never on execution order.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

inline Engine substream(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Engine(substream_seed(seed, static_cast<std::uint64_t>(stream), index));
}

}  // namespace wigtomo::rng
