#include "wigtomo/random.hpp"

namespace wigtomo::rng {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ (stream * 0xd1b54a32d192ed03ULL);
  h = splitmix64(state);
  state = h ^ (index * 0x8cb92ba72f3d8dd7ULL);
  return splitmix64(state);
}

}  // namespace wigtomo::rng
