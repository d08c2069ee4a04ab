#include "coxlin/random.hpp"

namespace coxlin {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

double Rng::uniform() {
  constexpr double kTwoPowMinus53 = 1.0 / 9007199254740992.0;
  return (static_cast<double>(engine_() >> 11) + 0.5) * kTwoPowMinus53;
}

}  // namespace coxlin
