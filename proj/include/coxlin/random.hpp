#ifndef COXLIN_RANDOM_HPP_
#define COXLIN_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace coxlin {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

// Seed of substream `stream` derived from a master seed:
//   mix64(mix64(seed) + 0x9E3779B97F4A7C15 * (stream + 1)).
// Replication r of an experiment draws from substream r, so results do not
// depend on which thread runs which replication.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream);

// mt19937_64 plus a portable mapping to uniforms on the open interval (0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng substream(std::uint64_t seed, std::uint64_t stream) { return Rng(substream_seed(seed, stream)); }

  std::uint64_t next() { return engine_(); }
  // ((x >> 11) + 0.5) * 2^-53, never exactly 0 or 1.
  double uniform();

 private:
  std::mt19937_64 engine_;
};

}  // namespace coxlin

#endif  // COXLIN_RANDOM_HPP_
