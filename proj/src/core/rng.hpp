#pragma once

#include <cstdint>
#include <string>

namespace lsen {

// Deterministic, serializable PRNG (xoshiro256** seeded via splitmix64).
// Implemented by hand so that streams are bit-identical across platforms
// and can be embedded in checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);
  // Standard normal via Box-Muller (no cached spare, one sample per call).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Derive an independent child stream; `tag` separates subsystems.
  Rng split(uint64_t tag) const;

  // State round-trips through text for checkpointing.
  std::string serialize() const;
  static Rng deserialize(const std::string& text);

 private:
  uint64_t s_[4];
};

}  // namespace lsen
