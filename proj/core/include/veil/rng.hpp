#pragma once

#include <cstdint>

#include "veil/tensor.hpp"

namespace veil {

// Counter-based deterministic generator. The i-th raw draw is a pure
// function of (seed, i) via the SplitMix64 output mix, so a stream is fully
// determined by its seed and current counter and can be reproduced on any
// platform bit-exactly. Normal variates use the Box-Muller transform and
// consume exactly two counter positions per pair; no spare is cached across
// calls, so any sample is a function of (seed, counter at call, request).
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

  uint64_t next_u64();
  // Uniform on (0,1), never exactly 0 or 1.
  double uniform01();
  // Standard normal; consumes two counter positions, discards the pair's
  // second variate.
  double normal();
  // i.i.d. standard normals; consumes 2*ceil(numel/2) counter positions.
  Tensor normal_tensor(Shape shape);
  // Uniform integer on [lo, hi] inclusive, exact via rejection sampling.
  int64_t uniform_int(int64_t lo, int64_t hi);

 private:
  uint64_t seed_;
  uint64_t counter_;
  void normal_pair(double& z0, double& z1);
};

}  // namespace veil
