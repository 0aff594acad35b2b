#include "veil/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace veil {

namespace {

// SplitMix64 output mix (Steele, Lea, Flood 2014).
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

}  // namespace

uint64_t Rng::next_u64() {
  uint64_t v = mix64(seed_ + (++counter_) * kGamma);
  return v;
}

double Rng::uniform01() {
  // 53 random bits, offset by half an ulp so the result lies in (0,1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

void Rng::normal_pair(double& z0, double& z1) {
  double u1 = uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  z0 = r * std::cos(a);
  z1 = r * std::sin(a);
}

double Rng::normal() {
  double z0, z1;
  normal_pair(z0, z1);
  return z0;
}

Tensor Rng::normal_tensor(Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  int64_t n = t.numel();
  for (int64_t i = 0; i < n; i += 2) {
    double z0, z1;
    normal_pair(z0, z1);
    t[i] = z0;
    if (i + 1 < n) t[i + 1] = z1;
  }
  return t;
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
  if (range == 0) return lo + static_cast<int64_t>(next_u64());  // full 64-bit span
  uint64_t rem = (0ull - range) % range;  // 2^64 mod range
  uint64_t limit = 0ull - rem;            // accept x < limit
  uint64_t x = next_u64();
  while (limit != 0 && x >= limit) x = next_u64();
  return lo + static_cast<int64_t>(x % range);
}

}  // namespace veil
