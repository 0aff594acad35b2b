#pragma once

#include <cstdint>
#include <vector>

namespace veil {

// Forward-process constants of the denoising diffusion chain. beta is the
// per-step noise rate, alpha_bar the cumulative product of (1 - beta).
// Timesteps are 1-based: t in [1, T].
struct NoiseSchedule {
  int64_t T = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  double beta_at(int64_t t) const { return beta[static_cast<size_t>(t - 1)]; }
  double alpha_bar_at(int64_t t) const { return alpha_bar[static_cast<size_t>(t - 1)]; }

  // Throws if the monotonicity/range invariants do not hold.
  void validate() const;
};

// Linear beta ramp from beta_start to beta_end over T steps; alpha_bar by
// cumulative product. Requires T >= 2 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int64_t T, double beta_start, double beta_end);

inline NoiseSchedule default_schedule() { return make_schedule(100, 1e-4, 0.02); }

}  // namespace veil
