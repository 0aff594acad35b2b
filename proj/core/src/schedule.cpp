#include "veil/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace veil {

void NoiseSchedule::validate() const {
  if (T < 2 || beta.size() != static_cast<size_t>(T) || alpha_bar.size() != static_cast<size_t>(T)) {
    throw std::invalid_argument("schedule: inconsistent sizes for T=" + std::to_string(T));
  }
  double prev_beta = 0.0;
  double prod = 1.0;
  for (int64_t t = 1; t <= T; ++t) {
    double b = beta_at(t);
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("schedule: beta out of (0,1) at t=" + std::to_string(t));
    if (b < prev_beta) throw std::invalid_argument("schedule: beta not non-decreasing at t=" + std::to_string(t));
    prev_beta = b;
    prod *= 1.0 - b;
    double ab = alpha_bar_at(t);
    if (std::fabs(ab - prod) > 1e-12) {
      throw std::invalid_argument("schedule: alpha_bar mismatch at t=" + std::to_string(t));
    }
    if (t > 1 && !(ab < alpha_bar_at(t - 1))) {
      throw std::invalid_argument("schedule: alpha_bar not strictly decreasing at t=" + std::to_string(t));
    }
  }
  if (!(alpha_bar_at(1) < 1.0) || !(alpha_bar_at(T) > 0.0)) {
    throw std::invalid_argument("schedule: alpha_bar endpoints out of range");
  }
}

NoiseSchedule make_schedule(int64_t T, double beta_start, double beta_end) {
  if (T < 2) throw std::invalid_argument("make_schedule: T must be >= 2, got " + std::to_string(T));
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(static_cast<size_t>(T));
  s.alpha_bar.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (int64_t i = 0; i < T; ++i) {
    double frac = static_cast<double>(i) / static_cast<double>(T - 1);
    double b = beta_start + (beta_end - beta_start) * frac;
    s.beta[static_cast<size_t>(i)] = b;
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<size_t>(i)] = prod;
  }
  s.validate();
  return s;
}

}  // namespace veil
