#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "veil/model.hpp"
#include "veil/schedule.hpp"
#include "veil/tensor.hpp"

namespace veil {

enum class AttackMode { kSemantic, kTextural, kFused };

const char* mode_name(AttackMode m);

struct AttackConfig {
  AttackMode mode = AttackMode::kFused;
  double fused_weight = 1e4;
  int64_t steps = 100;
  double alpha = 1.0 / 255.0;
  double epsilon = 17.0 / 255.0;
  std::optional<Tensor> target;  // required for textural and fused modes
  uint64_t seed = 0;
  bool record_deltas = false;  // keep the per-step delta sequence in the result

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct StepLoss {
  double semantic = 0.0;   // dm loss estimate at this step's (t, eps)
  double textural = 0.0;   // ||E(y) - E(x+delta)||_2
  double objective = 0.0;  // mode-combined value driving the step
};

struct StepAudit {
  double max_abs_delta = 0.0;
  double min_pixel = 0.0;  // of x + delta
  double max_pixel = 0.0;
};

struct PerturbationResult {
  Tensor delta;
  Tensor adversarial;  // x + delta, elementwise in [0,1]
  // One entry per step. loss_trace[k] is evaluated at the pre-update delta,
  // so loss_trace[0] is the clean starting point; audit[k] and
  // delta_history[k] describe the post-update delta.
  std::vector<StepLoss> loss_trace;
  std::vector<StepAudit> audit;
  std::vector<Tensor> delta_history;  // filled when config.record_deltas
  AttackConfig config;
};

// Monte-Carlo estimate of the diffusion training loss at a single (t, eps).
double semantic_term(const ModelParams& params, const NoiseSchedule& schedule,
                     const Tensor& x_prime, int64_t t, const Tensor& eps);

// Unsquared L2 distance between encoder latents of y and x + delta.
double textural_term(const ModelParams& params, const Tensor& x, const Tensor& delta,
                     const Tensor& y);

// w * semantic_term - textural_term at the given sample point.
double fused_objective(const ModelParams& params, const NoiseSchedule& schedule, const Tensor& x,
                       const Tensor& delta, const Tensor& y, double w, int64_t t,
                       const Tensor& eps);

// One sign-ascent update under the L-inf box:
//   d' = clamp(delta + alpha * sign(grad), -eps..eps), then the [0,1] pixel
//   clamp of x + d' is folded back into d'.
// Shared by the attack loop and the boundary-convergence oracle tests.
Tensor pgd_step(const Tensor& x, const Tensor& delta, const Tensor& grad, double alpha,
                double eps);

// Iterated sign-ascent from delta = 0. A fresh (t, eps) pair is drawn every
// step in every mode, so runs with equal seeds are paired across modes.
// Throws with the step index if a gradient turns non-finite.
PerturbationResult pgd_attack(const ModelParams& params, const NoiseSchedule& schedule,
                              const Tensor& x, const AttackConfig& cfg);

struct DirectionProbe {
  double w = 0.0;
  // Cosine of the fused gradient against each pure-mode gradient at the same
  // (t, eps, delta=0). Empty when a gradient is identically zero.
  std::optional<double> cos_semantic;
  std::optional<double> cos_textural;
};

std::vector<DirectionProbe> gradient_direction_probe(const ModelParams& params,
                                                     const NoiseSchedule& schedule,
                                                     const Tensor& x, const Tensor& y,
                                                     const std::vector<double>& w_list,
                                                     uint64_t seed);

}  // namespace veil
