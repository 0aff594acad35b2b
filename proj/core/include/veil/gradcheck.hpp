#pragma once

#include <functional>
#include <string>
#include <vector>

#include "veil/graph.hpp"
#include "veil/rng.hpp"

namespace veil {

struct ModelParams;
struct NoiseSchedule;

// Builds a scalar loss from a single input variable.
using LossBuilder = std::function<Var(Graph&, Var)>;

// Compares the analytic gradient of f at x against central finite
// differences on n_coords randomly chosen coordinates. Returns the maximum
// of |analytic - central| / max(|analytic|, |central|, 1e-8).
double finite_diff_check(const LossBuilder& f, const Tensor& x, double h, int64_t n_coords,
                         Rng& rng);

constexpr double kGradCheckTol = 1e-5;
constexpr double kGradCheckH = 1e-5;

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
};

// Finite-difference checks covering every primitive, including the gradient
// paths into conv/linear weights and biases. Up to 100 coordinates per entry.
std::vector<GradCheckResult> gradcheck_primitives(uint64_t seed);

// The semantic, textural, and fused losses checked at n_images random
// images against the given model.
std::vector<GradCheckResult> gradcheck_losses(const ModelParams& params,
                                              const NoiseSchedule& schedule, int64_t n_images,
                                              uint64_t seed);

// A model whose every layer (including the normally zero-initialized final
// denoiser conv) carries gradient signal; used when no trained checkpoint is
// at hand.
ModelParams gradcheck_model(uint64_t seed);

}  // namespace veil
