#pragma once

#include <cstdint>
#include <vector>

#include "veil/dataset.hpp"
#include "veil/model.hpp"
#include "veil/schedule.hpp"

namespace veil {

// Plain fixed-rate gradient descent in two phases: autoencoder
// reconstruction first, then denoiser noise-prediction with the autoencoder
// frozen. Deterministic: (seed, dataset, config) fixes every output bit.
struct TrainConfig {
  int64_t ae_steps = 3000;
  int64_t dm_steps = 3000;
  double ae_lr = 1e-3;
  double dm_lr = 1e-3;
  int64_t batch = 8;
  uint64_t seed = 7;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> ae_losses;  // one entry per autoencoder step
  std::vector<double> dm_losses;  // one entry per denoiser step
};

// Throws on divergence (non-finite loss), naming the phase and step.
TrainResult train(const Dataset& dataset, const NoiseSchedule& schedule, const TrainConfig& cfg);

// Continues denoiser training on the given images; encoder and decoder are
// untouched by construction. lr = 0 leaves params bit-identical.
ModelParams finetune(const ModelParams& base, const NoiseSchedule& schedule,
                     const std::vector<Tensor>& images, int64_t steps, double lr, uint64_t seed,
                     std::vector<double>* losses = nullptr);

// Ancestral sampling: z_T ~ N(0,I), reverse steps T..1 in latent space with
// sigma_t = sqrt(beta_t), then decode. Deterministic given seed.
std::vector<Tensor> sample(const ModelParams& params, const NoiseSchedule& schedule, int64_t n,
                           uint64_t seed);

// Single reverse pass from a partially noised latent at timestep t_start
// down to z_0 (no fresh start noise; used by the frozen-weights scenario).
Tensor denoise_from(const ModelParams& params, const NoiseSchedule& schedule, const Tensor& z_t,
                    int64_t t_start, Rng& rng);

}  // namespace veil
