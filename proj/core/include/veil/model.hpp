#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "veil/graph.hpp"
#include "veil/rng.hpp"
#include "veil/schedule.hpp"
#include "veil/tensor.hpp"

namespace veil {

constexpr int64_t kLatentChannels = 4;
constexpr int64_t kLatentSide = 8;
constexpr int64_t kTimeEmbedDim = 16;
constexpr uint32_t kModelVersion = 1;

// Weights of the encoder, decoder, and noise-prediction network. The
// architecture is fixed; every tensor's shape is pinned by the table in
// param_table() and checked on checkpoint load.
//
// Encoder:  conv3x3 s2 3->16, silu, conv3x3 s2 16->32, silu, conv1x1 32->4
// Decoder:  conv1x1 4->32, silu, up2x, conv3x3 32->16, silu, up2x,
//           conv3x3 16->3, sigmoid
// Denoiser: conv3x3 4->32 (+ time embedding per channel), silu,
//           conv3x3 32->32, silu, conv3x3 32->4
struct ModelParams {
  Tensor enc_conv1_w, enc_conv1_b;
  Tensor enc_conv2_w, enc_conv2_b;
  Tensor enc_head_w, enc_head_b;
  Tensor dec_head_w, dec_head_b;
  Tensor dec_conv1_w, dec_conv1_b;
  Tensor dec_conv2_w, dec_conv2_b;
  Tensor den_conv1_w, den_conv1_b;
  Tensor den_temb_w, den_temb_b;
  Tensor den_conv2_w, den_conv2_b;
  Tensor den_conv3_w, den_conv3_b;
  uint32_t version = kModelVersion;

  // Name/tensor pairs in checkpoint order.
  std::vector<std::pair<std::string, Tensor*>> param_table();
  std::vector<std::pair<std::string, const Tensor*>> param_table() const;

  // Expected shape per tensor name, in the same order.
  static std::vector<std::pair<std::string, Shape>> architecture_table();

  // He/Xavier-style init; the last denoiser conv starts at zero so an
  // untrained model predicts zero noise.
  static ModelParams init(uint64_t seed);

  bool all_finite() const;
  bool bit_equal(const ModelParams& o) const;
};

// Graph handles for the parameters, so model forward passes can be recorded
// against trainable or frozen leaves alike.
struct ParamVars {
  Var enc_conv1_w, enc_conv1_b;
  Var enc_conv2_w, enc_conv2_b;
  Var enc_head_w, enc_head_b;
  Var dec_head_w, dec_head_b;
  Var dec_conv1_w, dec_conv1_b;
  Var dec_conv2_w, dec_conv2_b;
  Var den_conv1_w, den_conv1_b;
  Var den_temb_w, den_temb_b;
  Var den_conv2_w, den_conv2_b;
  Var den_conv3_w, den_conv3_b;

  std::vector<Var> encoder_vars() const;
  std::vector<Var> decoder_vars() const;
  std::vector<Var> denoiser_vars() const;
};

ParamVars load_params(Graph& g, const ModelParams& p);

// Graph-recorded forward passes. x is [3,32,32], latents are [4,8,8].
Var encode_node(Graph& g, const ParamVars& pv, Var x);
Var decode_node(Graph& g, const ParamVars& pv, Var z);
Var denoiser_node(Graph& g, const ParamVars& pv, Var z_t, int64_t t, const NoiseSchedule& s);
// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, recorded in-graph.
Var add_noise_node(Graph& g, const NoiseSchedule& s, Var z0, int64_t t, Var eps);
// || eps - denoiser(add_noise(encode(x'), t, eps), t) ||^2 / n as a graph node.
Var dm_loss_node(Graph& g, const ParamVars& pv, const NoiseSchedule& s, Var x_prime, int64_t t,
                 Var eps);

// Sinusoidal embedding of t/T, computed host-side (t is not differentiated).
Tensor time_embedding(int64_t t, int64_t T);

// Value-level conveniences; each records a scratch graph internally.
Tensor encode(const ModelParams& p, const Tensor& x);
Tensor decode(const ModelParams& p, const Tensor& z);
Tensor denoiser_forward(const ModelParams& p, const Tensor& z_t, int64_t t,
                        const NoiseSchedule& s);
Tensor add_noise(const NoiseSchedule& s, const Tensor& z0, int64_t t, const Tensor& eps);
double dm_loss(const ModelParams& p, const NoiseSchedule& s, const Tensor& x_prime, int64_t t,
               const Tensor& eps);

void check_image_shape(const Tensor& x, const char* what);
void check_latent_shape(const Tensor& z, const char* what);

}  // namespace veil
