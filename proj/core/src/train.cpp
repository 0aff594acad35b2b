#include "veil/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace veil {

namespace {

// Tensor storage aligned with ParamVars::encoder_vars()/decoder_vars()/
// denoiser_vars() ordering.
std::vector<Tensor*> encoder_tensors(ModelParams& p) {
  return {&p.enc_conv1_w, &p.enc_conv1_b, &p.enc_conv2_w,
          &p.enc_conv2_b, &p.enc_head_w,  &p.enc_head_b};
}

std::vector<Tensor*> decoder_tensors(ModelParams& p) {
  return {&p.dec_head_w,  &p.dec_head_b,  &p.dec_conv1_w,
          &p.dec_conv1_b, &p.dec_conv2_w, &p.dec_conv2_b};
}

std::vector<Tensor*> denoiser_tensors(ModelParams& p) {
  return {&p.den_conv1_w, &p.den_conv1_b, &p.den_temb_w,  &p.den_temb_b,
          &p.den_conv2_w, &p.den_conv2_b, &p.den_conv3_w, &p.den_conv3_b};
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
  if (lr == 0.0) return;  // keeps params bit-identical, including signed zeros
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    for (int64_t j = 0; j < p.numel(); ++j) p[j] -= lr * g[j];
  }
}

[[noreturn]] void diverged(const char* phase, int64_t step, const std::string& why) {
  throw std::runtime_error("train: " + std::string(phase) + " phase, step " +
                           std::to_string(step) + ": " + why);
}

}  // namespace

TrainResult train(const Dataset& dataset, const NoiseSchedule& schedule, const TrainConfig& cfg) {
  if (cfg.ae_steps < 1 || cfg.dm_steps < 1) {
    throw std::invalid_argument("train: step counts must be >= 1");
  }
  if (cfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
  if (!(cfg.ae_lr >= 0.0) || !(cfg.dm_lr >= 0.0)) {
    throw std::invalid_argument("train: learning rates must be finite and >= 0");
  }
  if (dataset.images.empty()) throw std::invalid_argument("train: dataset is empty");
  for (const Tensor& img : dataset.images) check_image_shape(img, "train");

  TrainResult out;
  out.params = ModelParams::init(cfg.seed);
  out.ae_losses.reserve(static_cast<size_t>(cfg.ae_steps));
  out.dm_losses.reserve(static_cast<size_t>(cfg.dm_steps));
  const int64_t n = static_cast<int64_t>(dataset.images.size());

  Rng rng(cfg.seed + 1);
  for (int64_t step = 0; step < cfg.ae_steps; ++step) {
    double loss_v;
    try {
      Graph g;
      ParamVars pv = load_params(g, out.params);
      Var total{};
      for (int64_t b = 0; b < cfg.batch; ++b) {
        int64_t idx = rng.uniform_int(0, n - 1);
        Var x = g.input(dataset.images[static_cast<size_t>(idx)]);
        Var l = g.mse(decode_node(g, pv, encode_node(g, pv, x)), x);
        total = b == 0 ? l : g.add(total, l);
      }
      Var loss = g.scale(total, 1.0 / static_cast<double>(cfg.batch));
      loss_v = g.scalar_value(loss);
      std::vector<Var> wrt = pv.encoder_vars();
      for (Var v : pv.decoder_vars()) wrt.push_back(v);
      std::vector<Tensor> grads = g.backward(loss, wrt);
      std::vector<Tensor*> slots = encoder_tensors(out.params);
      for (Tensor* t : decoder_tensors(out.params)) slots.push_back(t);
      sgd_step(slots, grads, cfg.ae_lr);
    } catch (const std::exception& e) {
      diverged("autoencoder", step, e.what());
    }
    if (!std::isfinite(loss_v)) diverged("autoencoder", step, "loss is not finite");
    out.ae_losses.push_back(loss_v);
  }

  // Autoencoder is frozen from here on; latents can be computed once.
  std::vector<Tensor> latents;
  latents.reserve(dataset.images.size());
  for (const Tensor& img : dataset.images) latents.push_back(encode(out.params, img));

  Rng dm_rng(cfg.seed + 2);
  for (int64_t step = 0; step < cfg.dm_steps; ++step) {
    double loss_v;
    try {
      Graph g;
      ParamVars pv = load_params(g, out.params);
      Var total{};
      for (int64_t b = 0; b < cfg.batch; ++b) {
        int64_t idx = dm_rng.uniform_int(0, n - 1);
        int64_t t = dm_rng.uniform_int(1, schedule.T);
        Var eps = g.input(dm_rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide}));
        Var z_t = add_noise_node(g, schedule, g.input(latents[static_cast<size_t>(idx)]), t, eps);
        Var l = g.mse(eps, denoiser_node(g, pv, z_t, t, schedule));
        total = b == 0 ? l : g.add(total, l);
      }
      Var loss = g.scale(total, 1.0 / static_cast<double>(cfg.batch));
      loss_v = g.scalar_value(loss);
      std::vector<Tensor> grads = g.backward(loss, pv.denoiser_vars());
      sgd_step(denoiser_tensors(out.params), grads, cfg.dm_lr);
    } catch (const std::exception& e) {
      diverged("denoiser", step, e.what());
    }
    if (!std::isfinite(loss_v)) diverged("denoiser", step, "loss is not finite");
    out.dm_losses.push_back(loss_v);
  }
  return out;
}

ModelParams finetune(const ModelParams& base, const NoiseSchedule& schedule,
                     const std::vector<Tensor>& images, int64_t steps, double lr, uint64_t seed,
                     std::vector<double>* losses) {
  if (steps < 1) throw std::invalid_argument("finetune: steps must be >= 1");
  if (!(lr >= 0.0)) throw std::invalid_argument("finetune: lr must be finite and >= 0");
  if (images.empty()) throw std::invalid_argument("finetune: image set is empty");
  for (const Tensor& img : images) check_image_shape(img, "finetune");

  ModelParams params = base;
  std::vector<Tensor> latents;
  latents.reserve(images.size());
  for (const Tensor& img : images) latents.push_back(encode(params, img));

  constexpr int64_t kBatch = 8;
  const int64_t n = static_cast<int64_t>(images.size());
  Rng rng(seed);
  for (int64_t step = 0; step < steps; ++step) {
    double loss_v;
    try {
      Graph g;
      ParamVars pv = load_params(g, params);
      Var total{};
      for (int64_t b = 0; b < kBatch; ++b) {
        int64_t idx = rng.uniform_int(0, n - 1);
        int64_t t = rng.uniform_int(1, schedule.T);
        Var eps = g.input(rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide}));
        Var z_t = add_noise_node(g, schedule, g.input(latents[static_cast<size_t>(idx)]), t, eps);
        Var l = g.mse(eps, denoiser_node(g, pv, z_t, t, schedule));
        total = b == 0 ? l : g.add(total, l);
      }
      Var loss = g.scale(total, 1.0 / static_cast<double>(kBatch));
      loss_v = g.scalar_value(loss);
      std::vector<Tensor> grads = g.backward(loss, pv.denoiser_vars());
      sgd_step(denoiser_tensors(params), grads, lr);
    } catch (const std::exception& e) {
      diverged("finetune", step, e.what());
    }
    if (!std::isfinite(loss_v)) diverged("finetune", step, "loss is not finite");
    if (losses) losses->push_back(loss_v);
  }
  return params;
}

Tensor denoise_from(const ModelParams& params, const NoiseSchedule& schedule, const Tensor& z_t,
                    int64_t t_start, Rng& rng) {
  check_latent_shape(z_t, "denoise_from");
  if (t_start < 1 || t_start > schedule.T) {
    throw std::invalid_argument("denoise_from: timestep " + std::to_string(t_start) +
                                " out of [1," + std::to_string(schedule.T) + "]");
  }
  Tensor z = z_t;
  for (int64_t t = t_start; t >= 1; --t) {
    Tensor pred = denoiser_forward(params, z, t, schedule);
    double beta = schedule.beta_at(t);
    double ab = schedule.alpha_bar_at(t);
    double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    double eps_coef = beta / std::sqrt(1.0 - ab);
    for (int64_t i = 0; i < z.numel(); ++i) {
      z[i] = inv_sqrt_alpha * (z[i] - eps_coef * pred[i]);
    }
    if (t > 1) {
      Tensor w = rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide});
      double sigma = std::sqrt(beta);
      for (int64_t i = 0; i < z.numel(); ++i) z[i] += sigma * w[i];
    }
    ensure_finite(z, "denoise_from latent");
  }
  return z;
}

std::vector<Tensor> sample(const ModelParams& params, const NoiseSchedule& schedule, int64_t n,
                           uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  Rng rng(seed);
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Tensor z = rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide});
    z = denoise_from(params, schedule, z, schedule.T, rng);
    out.push_back(decode(params, z));
  }
  return out;
}

}  // namespace veil
