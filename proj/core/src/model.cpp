#include "veil/model.hpp"

#include <cmath>
#include <stdexcept>

namespace veil {

namespace {

Tensor conv_init(Rng& rng, int64_t cout, int64_t cin, int64_t k, double gain) {
  Tensor w = rng.normal_tensor({cout, cin, k, k});
  double std = gain / std::sqrt(static_cast<double>(cin * k * k));
  for (double& v : w.data) v *= std;
  return w;
}

Tensor linear_init(Rng& rng, int64_t out, int64_t in) {
  Tensor w = rng.normal_tensor({out, in});
  double std = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : w.data) v *= std;
  return w;
}

}  // namespace

void check_image_shape(const Tensor& x, const char* what) {
  if (x.shape != Shape{3, 32, 32}) {
    throw std::invalid_argument(std::string(what) + ": expected image of shape [3,32,32], got " +
                                shape_str(x.shape));
  }
}

void check_latent_shape(const Tensor& z, const char* what) {
  if (z.shape != Shape{kLatentChannels, kLatentSide, kLatentSide}) {
    throw std::invalid_argument(std::string(what) + ": expected latent of shape [4,8,8], got " +
                                shape_str(z.shape));
  }
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::param_table() {
  return {
      {"enc.conv1.w", &enc_conv1_w}, {"enc.conv1.b", &enc_conv1_b},
      {"enc.conv2.w", &enc_conv2_w}, {"enc.conv2.b", &enc_conv2_b},
      {"enc.head.w", &enc_head_w},   {"enc.head.b", &enc_head_b},
      {"dec.head.w", &dec_head_w},   {"dec.head.b", &dec_head_b},
      {"dec.conv1.w", &dec_conv1_w}, {"dec.conv1.b", &dec_conv1_b},
      {"dec.conv2.w", &dec_conv2_w}, {"dec.conv2.b", &dec_conv2_b},
      {"den.conv1.w", &den_conv1_w}, {"den.conv1.b", &den_conv1_b},
      {"den.temb.w", &den_temb_w},   {"den.temb.b", &den_temb_b},
      {"den.conv2.w", &den_conv2_w}, {"den.conv2.b", &den_conv2_b},
      {"den.conv3.w", &den_conv3_w}, {"den.conv3.b", &den_conv3_b},
  };
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::param_table() const {
  auto mutable_table = const_cast<ModelParams*>(this)->param_table();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_table.size());
  for (auto& [name, t] : mutable_table) out.emplace_back(name, t);
  return out;
}

std::vector<std::pair<std::string, Shape>> ModelParams::architecture_table() {
  return {
      {"enc.conv1.w", {16, 3, 3, 3}},  {"enc.conv1.b", {16}},
      {"enc.conv2.w", {32, 16, 3, 3}}, {"enc.conv2.b", {32}},
      {"enc.head.w", {4, 32, 1, 1}},   {"enc.head.b", {4}},
      {"dec.head.w", {32, 4, 1, 1}},   {"dec.head.b", {32}},
      {"dec.conv1.w", {16, 32, 3, 3}}, {"dec.conv1.b", {16}},
      {"dec.conv2.w", {3, 16, 3, 3}},  {"dec.conv2.b", {3}},
      {"den.conv1.w", {32, 4, 3, 3}},  {"den.conv1.b", {32}},
      {"den.temb.w", {32, 16}},        {"den.temb.b", {32}},
      {"den.conv2.w", {32, 32, 3, 3}}, {"den.conv2.b", {32}},
      {"den.conv3.w", {4, 32, 3, 3}},  {"den.conv3.b", {4}},
  };
}

ModelParams ModelParams::init(uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.enc_conv1_w = conv_init(rng, 16, 3, 3, std::sqrt(2.0));
  p.enc_conv1_b = Tensor::zeros({16});
  p.enc_conv2_w = conv_init(rng, 32, 16, 3, std::sqrt(2.0));
  p.enc_conv2_b = Tensor::zeros({32});
  p.enc_head_w = conv_init(rng, 4, 32, 1, 1.0);
  p.enc_head_b = Tensor::zeros({4});
  p.dec_head_w = conv_init(rng, 32, 4, 1, 1.0);
  p.dec_head_b = Tensor::zeros({32});
  p.dec_conv1_w = conv_init(rng, 16, 32, 3, std::sqrt(2.0));
  p.dec_conv1_b = Tensor::zeros({16});
  p.dec_conv2_w = conv_init(rng, 3, 16, 3, 1.0);
  p.dec_conv2_b = Tensor::zeros({3});
  p.den_conv1_w = conv_init(rng, 32, 4, 3, std::sqrt(2.0));
  p.den_conv1_b = Tensor::zeros({32});
  p.den_temb_w = linear_init(rng, 32, kTimeEmbedDim);
  p.den_temb_b = Tensor::zeros({32});
  p.den_conv2_w = conv_init(rng, 32, 32, 3, std::sqrt(2.0));
  p.den_conv2_b = Tensor::zeros({32});
  p.den_conv3_w = Tensor::zeros({4, 32, 3, 3});
  p.den_conv3_b = Tensor::zeros({4});
  return p;
}

bool ModelParams::all_finite() const {
  for (auto& [name, t] : param_table()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

bool ModelParams::bit_equal(const ModelParams& o) const {
  auto a = param_table();
  auto b = o.param_table();
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].second->shape != b[i].second->shape) return false;
    if (a[i].second->data != b[i].second->data) return false;
  }
  return true;
}

std::vector<Var> ParamVars::encoder_vars() const {
  return {enc_conv1_w, enc_conv1_b, enc_conv2_w, enc_conv2_b, enc_head_w, enc_head_b};
}

std::vector<Var> ParamVars::decoder_vars() const {
  return {dec_head_w, dec_head_b, dec_conv1_w, dec_conv1_b, dec_conv2_w, dec_conv2_b};
}

std::vector<Var> ParamVars::denoiser_vars() const {
  return {den_conv1_w, den_conv1_b, den_temb_w, den_temb_b,
          den_conv2_w, den_conv2_b, den_conv3_w, den_conv3_b};
}

ParamVars load_params(Graph& g, const ModelParams& p) {
  ParamVars v;
  v.enc_conv1_w = g.input(p.enc_conv1_w);
  v.enc_conv1_b = g.input(p.enc_conv1_b);
  v.enc_conv2_w = g.input(p.enc_conv2_w);
  v.enc_conv2_b = g.input(p.enc_conv2_b);
  v.enc_head_w = g.input(p.enc_head_w);
  v.enc_head_b = g.input(p.enc_head_b);
  v.dec_head_w = g.input(p.dec_head_w);
  v.dec_head_b = g.input(p.dec_head_b);
  v.dec_conv1_w = g.input(p.dec_conv1_w);
  v.dec_conv1_b = g.input(p.dec_conv1_b);
  v.dec_conv2_w = g.input(p.dec_conv2_w);
  v.dec_conv2_b = g.input(p.dec_conv2_b);
  v.den_conv1_w = g.input(p.den_conv1_w);
  v.den_conv1_b = g.input(p.den_conv1_b);
  v.den_temb_w = g.input(p.den_temb_w);
  v.den_temb_b = g.input(p.den_temb_b);
  v.den_conv2_w = g.input(p.den_conv2_w);
  v.den_conv2_b = g.input(p.den_conv2_b);
  v.den_conv3_w = g.input(p.den_conv3_w);
  v.den_conv3_b = g.input(p.den_conv3_b);
  return v;
}

Var encode_node(Graph& g, const ParamVars& pv, Var x) {
  const Tensor& tx = g.value(x);
  if (tx.shape != Shape{3, 32, 32}) {
    throw std::invalid_argument("encode: expected image of shape [3,32,32], got " +
                                shape_str(tx.shape));
  }
  // Center pixel values to [-1,1] before the conv stack.
  Var h = g.scale(g.add(x, g.input(Tensor::full({3, 32, 32}, -0.5))), 2.0);
  h = g.silu(g.conv2d(h, pv.enc_conv1_w, pv.enc_conv1_b, 2));
  h = g.silu(g.conv2d(h, pv.enc_conv2_w, pv.enc_conv2_b, 2));
  return g.conv2d(h, pv.enc_head_w, pv.enc_head_b, 1);
}

Var decode_node(Graph& g, const ParamVars& pv, Var z) {
  const Tensor& tz = g.value(z);
  if (tz.shape != Shape{kLatentChannels, kLatentSide, kLatentSide}) {
    throw std::invalid_argument("decode: expected latent of shape [4,8,8], got " +
                                shape_str(tz.shape));
  }
  Var h = g.silu(g.conv2d(z, pv.dec_head_w, pv.dec_head_b, 1));
  h = g.silu(g.conv2d(g.upsample2x(h), pv.dec_conv1_w, pv.dec_conv1_b, 1));
  h = g.conv2d(g.upsample2x(h), pv.dec_conv2_w, pv.dec_conv2_b, 1);
  return g.sigmoid(h);
}

Tensor time_embedding(int64_t t, int64_t T) {
  if (t < 1 || t > T) {
    throw std::invalid_argument("time_embedding: timestep " + std::to_string(t) +
                                " out of [1," + std::to_string(T) + "]");
  }
  Tensor e = Tensor::zeros({kTimeEmbedDim});
  double s = static_cast<double>(t) / static_cast<double>(T);
  for (int64_t k = 0; k < kTimeEmbedDim / 2; ++k) {
    double freq = std::pow(10000.0, static_cast<double>(k) / (kTimeEmbedDim / 2.0 - 1.0));
    e[2 * k] = std::sin(s * freq);
    e[2 * k + 1] = std::cos(s * freq);
  }
  return e;
}

Var denoiser_node(Graph& g, const ParamVars& pv, Var z_t, int64_t t, const NoiseSchedule& s) {
  const Tensor& tz = g.value(z_t);
  if (tz.shape != Shape{kLatentChannels, kLatentSide, kLatentSide}) {
    throw std::invalid_argument("denoiser: expected latent of shape [4,8,8], got " +
                                shape_str(tz.shape));
  }
  if (t < 1 || t > s.T) {
    throw std::invalid_argument("denoiser: timestep " + std::to_string(t) + " out of [1," +
                                std::to_string(s.T) + "]");
  }
  Var h = g.conv2d(z_t, pv.den_conv1_w, pv.den_conv1_b, 1);
  Var emb = g.linear(g.input(time_embedding(t, s.T)), pv.den_temb_w, pv.den_temb_b);
  h = g.silu(g.add(h, emb));
  h = g.silu(g.conv2d(h, pv.den_conv2_w, pv.den_conv2_b, 1));
  return g.conv2d(h, pv.den_conv3_w, pv.den_conv3_b, 1);
}

Var add_noise_node(Graph& g, const NoiseSchedule& s, Var z0, int64_t t, Var eps) {
  if (t < 1 || t > s.T) {
    throw std::invalid_argument("add_noise: timestep " + std::to_string(t) + " out of [1," +
                                std::to_string(s.T) + "]");
  }
  if (!g.value(z0).same_shape(g.value(eps))) {
    throw std::invalid_argument("add_noise: z0 shape " + shape_str(g.value(z0).shape) +
                                " differs from eps shape " + shape_str(g.value(eps).shape));
  }
  double ab = s.alpha_bar_at(t);
  return g.add(g.scale(z0, std::sqrt(ab)), g.scale(eps, std::sqrt(1.0 - ab)));
}

Var dm_loss_node(Graph& g, const ParamVars& pv, const NoiseSchedule& s, Var x_prime, int64_t t,
                 Var eps) {
  Var z0 = encode_node(g, pv, x_prime);
  Var z_t = add_noise_node(g, s, z0, t, eps);
  Var pred = denoiser_node(g, pv, z_t, t, s);
  return g.mse(eps, pred);
}

Tensor encode(const ModelParams& p, const Tensor& x) {
  Graph g;
  ParamVars pv = load_params(g, p);
  return g.value(encode_node(g, pv, g.input(x)));
}

Tensor decode(const ModelParams& p, const Tensor& z) {
  Graph g;
  ParamVars pv = load_params(g, p);
  return g.value(decode_node(g, pv, g.input(z)));
}

Tensor denoiser_forward(const ModelParams& p, const Tensor& z_t, int64_t t,
                        const NoiseSchedule& s) {
  Graph g;
  ParamVars pv = load_params(g, p);
  return g.value(denoiser_node(g, pv, g.input(z_t), t, s));
}

Tensor add_noise(const NoiseSchedule& s, const Tensor& z0, int64_t t, const Tensor& eps) {
  Graph g;
  return g.value(add_noise_node(g, s, g.input(z0), t, g.input(eps)));
}

double dm_loss(const ModelParams& p, const NoiseSchedule& s, const Tensor& x_prime, int64_t t,
               const Tensor& eps) {
  Graph g;
  ParamVars pv = load_params(g, p);
  return g.scalar_value(dm_loss_node(g, pv, s, g.input(x_prime), t, g.input(eps)));
}

}  // namespace veil
