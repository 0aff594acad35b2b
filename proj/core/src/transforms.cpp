#include "veil/transforms.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace veil {

namespace {

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

const char* transform_name(TransformKind k) {
  switch (k) {
    case TransformKind::kNone: return "none";
    case TransformKind::kCropResize: return "crop_resize";
    case TransformKind::kGaussian: return "gaussian";
  }
  return "?";
}

void TransformSpec::validate(int64_t side) const {
  if (crop_px < 0) throw std::invalid_argument("transform: crop_px must be >= 0");
  if (2 * crop_px >= side) {
    throw std::invalid_argument("transform: crop_px " + std::to_string(crop_px) +
                                " leaves no pixels of a side-" + std::to_string(side) + " image");
  }
  if (kind == TransformKind::kGaussian && !(noise_budget > 0.0)) {
    throw std::invalid_argument("transform: noise_budget must be > 0");
  }
}

Tensor crop_and_resize(const Tensor& x, int64_t crop_px) {
  if (x.rank() != 3) {
    throw std::invalid_argument("crop_and_resize: expected [C,H,W] tensor, got " +
                                shape_str(x.shape));
  }
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (crop_px < 0 || 2 * crop_px >= H || 2 * crop_px >= W) {
    throw std::invalid_argument("crop_and_resize: crop_px " + std::to_string(crop_px) +
                                " out of range for " + shape_str(x.shape));
  }
  const int64_t ch = H - 2 * crop_px;  // cropped height
  const int64_t cw = W - 2 * crop_px;

  Tensor out = Tensor::zeros(x.shape);
  for (int64_t y = 0; y < H; ++y) {
    // Half-pixel convention: destination center y+0.5 maps into the crop.
    double sy = (static_cast<double>(y) + 0.5) * (static_cast<double>(ch) / H) - 0.5;
    sy = clamp(sy, 0.0, static_cast<double>(ch - 1));
    int64_t y0 = static_cast<int64_t>(std::floor(sy));
    int64_t y1 = y0 + 1 < ch ? y0 + 1 : ch - 1;
    double fy = sy - static_cast<double>(y0);
    for (int64_t xp = 0; xp < W; ++xp) {
      double sx = (static_cast<double>(xp) + 0.5) * (static_cast<double>(cw) / W) - 0.5;
      sx = clamp(sx, 0.0, static_cast<double>(cw - 1));
      int64_t x0 = static_cast<int64_t>(std::floor(sx));
      int64_t x1 = x0 + 1 < cw ? x0 + 1 : cw - 1;
      double fx = sx - static_cast<double>(x0);
      for (int64_t c = 0; c < C; ++c) {
        double p00 = x.at(c, crop_px + y0, crop_px + x0);
        double p01 = x.at(c, crop_px + y0, crop_px + x1);
        double p10 = x.at(c, crop_px + y1, crop_px + x0);
        double p11 = x.at(c, crop_px + y1, crop_px + x1);
        double v = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) +
                   fy * ((1.0 - fx) * p10 + fx * p11);
        out.at(c, y, xp) = clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

Tensor gaussian_baseline(const Tensor& x, double budget, Rng& rng) {
  if (!(budget > 0.0)) throw std::invalid_argument("gaussian_baseline: budget must be > 0");
  Tensor noise = rng.normal_tensor(x.shape);
  Tensor out = x;
  const double sigma = budget / 2.0;
  for (int64_t i = 0; i < out.numel(); ++i) {
    double n = clamp(noise[i] * sigma, -budget, budget);
    out[i] = clamp(out[i] + n, 0.0, 1.0);
  }
  return out;
}

Tensor apply_transform(const TransformSpec& spec, const Tensor& x, Rng& rng) {
  spec.validate(x.rank() == 3 ? x.dim(1) : 0);
  switch (spec.kind) {
    case TransformKind::kNone: return x;
    case TransformKind::kCropResize: return crop_and_resize(x, spec.crop_px);
    case TransformKind::kGaussian: return gaussian_baseline(x, spec.noise_budget, rng);
  }
  throw std::logic_error("apply_transform: unreachable");
}

}  // namespace veil
