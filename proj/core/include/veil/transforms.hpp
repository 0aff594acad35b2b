#pragma once

#include <cstdint>

#include "veil/rng.hpp"
#include "veil/tensor.hpp"

namespace veil {

enum class TransformKind { kNone, kCropResize, kGaussian };

const char* transform_name(TransformKind k);

struct TransformSpec {
  TransformKind kind = TransformKind::kNone;
  int64_t crop_px = 4;
  double noise_budget = 17.0 / 255.0;

  void validate(int64_t side) const;
};

// Central crop of (S-2k)x(S-2k), bilinear resize back to SxS (half-pixel
// sample centers, edge-clamped), output clamped to [0,1]. crop_px = 0 is the
// identity map bit-for-bit.
Tensor crop_and_resize(const Tensor& x, int64_t crop_px);

// x + noise with noise ~ N(0, (budget/2)^2) clamped to +-budget, result
// clamped to [0,1]. The output never leaves the L-inf budget around x.
Tensor gaussian_baseline(const Tensor& x, double budget, Rng& rng);

Tensor apply_transform(const TransformSpec& spec, const Tensor& x, Rng& rng);

}  // namespace veil
