#pragma once

#include <cstdint>
#include <string>

#include "veil/tensor.hpp"

namespace veil {

// Reads an 8-bit RGB PNG into a [3,H,W] tensor with values in [0,1]
// (v = byte / 255). Grayscale, palette, or 16-bit files are rejected with a
// descriptive error; RGBA alpha is dropped.
Tensor load_image(const std::string& path);

// Same, but requires the decoded image to be exactly expect_h x expect_w.
Tensor load_image(const std::string& path, int64_t expect_h, int64_t expect_w);

// Writes a [3,H,W] tensor as an 8-bit RGB PNG. Values are clamped to [0,1]
// and quantized as round(v * 255).
void save_image(const std::string& path, const Tensor& img);

}  // namespace veil
