#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "veil/tensor.hpp"

namespace veil {

constexpr int64_t kImageChannels = 3;
constexpr int64_t kImageSide = 32;

// A set of 3x32x32 images with values in [0,1]. Procedural sets are fully
// determined by (count, seed); directory sets load PNGs.
struct Dataset {
  std::vector<Tensor> images;

  // Random two-color striped / checkered textures with random period and
  // phase. Identical (n, seed) regenerates identical images.
  static Dataset procedural(int64_t n, uint64_t seed);
  static Dataset from_directory(const std::string& dir);

  size_t size() const { return images.size(); }
};

constexpr uint64_t kDefaultDatasetSeed = 42;

}  // namespace veil
