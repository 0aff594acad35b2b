#include "veil/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "veil/image_io.hpp"
#include "veil/rng.hpp"

namespace veil {

Dataset Dataset::procedural(int64_t n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("procedural dataset: n must be >= 1");
  Dataset ds;
  ds.images.reserve(static_cast<size_t>(n));
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    int64_t kind = rng.uniform_int(0, 2);  // 0 h-stripes, 1 v-stripes, 2 checker
    int64_t period = rng.uniform_int(0, 1) == 0 ? 8 : 16;
    double phase_y = rng.uniform01() * static_cast<double>(period);
    double phase_x = rng.uniform01() * static_cast<double>(period);
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) c0[c] = rng.uniform01();
    for (int c = 0; c < 3; ++c) c1[c] = rng.uniform01();

    Tensor img = Tensor::zeros({kImageChannels, kImageSide, kImageSide});
    for (int64_t y = 0; y < kImageSide; ++y) {
      for (int64_t x = 0; x < kImageSide; ++x) {
        int64_t band_y =
            static_cast<int64_t>(std::floor((static_cast<double>(y) + phase_y) / period)) & 1;
        int64_t band_x =
            static_cast<int64_t>(std::floor((static_cast<double>(x) + phase_x) / period)) & 1;
        int64_t band = kind == 0 ? band_y : (kind == 1 ? band_x : (band_y ^ band_x));
        for (int64_t c = 0; c < 3; ++c) {
          img.at(c, y, x) = band ? c1[c] : c0[c];
        }
      }
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset Dataset::from_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw std::invalid_argument("dataset: not a directory: " + dir);
  }
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::invalid_argument("dataset: no .png files in " + dir);
  Dataset ds;
  for (const auto& p : paths) {
    ds.images.push_back(load_image(p.string(), kImageSide, kImageSide));
  }
  return ds;
}

}  // namespace veil
