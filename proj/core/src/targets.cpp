#include "veil/targets.hpp"

#include <cmath>
#include <stdexcept>

#include "veil/dataset.hpp"

namespace veil {

const char* target_name(TargetKind k) {
  switch (k) {
    case TargetKind::kZero: return "zero";
    case TargetKind::kStripes: return "stripes";
    case TargetKind::kGradient: return "gradient";
    case TargetKind::kGlyph: return "glyph";
  }
  return "?";
}

std::vector<TargetKind> all_targets() {
  return {TargetKind::kZero, TargetKind::kStripes, TargetKind::kGradient, TargetKind::kGlyph};
}

Tensor make_target(TargetKind k) {
  const int64_t S = kImageSide;
  Tensor img = Tensor::zeros({kImageChannels, S, S});
  switch (k) {
    case TargetKind::kZero:
      return img;
    case TargetKind::kStripes:
      // Vertical black/white stripes at the Nyquist period.
      for (int64_t y = 0; y < S; ++y) {
        for (int64_t x = 0; x < S; ++x) {
          double v = (x & 1) ? 1.0 : 0.0;
          for (int64_t c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
      }
      return img;
    case TargetKind::kGradient:
      // Diagonal ramp spanning only [0.4, 0.6].
      for (int64_t y = 0; y < S; ++y) {
        for (int64_t x = 0; x < S; ++x) {
          double r = static_cast<double>(x + y) / static_cast<double>(2 * (S - 1));
          double v = 0.4 + 0.2 * r;
          for (int64_t c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
      }
      return img;
    case TargetKind::kGlyph: {
      // A fixed 8x8 high-contrast glyph tiled over the full image, with
      // complementary colors between the two cell states.
      constexpr uint8_t rows[8] = {0b11111111, 0b10000001, 0b10111101, 0b10100101,
                                   0b10100101, 0b10111101, 0b10000001, 0b11111111};
      for (int64_t y = 0; y < S; ++y) {
        for (int64_t x = 0; x < S; ++x) {
          bool on = (rows[y % 8] >> (7 - (x % 8))) & 1;
          img.at(0, y, x) = on ? 0.9 : 0.1;
          img.at(1, y, x) = on ? 0.1 : 0.8;
          img.at(2, y, x) = on ? 0.2 : 0.9;
        }
      }
      return img;
    }
  }
  throw std::logic_error("make_target: unreachable");
}

}  // namespace veil
