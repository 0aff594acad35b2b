#pragma once

#include <vector>

#include "veil/tensor.hpp"

namespace veil {

// Procedural attack-target images spanning a contrast/repetition range:
// an all-black image, maximal-contrast period-2 stripes, a low-contrast
// smooth gradient, and a dense tiled 8x8 glyph.
enum class TargetKind { kZero, kStripes, kGradient, kGlyph };

const char* target_name(TargetKind k);

std::vector<TargetKind> all_targets();

Tensor make_target(TargetKind k);

}  // namespace veil
