#pragma once

#include <string>
#include <utility>
#include <vector>

#include "veil/model.hpp"
#include "veil/schedule.hpp"

namespace veil {

// Binary named-tensor container, all integers little-endian:
//   magic "MSTF", format version u32, tensor count u64, then one manifest
//   entry per tensor {name_len u64, name bytes, rank u64, dims u64 x rank},
//   then the raw f64 payloads in manifest order.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_tensors(const std::string& path, const NamedTensors& tensors);

// Throws on truncation, bad magic, or unsupported version; never returns a
// partial result.
NamedTensors load_tensors(const std::string& path);

// A model checkpoint is the container holding the 20 weight tensors in
// architecture order plus the schedule as trailing "beta" / "alpha_bar".
struct Checkpoint {
  ModelParams params;
  NoiseSchedule schedule;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);

// Validates the architecture table (names and shapes, in order), weight
// finiteness, and schedule invariants; errors name the offending tensor.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace veil
