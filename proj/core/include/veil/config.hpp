#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace veil {

// Full resolved settings of one CLI run. Resolution order: built-in defaults,
// then a config file, then command-line flags. The manifest serializes every
// field, so feeding a manifest back via --config reproduces the run.
struct RunConfig {
  // shared
  std::string checkpoint;
  std::string out;
  std::string config;  // config file path actually applied, "" if none
  uint64_t seed = 0;
  std::vector<std::string> inputs;  // attack input image paths

  // attack
  std::string mode = "fused";
  double fused_weight = 1e4;
  int64_t steps = 100;
  double alpha = 1.0 / 255.0;
  double epsilon = 17.0 / 255.0;
  std::string target;  // target image path, "" if absent

  // eval
  std::string scenario = "grid";
  int64_t crop_px = 4;
  int64_t samples = 50;
  int64_t finetune_steps = 300;
  double finetune_lr = 1e-3;
  int64_t eval_images = 10;

  // train
  int64_t ae_steps = 3000;
  int64_t dm_steps = 3000;
  double ae_lr = 1e-3;
  double dm_lr = 1e-3;
  int64_t batch = 8;
  int64_t dataset_size = 256;
  uint64_t dataset_seed = 42;
  std::string dataset_dir;
  int64_t timesteps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

// Parses a decimal ("0.05", "1e4") or a fraction ("17/255").
double parse_number(const std::string& s);

uint64_t parse_u64(const std::string& s);
int64_t parse_i64(const std::string& s);

// Flat key=value lines, UTF-8, '#' starts a comment. Returns pairs in file
// order (later duplicates win when applied).
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

// Applies one key; throws std::invalid_argument on unknown keys/bad values.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Every field as key=value, fixed order, doubles at full precision (%.17g)
// so a round-trip through apply_kv is bit-exact.
std::string manifest_string(const RunConfig& cfg);

void write_manifest(const std::string& dir, const RunConfig& cfg);

}  // namespace veil
