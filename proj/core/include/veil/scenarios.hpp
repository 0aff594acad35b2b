#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "veil/attack.hpp"
#include "veil/model.hpp"
#include "veil/schedule.hpp"
#include "veil/tensor.hpp"

namespace veil {

struct MetricReport {
  std::string scenario;
  std::string mode = "none";
  std::string transform = "none";
  std::string target_id = "-";
  double w = 0.0;
  double frechet_proxy = 0.0;
  double precision = 0.0;
  double mean_dm_loss = 0.0;
  double mean_latent_distance = 0.0;
  double mean_psnr = 0.0;
  uint64_t seed = 0;
};

// One row per report, values at 6 significant digits, LF line endings.
std::string report_csv_string(const std::vector<MetricReport>& rows);
void write_report_csv(const std::string& path, const std::vector<MetricReport>& rows);

constexpr int64_t kEvalDmDraws = 8;
constexpr int64_t kPrecisionK = 3;
constexpr int64_t kDefaultFinetuneSteps = 300;
constexpr double kDefaultFinetuneLr = 1e-3;
constexpr double kFrozenStrengths[3] = {0.25, 0.35, 0.5};

// A fixed Monte-Carlo evaluation set for dm_loss estimates.
struct DmDraw {
  int64_t t = 1;
  Tensor eps;
};

std::vector<DmDraw> make_dm_draws(const NoiseSchedule& schedule, int64_t n, uint64_t seed);

double mean_dm_loss_over_draws(const ModelParams& params, const NoiseSchedule& schedule,
                               const Tensor& image, const std::vector<DmDraw>& draws);

// Mean over images of the draw-averaged dm_loss (one shared draw set).
double mean_dm_loss(const ModelParams& params, const NoiseSchedule& schedule,
                    const std::vector<Tensor>& images, uint64_t seed);

// Mean of ||E(a_i) - E(b_i)||_2 over index-paired images.
double mean_latent_distance(const ModelParams& params, const std::vector<Tensor>& a,
                            const std::vector<Tensor>& b);

double mean_psnr_paired(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

// Frozen-weights protocol: partially noise each image's latent to
// t = round(strength * T), run the reverse process, decode, and score the
// reconstructions against the clean reference set. One report per strength
// in kFrozenStrengths; reference's first images.size() entries are taken as
// the clean counterparts of `images`.
std::vector<MetricReport> scenario_frozen(const ModelParams& params,
                                          const NoiseSchedule& schedule,
                                          const std::vector<Tensor>& images,
                                          const std::vector<Tensor>& reference, uint64_t seed);

// Fine-tune the denoiser on train_images, sample n_samples, and score the
// samples against the reference set.
MetricReport scenario_finetune(const ModelParams& params, const NoiseSchedule& schedule,
                               const std::vector<Tensor>& train_images,
                               const std::vector<Tensor>& reference, int64_t n_samples,
                               uint64_t seed, int64_t steps = kDefaultFinetuneSteps,
                               double lr = kDefaultFinetuneLr);

struct TargetComparisonConfig {
  AttackConfig attack;  // mode must be textural or fused; target is set per row
  int64_t crop_px = 4;
  int64_t n_samples = 50;
  int64_t finetune_steps = kDefaultFinetuneSteps;
  double finetune_lr = kDefaultFinetuneLr;
  uint64_t seed = 0;
};

// Attacks x_set once per procedural target, then scores a no-attack row and
// each target row under transforms {none, crop_resize}: fine-tune metrics
// from scenario_finetune, latent displacement and PSNR against x_set.
std::vector<MetricReport> target_comparison(const ModelParams& params,
                                            const NoiseSchedule& schedule,
                                            const std::vector<Tensor>& x_set,
                                            const std::vector<Tensor>& reference,
                                            const TargetComparisonConfig& cfg);

}  // namespace veil
