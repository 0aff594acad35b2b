#include "veil/scenarios.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "veil/metrics.hpp"
#include "veil/rng.hpp"
#include "veil/targets.hpp"
#include "veil/train.hpp"
#include "veil/transforms.hpp"

namespace veil {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void require_finite(const MetricReport& r) {
  const double vals[] = {r.w,           r.frechet_proxy,         r.precision,
                         r.mean_dm_loss, r.mean_latent_distance, r.mean_psnr};
  for (double v : vals) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("metric report '" + r.scenario + "' has a non-finite value");
    }
  }
}

}  // namespace

std::string report_csv_string(const std::vector<MetricReport>& rows) {
  std::string out =
      "scenario,mode,transform,target_id,w,frechet_proxy,precision,"
      "mean_dm_loss,mean_latent_distance,mean_psnr,seed\n";
  for (const MetricReport& r : rows) {
    require_finite(r);
    out += r.scenario + "," + r.mode + "," + r.transform + "," + r.target_id + "," + fmt6(r.w) +
           "," + fmt6(r.frechet_proxy) + "," + fmt6(r.precision) + "," + fmt6(r.mean_dm_loss) +
           "," + fmt6(r.mean_latent_distance) + "," + fmt6(r.mean_psnr) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

void write_report_csv(const std::string& path, const std::vector<MetricReport>& rows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("report: cannot open for writing: " + path);
  os << report_csv_string(rows);
  os.flush();
  if (!os) throw std::runtime_error("report: write failed: " + path);
}

std::vector<DmDraw> make_dm_draws(const NoiseSchedule& schedule, int64_t n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_dm_draws: n must be >= 1");
  Rng rng(seed);
  std::vector<DmDraw> draws;
  draws.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    DmDraw d;
    d.t = rng.uniform_int(1, schedule.T);
    d.eps = rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide});
    draws.push_back(std::move(d));
  }
  return draws;
}

double mean_dm_loss_over_draws(const ModelParams& params, const NoiseSchedule& schedule,
                               const Tensor& image, const std::vector<DmDraw>& draws) {
  if (draws.empty()) throw std::invalid_argument("mean_dm_loss_over_draws: no draws");
  // The encoder pass does not depend on the draw; run it once.
  Tensor z0 = encode(params, image);
  double total = 0.0;
  for (const DmDraw& d : draws) {
    Graph g;
    ParamVars pv = load_params(g, params);
    Var eps = g.input(d.eps);
    Var z_t = add_noise_node(g, schedule, g.input(z0), d.t, eps);
    total += g.scalar_value(g.mse(eps, denoiser_node(g, pv, z_t, d.t, schedule)));
  }
  return total / static_cast<double>(draws.size());
}

double mean_dm_loss(const ModelParams& params, const NoiseSchedule& schedule,
                    const std::vector<Tensor>& images, uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("mean_dm_loss: empty image set");
  std::vector<DmDraw> draws = make_dm_draws(schedule, kEvalDmDraws, seed);
  double total = 0.0;
  for (const Tensor& img : images) total += mean_dm_loss_over_draws(params, schedule, img, draws);
  return total / static_cast<double>(images.size());
}

double mean_latent_distance(const ModelParams& params, const std::vector<Tensor>& a,
                            const std::vector<Tensor>& b) {
  if (a.empty() || a.size() > b.size()) {
    throw std::invalid_argument("mean_latent_distance: need paired non-empty sets");
  }
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    Tensor za = encode(params, a[i]);
    Tensor zb = encode(params, b[i]);
    double s = 0.0;
    for (int64_t j = 0; j < za.numel(); ++j) {
      double d = za[j] - zb[j];
      s += d * d;
    }
    total += std::sqrt(s);
  }
  return total / static_cast<double>(a.size());
}

double mean_psnr_paired(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.empty() || a.size() > b.size()) {
    throw std::invalid_argument("mean_psnr_paired: need paired non-empty sets");
  }
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += psnr(a[i], b[i]);
  return total / static_cast<double>(a.size());
}

std::vector<MetricReport> scenario_frozen(const ModelParams& params,
                                          const NoiseSchedule& schedule,
                                          const std::vector<Tensor>& images,
                                          const std::vector<Tensor>& reference, uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("scenario_frozen: empty image set");
  if (reference.size() < images.size()) {
    throw std::invalid_argument("scenario_frozen: reference smaller than image set");
  }
  std::vector<Tensor> paired(reference.begin(),
                             reference.begin() + static_cast<int64_t>(images.size()));
  Tensor ref_feats = feature_extract(params, reference);
  double dm = mean_dm_loss(params, schedule, images, seed);
  double latent_dist = mean_latent_distance(params, images, paired);

  std::vector<MetricReport> rows;
  for (double strength : kFrozenStrengths) {
    int64_t t_start = static_cast<int64_t>(std::llround(strength * static_cast<double>(schedule.T)));
    if (t_start < 1) t_start = 1;
    if (t_start > schedule.T) t_start = schedule.T;

    // One stream per strength: reconstruction noise is independent of the
    // strength-loop order.
    Rng rng(seed + static_cast<uint64_t>(t_start));
    std::vector<Tensor> recons;
    recons.reserve(images.size());
    double psnr_total = 0.0;
    for (const Tensor& img : images) {
      Tensor z0 = encode(params, img);
      Tensor eps = rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide});
      Tensor z_t = add_noise(schedule, z0, t_start, eps);
      Tensor recon = decode(params, denoise_from(params, schedule, z_t, t_start, rng));
      psnr_total += psnr(recon, img);
      recons.push_back(std::move(recon));
    }

    MetricReport r;
    char label[32];
    std::snprintf(label, sizeof(label), "frozen_%.2f", strength);
    r.scenario = label;
    r.seed = seed;
    Tensor gen_feats = feature_extract(params, recons);
    r.frechet_proxy = frechet_proxy(ref_feats, gen_feats);
    r.precision = precision_knn(ref_feats, gen_feats, kPrecisionK);
    r.mean_dm_loss = dm;
    r.mean_latent_distance = latent_dist;
    r.mean_psnr = psnr_total / static_cast<double>(images.size());
    rows.push_back(std::move(r));
  }
  return rows;
}

MetricReport scenario_finetune(const ModelParams& params, const NoiseSchedule& schedule,
                               const std::vector<Tensor>& train_images,
                               const std::vector<Tensor>& reference, int64_t n_samples,
                               uint64_t seed, int64_t steps, double lr) {
  if (train_images.empty()) throw std::invalid_argument("scenario_finetune: empty train set");
  if (reference.size() < train_images.size()) {
    throw std::invalid_argument("scenario_finetune: reference smaller than train set");
  }
  if (n_samples < 2) throw std::invalid_argument("scenario_finetune: need n_samples >= 2");

  ModelParams tuned = finetune(params, schedule, train_images, steps, lr, seed);
  std::vector<Tensor> samples = sample(tuned, schedule, n_samples, seed + 0x5eed);

  std::vector<Tensor> paired(reference.begin(),
                             reference.begin() + static_cast<int64_t>(train_images.size()));
  Tensor ref_feats = feature_extract(params, reference);
  Tensor gen_feats = feature_extract(params, samples);

  MetricReport r;
  r.scenario = "finetune";
  r.seed = seed;
  r.frechet_proxy = frechet_proxy(ref_feats, gen_feats);
  r.precision = precision_knn(ref_feats, gen_feats, kPrecisionK);
  r.mean_dm_loss = mean_dm_loss(tuned, schedule, train_images, seed);
  r.mean_latent_distance = mean_latent_distance(params, train_images, paired);
  r.mean_psnr = mean_psnr_paired(train_images, paired);
  return r;
}

std::vector<MetricReport> target_comparison(const ModelParams& params,
                                            const NoiseSchedule& schedule,
                                            const std::vector<Tensor>& x_set,
                                            const std::vector<Tensor>& reference,
                                            const TargetComparisonConfig& cfg) {
  if (cfg.attack.mode == AttackMode::kSemantic) {
    throw std::invalid_argument("target_comparison: requires textural or fused mode");
  }
  if (x_set.empty()) throw std::invalid_argument("target_comparison: empty image set");

  struct Condition {
    std::string label;
    std::vector<Tensor> images;
  };
  std::vector<Condition> conditions;
  conditions.push_back({"none", x_set});
  for (TargetKind kind : all_targets()) {
    AttackConfig acfg = cfg.attack;
    acfg.target = make_target(kind);
    std::vector<Tensor> attacked;
    attacked.reserve(x_set.size());
    for (size_t i = 0; i < x_set.size(); ++i) {
      acfg.seed = cfg.seed + i;
      attacked.push_back(pgd_attack(params, schedule, x_set[i], acfg).adversarial);
    }
    conditions.push_back({target_name(kind), std::move(attacked)});
  }

  std::vector<MetricReport> rows;
  for (const Condition& cond : conditions) {
    for (TransformKind tk : {TransformKind::kNone, TransformKind::kCropResize}) {
      std::vector<Tensor> imgs;
      imgs.reserve(cond.images.size());
      for (const Tensor& img : cond.images) {
        imgs.push_back(tk == TransformKind::kCropResize ? crop_and_resize(img, cfg.crop_px)
                                                        : img);
      }
      MetricReport r = scenario_finetune(params, schedule, imgs, reference, cfg.n_samples,
                                         cfg.seed, cfg.finetune_steps, cfg.finetune_lr);
      r.scenario = "targets";
      r.mode = cond.label == "none" ? "none" : mode_name(cfg.attack.mode);
      r.transform = transform_name(tk);
      r.target_id = cond.label;
      r.w = cfg.attack.mode == AttackMode::kFused ? cfg.attack.fused_weight : 0.0;
      r.mean_latent_distance = mean_latent_distance(params, imgs, x_set);
      r.mean_psnr = mean_psnr_paired(imgs, x_set);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace veil
