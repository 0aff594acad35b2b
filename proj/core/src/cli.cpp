#include "veil/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "veil/attack.hpp"
#include "veil/checkpoint.hpp"
#include "veil/dataset.hpp"
#include "veil/gradcheck.hpp"
#include "veil/image_io.hpp"
#include "veil/metrics.hpp"
#include "veil/scenarios.hpp"
#include "veil/targets.hpp"
#include "veil/train.hpp"
#include "veil/transforms.hpp"

namespace veil {

namespace {

namespace fs = std::filesystem;

AttackMode parse_mode(const std::string& s) {
  if (s == "semantic") return AttackMode::kSemantic;
  if (s == "textural") return AttackMode::kTextural;
  if (s == "fused") return AttackMode::kFused;
  throw std::invalid_argument("unknown mode '" + s + "' (expected semantic|textural|fused)");
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path);
}

void prepare_out_dir(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(cfg.out);
  write_manifest(cfg.out, cfg);
}

Dataset load_dataset(const RunConfig& cfg) {
  if (!cfg.dataset_dir.empty()) return Dataset::from_directory(cfg.dataset_dir);
  return Dataset::procedural(cfg.dataset_size, cfg.dataset_seed);
}

Checkpoint load_model(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  return load_checkpoint(cfg.checkpoint);
}

AttackConfig attack_config(const RunConfig& cfg, bool require_target) {
  AttackConfig a;
  a.mode = parse_mode(cfg.mode);
  a.fused_weight = cfg.fused_weight;
  a.steps = cfg.steps;
  a.alpha = cfg.alpha;
  a.epsilon = cfg.epsilon;
  a.seed = cfg.seed;
  if (a.mode != AttackMode::kSemantic) {
    if (!cfg.target.empty()) {
      a.target = load_image(cfg.target, kImageSide, kImageSide);
    } else if (require_target) {
      throw std::invalid_argument("mode '" + cfg.mode + "' requires --target");
    } else {
      a.target = make_target(TargetKind::kGlyph);  // eval-scenario default
    }
  }
  a.validate();
  return a;
}

std::string loss_trace_csv(const PerturbationResult& res) {
  std::string out = "step,semantic,textural,objective\n";
  for (size_t i = 0; i < res.loss_trace.size(); ++i) {
    const StepLoss& s = res.loss_trace[i];
    out += std::to_string(i) + "," + fmt17(s.semantic) + "," + fmt17(s.textural) + "," +
           fmt17(s.objective) + "\n";
  }
  return out;
}

int cmd_train(const RunConfig& cfg) {
  prepare_out_dir(cfg);
  Dataset ds = load_dataset(cfg);
  NoiseSchedule sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
  TrainConfig tc;
  tc.ae_steps = cfg.ae_steps;
  tc.dm_steps = cfg.dm_steps;
  tc.ae_lr = cfg.ae_lr;
  tc.dm_lr = cfg.dm_lr;
  tc.batch = cfg.batch;
  tc.seed = cfg.seed;

  for (size_t i = 0; i < ds.images.size() && i < 8; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "/dataset_preview_%02zu.png", i);
    save_image(cfg.out + name, ds.images[i]);
  }

  auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(ds, sched, tc);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(cfg.out + "/model.mstf", {result.params, sched});

  std::string losses = "phase,step,loss\n";
  for (size_t i = 0; i < result.ae_losses.size(); ++i) {
    losses += "autoencoder," + std::to_string(i) + "," + fmt17(result.ae_losses[i]) + "\n";
  }
  for (size_t i = 0; i < result.dm_losses.size(); ++i) {
    losses += "denoiser," + std::to_string(i) + "," + fmt17(result.dm_losses[i]) + "\n";
  }
  write_text(cfg.out + "/losses.csv", losses);

  std::string stats = "train_seconds=" + fmt17(secs) + "\n";
  stats += "final_ae_loss=" + fmt17(result.ae_losses.back()) + "\n";
  stats += "final_dm_loss=" + fmt17(result.dm_losses.back()) + "\n";
  write_text(cfg.out + "/stats.txt", stats);
  std::cout << "trained " << cfg.ae_steps << "+" << cfg.dm_steps << " steps in " << secs
            << "s; checkpoint at " << cfg.out << "/model.mstf\n";
  return 0;
}

int cmd_attack(const RunConfig& cfg) {
  if (cfg.inputs.empty()) throw std::invalid_argument("attack requires at least one input image");
  AttackConfig base = attack_config(cfg, /*require_target=*/true);
  prepare_out_dir(cfg);
  Checkpoint ck = load_model(cfg);

  for (size_t i = 0; i < cfg.inputs.size(); ++i) {
    Tensor x = load_image(cfg.inputs[i], kImageSide, kImageSide);
    AttackConfig acfg = base;
    acfg.seed = cfg.seed + i;
    PerturbationResult res = pgd_attack(ck.params, ck.schedule, x, acfg);

    std::string stem = fs::path(cfg.inputs[i]).stem().string();
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "%03zu_", i);
    save_image(cfg.out + "/adv_" + prefix + stem + ".png", res.adversarial);
    save_tensors(cfg.out + "/delta_" + prefix + stem + ".mstf", {{"delta", res.delta}});
    write_text(cfg.out + "/trace_" + prefix + stem + ".csv", loss_trace_csv(res));
  }
  std::cout << "attacked " << cfg.inputs.size() << " image(s) into " << cfg.out << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  if (cfg.samples < 1) throw std::invalid_argument("--samples must be >= 1");
  prepare_out_dir(cfg);
  Checkpoint ck = load_model(cfg);
  std::vector<Tensor> imgs = sample(ck.params, ck.schedule, cfg.samples, cfg.seed);
  for (size_t i = 0; i < imgs.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "/sample_%03zu.png", i);
    save_image(cfg.out + name, imgs[i]);
  }
  std::cout << "wrote " << imgs.size() << " samples into " << cfg.out << "\n";
  return 0;
}

std::vector<Tensor> first_n(const std::vector<Tensor>& v, int64_t n) {
  if (n < 1 || static_cast<size_t>(n) > v.size()) {
    throw std::invalid_argument("eval_images must be in [1, dataset size]");
  }
  return std::vector<Tensor>(v.begin(), v.begin() + n);
}

std::vector<Tensor> attack_set(const Checkpoint& ck, const std::vector<Tensor>& clean,
                               AttackConfig acfg, uint64_t seed) {
  std::vector<Tensor> out;
  out.reserve(clean.size());
  for (size_t i = 0; i < clean.size(); ++i) {
    acfg.seed = seed + i;
    out.push_back(pgd_attack(ck.params, ck.schedule, clean[i], acfg).adversarial);
  }
  return out;
}

int cmd_eval_grid(const RunConfig& cfg, const Checkpoint& ck, const Dataset& ds) {
  std::vector<Tensor> clean = first_n(ds.images, cfg.eval_images);
  Tensor ref_feats = feature_extract(ck.params, ds.images);

  struct Condition {
    std::string mode;
    double w;
    std::vector<Tensor> images;
  };
  std::vector<Condition> conditions;
  conditions.push_back({"none", 0.0, clean});
  {
    Rng grng(cfg.seed + 0x6a55);
    std::vector<Tensor> noisy;
    noisy.reserve(clean.size());
    for (const Tensor& img : clean) noisy.push_back(gaussian_baseline(img, cfg.epsilon, grng));
    conditions.push_back({"gaussian", 0.0, std::move(noisy)});
  }
  for (AttackMode m : {AttackMode::kSemantic, AttackMode::kTextural, AttackMode::kFused}) {
    RunConfig mode_cfg = cfg;
    mode_cfg.mode = mode_name(m);
    AttackConfig acfg = attack_config(mode_cfg, /*require_target=*/false);
    conditions.push_back({mode_name(m), m == AttackMode::kFused ? cfg.fused_weight : 0.0,
                          attack_set(ck, clean, acfg, cfg.seed)});
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
      Tensor feats = feature_extract(ck.params, imgs);
      MetricReport r;
      r.scenario = "grid";
      r.mode = cond.mode;
      r.transform = transform_name(tk);
      r.w = cond.w;
      r.seed = cfg.seed;
      r.frechet_proxy = frechet_proxy(ref_feats, feats);
      r.precision = precision_knn(ref_feats, feats, kPrecisionK);
      r.mean_dm_loss = mean_dm_loss(ck.params, ck.schedule, imgs, cfg.seed);
      r.mean_latent_distance = mean_latent_distance(ck.params, imgs, clean);
      r.mean_psnr = mean_psnr_paired(imgs, clean);
      rows.push_back(std::move(r));
    }
  }
  write_report_csv(cfg.out + "/report.csv", rows);
  std::cout << "wrote " << rows.size() << " grid rows to " << cfg.out << "/report.csv\n";
  return 0;
}

int cmd_eval_frozen(const RunConfig& cfg, const Checkpoint& ck, const Dataset& ds) {
  std::vector<Tensor> clean = first_n(ds.images, cfg.eval_images);
  AttackConfig acfg = attack_config(cfg, /*require_target=*/false);
  std::vector<Tensor> attacked = attack_set(ck, clean, acfg, cfg.seed);

  std::vector<MetricReport> rows;
  for (MetricReport& r : scenario_frozen(ck.params, ck.schedule, clean, ds.images, cfg.seed)) {
    r.mode = "none";
    rows.push_back(std::move(r));
  }
  for (MetricReport& r : scenario_frozen(ck.params, ck.schedule, attacked, ds.images, cfg.seed)) {
    r.mode = cfg.mode;
    r.w = acfg.mode == AttackMode::kFused ? cfg.fused_weight : 0.0;
    rows.push_back(std::move(r));
  }
  write_report_csv(cfg.out + "/report.csv", rows);
  std::cout << "wrote " << rows.size() << " frozen-scenario rows to " << cfg.out
            << "/report.csv\n";
  return 0;
}

int cmd_eval_finetune(const RunConfig& cfg, const Checkpoint& ck, const Dataset& ds) {
  std::vector<Tensor> clean = first_n(ds.images, cfg.eval_images);
  AttackConfig acfg = attack_config(cfg, /*require_target=*/false);
  std::vector<Tensor> attacked = attack_set(ck, clean, acfg, cfg.seed);

  std::vector<MetricReport> rows;
  MetricReport clean_row =
      scenario_finetune(ck.params, ck.schedule, clean, ds.images, cfg.samples, cfg.seed,
                        cfg.finetune_steps, cfg.finetune_lr);
  clean_row.mode = "none";
  rows.push_back(std::move(clean_row));
  MetricReport att_row =
      scenario_finetune(ck.params, ck.schedule, attacked, ds.images, cfg.samples, cfg.seed,
                        cfg.finetune_steps, cfg.finetune_lr);
  att_row.mode = cfg.mode;
  att_row.w = acfg.mode == AttackMode::kFused ? cfg.fused_weight : 0.0;
  rows.push_back(std::move(att_row));
  write_report_csv(cfg.out + "/report.csv", rows);
  std::cout << "wrote " << rows.size() << " finetune rows to " << cfg.out << "/report.csv\n";
  return 0;
}

int cmd_targets(const RunConfig& cfg, const Checkpoint& ck, const Dataset& ds) {
  AttackMode m = parse_mode(cfg.mode);
  if (m == AttackMode::kSemantic) {
    throw std::invalid_argument("targets requires --mode textural or fused");
  }
  std::vector<Tensor> x_set = first_n(ds.images, cfg.eval_images);

  for (TargetKind kind : all_targets()) {
    save_image(cfg.out + "/target_" + target_name(kind) + ".png", make_target(kind));
  }

  TargetComparisonConfig tcfg;
  tcfg.attack.mode = m;
  tcfg.attack.fused_weight = cfg.fused_weight;
  tcfg.attack.steps = cfg.steps;
  tcfg.attack.alpha = cfg.alpha;
  tcfg.attack.epsilon = cfg.epsilon;
  tcfg.attack.target = make_target(TargetKind::kZero);  // placeholder; set per row
  tcfg.crop_px = cfg.crop_px;
  tcfg.n_samples = cfg.samples;
  tcfg.finetune_steps = cfg.finetune_steps;
  tcfg.finetune_lr = cfg.finetune_lr;
  tcfg.seed = cfg.seed;

  std::vector<MetricReport> rows = target_comparison(ck.params, ck.schedule, x_set, ds.images, tcfg);
  write_report_csv(cfg.out + "/report.csv", rows);
  std::cout << "wrote " << rows.size() << " target rows to " << cfg.out << "/report.csv\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  prepare_out_dir(cfg);
  Checkpoint ck = load_model(cfg);
  Dataset ds = load_dataset(cfg);
  if (cfg.scenario == "grid") return cmd_eval_grid(cfg, ck, ds);
  if (cfg.scenario == "frozen") return cmd_eval_frozen(cfg, ck, ds);
  if (cfg.scenario == "finetune") return cmd_eval_finetune(cfg, ck, ds);
  if (cfg.scenario == "targets") return cmd_targets(cfg, ck, ds);
  throw std::invalid_argument("unknown scenario '" + cfg.scenario +
                              "' (expected grid|frozen|finetune|targets)");
}

int cmd_targets_entry(const RunConfig& cfg) {
  prepare_out_dir(cfg);
  Checkpoint ck = load_model(cfg);
  Dataset ds = load_dataset(cfg);
  return cmd_targets(cfg, ck, ds);
}

int cmd_gradcheck(const RunConfig& cfg) {
  NoiseSchedule sched = default_schedule();
  ModelParams params;
  if (!cfg.checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(cfg.checkpoint);
    params = std::move(ck.params);
    sched = std::move(ck.schedule);
  } else {
    params = gradcheck_model(cfg.seed);
  }

  std::vector<GradCheckResult> results = gradcheck_primitives(cfg.seed);
  for (GradCheckResult& r : gradcheck_losses(params, sched, 5, cfg.seed)) {
    results.push_back(std::move(r));
  }

  std::string table;
  bool ok = true;
  for (const GradCheckResult& r : results) {
    bool pass = r.max_rel_err < kGradCheckTol;
    ok = ok && pass;
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s %12.3e  %s\n", r.name.c_str(), r.max_rel_err,
                  pass ? "PASS" : "FAIL");
    table += line;
  }
  std::cout << table;
  std::cout << (ok ? "gradcheck: all passed\n" : "gradcheck: FAILURES above\n");
  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    write_manifest(cfg.out, cfg);
    write_text(cfg.out + "/gradcheck.txt", table);
  }
  return ok ? 0 : 1;
}

// Binds one subcommand's flags; apply() folds supplied flags over the
// config-file/defaults layers in precedence order.
struct FlagBinder {
  CLI::App* sub;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;
  std::string config_path;

  explicit FlagBinder(CLI::App* s) : sub(s) {
    sub->add_option("--config", config_path, "flat key=value config file");
  }

  void opt_str(const std::string& flag, const std::string& key, const std::string& help) {
    auto val = std::make_shared<std::string>();
    CLI::Option* o = sub->add_option(flag, *val, help);
    setters.emplace_back(o, [key, val](RunConfig& c) { apply_kv(c, key, *val); });
  }

  void apply(RunConfig& cfg) {
    if (!config_path.empty()) {
      for (const auto& [k, v] : parse_config_file(config_path)) apply_kv(cfg, k, v);
      cfg.config = config_path;
    }
    for (auto& [opt, set] : setters) {
      if (opt->count() > 0) set(cfg);
    }
  }
};

void add_shared(FlagBinder& b) {
  b.opt_str("--checkpoint", "checkpoint", "model checkpoint path");
  b.opt_str("--out", "out", "output directory");
  b.opt_str("--seed", "seed", "master seed");
}

void add_attack_flags(FlagBinder& b) {
  b.opt_str("--mode", "mode", "semantic|textural|fused");
  b.opt_str("--fused-weight", "fused_weight", "fused objective weight w");
  b.opt_str("--steps", "steps", "attack steps");
  b.opt_str("--alpha", "alpha", "per-step budget (decimal or fraction)");
  b.opt_str("--epsilon", "epsilon", "total L-inf budget (decimal or fraction)");
  b.opt_str("--target", "target", "target image path");
}

void add_dataset_flags(FlagBinder& b) {
  b.opt_str("--dataset-size", "dataset_size", "procedural dataset size");
  b.opt_str("--dataset-seed", "dataset_seed", "procedural dataset seed");
  b.opt_str("--dataset-dir", "dataset_dir", "directory of 32x32 PNGs");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"adversarial-perturbation toolkit for a toy latent diffusion model"};
  app.require_subcommand(1);

  RunConfig cfg;

  FlagBinder train_b(app.add_subcommand("train", "train the toy model"));
  add_shared(train_b);
  add_dataset_flags(train_b);
  train_b.opt_str("--ae-steps", "ae_steps", "autoencoder phase steps");
  train_b.opt_str("--dm-steps", "dm_steps", "denoiser phase steps");
  train_b.opt_str("--ae-lr", "ae_lr", "autoencoder learning rate");
  train_b.opt_str("--dm-lr", "dm_lr", "denoiser learning rate");
  train_b.opt_str("--batch", "batch", "minibatch size");
  train_b.opt_str("--timesteps", "timesteps", "diffusion steps T");
  train_b.opt_str("--beta-start", "beta_start", "schedule beta at t=1");
  train_b.opt_str("--beta-end", "beta_end", "schedule beta at t=T");

  FlagBinder attack_b(app.add_subcommand("attack", "perturb images against the model"));
  add_shared(attack_b);
  add_attack_flags(attack_b);
  std::vector<std::string> attack_inputs;
  attack_b.sub->add_option("inputs", attack_inputs, "input 32x32 PNGs");

  FlagBinder eval_b(app.add_subcommand("eval", "run an evaluation scenario"));
  add_shared(eval_b);
  add_attack_flags(eval_b);
  add_dataset_flags(eval_b);
  eval_b.opt_str("--scenario", "scenario", "grid|frozen|finetune|targets");
  eval_b.opt_str("--crop-px", "crop_px", "crop pixels per side");
  eval_b.opt_str("--samples", "samples", "sample count for finetune scenarios");
  eval_b.opt_str("--finetune-steps", "finetune_steps", "finetune gradient steps");
  eval_b.opt_str("--finetune-lr", "finetune_lr", "finetune learning rate");
  eval_b.opt_str("--eval-images", "eval_images", "images drawn from the dataset");

  FlagBinder sample_b(app.add_subcommand("sample", "generate images from the model"));
  add_shared(sample_b);
  sample_b.opt_str("--samples", "samples", "number of images");

  FlagBinder gradcheck_b(app.add_subcommand("gradcheck", "finite-difference gradient audit"));
  add_shared(gradcheck_b);

  FlagBinder targets_b(app.add_subcommand("targets", "target-image comparison"));
  add_shared(targets_b);
  add_attack_flags(targets_b);
  add_dataset_flags(targets_b);
  targets_b.opt_str("--crop-px", "crop_px", "crop pixels per side");
  targets_b.opt_str("--samples", "samples", "sample count for finetune scoring");
  targets_b.opt_str("--finetune-steps", "finetune_steps", "finetune gradient steps");
  targets_b.opt_str("--finetune-lr", "finetune_lr", "finetune learning rate");
  targets_b.opt_str("--eval-images", "eval_images", "images drawn from the dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  FlagBinder* binders[] = {&train_b, &attack_b, &eval_b, &sample_b, &gradcheck_b, &targets_b};
  int (*commands[])(const RunConfig&) = {cmd_train,  cmd_attack,    cmd_eval,
                                         cmd_sample, cmd_gradcheck, cmd_targets_entry};

  int which = -1;
  for (int i = 0; i < 6; ++i) {
    if (binders[i]->sub->parsed()) which = i;
  }
  if (which < 0) {
    std::cerr << "veil: no subcommand\n";
    return 2;
  }

  try {
    binders[which]->apply(cfg);
    if (which == 1) {  // attack: positional inputs override config-file inputs
      if (!attack_inputs.empty()) cfg.inputs = attack_inputs;
    }
    return commands[which](cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "veil: usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "veil: error: " << e.what() << "\n";
    if (!cfg.out.empty()) {
      std::error_code ec;
      fs::create_directories(cfg.out, ec);
      if (!ec) {
        std::ofstream marker(cfg.out + "/INCOMPLETE", std::ios::trunc);
        marker << e.what() << "\n";
      }
    }
    return 1;
  }
}

}  // namespace veil
