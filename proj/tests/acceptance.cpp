// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits with the number of failures. Requires:
//   VEIL_BIN          path to the CLI binary
//   VEIL_FIXTURE_DIR  a completed default-settings training run directory
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
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

using namespace veil;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, bool pass, const std::string& detail) {
  std::printf("C%02d %s — %s\n", idx, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string getenv_required(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') {
    std::fprintf(stderr, "%s is not set\n", name);
    std::exit(99);
  }
  return v;
}

int run_cli(const std::string& bin, const std::string& args) {
  std::string cmd = bin + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return "";
  return std::string(std::istreambuf_iterator<char>(is), {});
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

AttackConfig defaults_with(AttackMode mode, uint64_t seed,
                           std::optional<TargetKind> target = std::nullopt) {
  AttackConfig cfg;  // paper defaults: 100 steps, alpha 1/255, epsilon 17/255
  cfg.mode = mode;
  cfg.seed = seed;
  if (target) cfg.target = make_target(*target);
  return cfg;
}

// ---------------------------------------------------------------------------

void c01_gradients(const ModelParams& check_model) {
  auto t0 = Clock::now();
  std::vector<GradCheckResult> rs = gradcheck_primitives(9);
  std::vector<GradCheckResult> ls = gradcheck_losses(check_model, default_schedule(), 5, 9);
  rs.insert(rs.end(), ls.begin(), ls.end());
  double worst = 0.0;
  std::string worst_name = "-";
  for (const GradCheckResult& r : rs) {
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_name = r.name;
    }
  }
  double dt = secs_since(t0);
  bool pass = worst < kGradCheckTol && dt < 120.0;
  report(1, pass,
         fmt("%zu checks, worst rel err %.2e (%s), tol %.0e, %.1fs", rs.size(), worst,
             worst_name.c_str(), kGradCheckTol, dt));
}

void c02_feasibility(const Checkpoint& ck) {
  auto t0 = Clock::now();
  Dataset ds = Dataset::procedural(20, 42);
  const double bound = 17.0 / 255.0 + 1e-12;
  int audited = 0;
  bool ok = true;
  std::string why;
  for (size_t i = 0; i < ds.images.size() && ok; ++i) {
    AttackConfig cfg = defaults_with(AttackMode::kFused, 100 + i, TargetKind::kGlyph);
    PerturbationResult r;
    try {
      r = pgd_attack(ck.params, ck.schedule, ds.images[i], cfg);
    } catch (const std::exception& e) {
      ok = false;
      why = e.what();
      break;
    }
    for (const StepAudit& a : r.audit) {
      ++audited;
      if (!(a.max_abs_delta <= bound && a.min_pixel >= 0.0 && a.max_pixel <= 1.0)) {
        ok = false;
        why = fmt("image %zu: |d|=%.17g pixels [%.17g, %.17g]", i, a.max_abs_delta,
                  a.min_pixel, a.max_pixel);
        break;
      }
    }
    if (max_abs(r.delta) > bound || min_value(r.adversarial) < 0.0 ||
        max_value(r.adversarial) > 1.0) {
      ok = false;
      why = fmt("image %zu final state out of box", i);
    }
  }
  report(2, ok,
         ok ? fmt("20 images x 100 steps, %d audited steps inside the box, %.1fs", audited,
                  secs_since(t0))
            : why);
}

void c03_oracle() {
  // Maximizing -(delta - eps)^2 from 0: ascent gradient -2(delta - eps) walks
  // to the +eps face and stays; mirrored objective pins -eps. Closed form:
  // alpha divides eps here, so the iterate lands on the boundary exactly.
  const double alpha = 1.0 / 255.0, eps = 17.0 / 255.0;
  Tensor x = Tensor::zeros({1, 1});
  x[0] = 0.5;
  bool pass = true;
  std::string why;
  for (double side : {+1.0, -1.0}) {
    Tensor d = Tensor::zeros({1, 1});
    Tensor g = Tensor::zeros({1, 1});
    for (int step = 0; step < 30; ++step) {
      g[0] = -2.0 * (d[0] - side * eps);
      d = pgd_step(x, d, g, alpha, eps);
    }
    if (d[0] != side * eps) {
      pass = false;
      why = fmt("expected %+.17g, got %+.17g", side * eps, d[0]);
    }
  }
  report(3, pass, pass ? "quadratic ascent lands on both box faces exactly" : why);
}

void c04_degeneracy(const Checkpoint& ck) {
  Dataset ds = Dataset::procedural(1, 42);
  AttackConfig tex = defaults_with(AttackMode::kTextural, 9, TargetKind::kGlyph);
  tex.record_deltas = true;
  AttackConfig fz = defaults_with(AttackMode::kFused, 9, TargetKind::kGlyph);
  fz.fused_weight = 0.0;
  fz.record_deltas = true;

  PerturbationResult a = pgd_attack(ck.params, ck.schedule, ds.images[0], tex);
  PerturbationResult b = pgd_attack(ck.params, ck.schedule, ds.images[0], fz);
  bool identical = a.delta_history.size() == b.delta_history.size();
  size_t diverged_at = 0;
  for (size_t i = 0; identical && i < a.delta_history.size(); ++i) {
    if (a.delta_history[i].data != b.delta_history[i].data) {
      identical = false;
      diverged_at = i;
    }
  }

  std::vector<DirectionProbe> probes = gradient_direction_probe(
      ck.params, ck.schedule, ds.images[0], make_target(TargetKind::kGlyph), {1e8}, 11);
  double cos_sem =
      probes[0].cos_semantic ? *probes[0].cos_semantic : -1.0;

  bool pass = identical && cos_sem > 0.999;
  report(4, pass,
         identical
             ? fmt("w=0 matches textural on all %zu steps; cos(fused w=1e8, semantic) = %.6f",
                   a.delta_history.size(), cos_sem)
             : fmt("delta sequences diverge at step %zu", diverged_at));
}

void c05_semantic(const Checkpoint& ck) {
  auto t0 = Clock::now();
  Dataset ds = Dataset::procedural(10, 42);
  std::vector<DmDraw> draws = make_dm_draws(ck.schedule, 500, 2024);
  double clean = 0.0, adv = 0.0;
  for (size_t i = 0; i < ds.images.size(); ++i) {
    AttackConfig cfg = defaults_with(AttackMode::kSemantic, 100 + i);
    PerturbationResult r = pgd_attack(ck.params, ck.schedule, ds.images[i], cfg);
    clean += mean_dm_loss_over_draws(ck.params, ck.schedule, ds.images[i], draws);
    adv += mean_dm_loss_over_draws(ck.params, ck.schedule, r.adversarial, draws);
  }
  clean /= 10.0;
  adv /= 10.0;
  double dt = secs_since(t0);
  bool pass = adv >= 2.0 * clean && dt < 600.0;
  report(5, pass,
         fmt("500-draw dm loss: clean %.4f vs attacked %.4f (%.2fx, need >= 2x), %.1fs",
             clean, adv, adv / clean, dt));
}

void c06_textural(const Checkpoint& ck) {
  auto t0 = Clock::now();
  Dataset ds = Dataset::procedural(10, 42);
  // Per-image relative reduction, averaged over the set; the worst single
  // image is reported alongside for diagnosis.
  double sum = 0.0, worst = 0.0;
  for (size_t i = 0; i < ds.images.size(); ++i) {
    AttackConfig cfg = defaults_with(AttackMode::kTextural, 200 + i, TargetKind::kStripes);
    PerturbationResult r = pgd_attack(ck.params, ck.schedule, ds.images[i], cfg);
    double initial = textural_term(ck.params, ds.images[i], Tensor::zeros({3, 32, 32}), *cfg.target);
    double final_d = textural_term(ck.params, ds.images[i], r.delta, *cfg.target);
    double ratio = final_d / initial;
    sum += ratio;
    if (ratio > worst) worst = ratio;
  }
  double mean = sum / 10.0;
  bool pass = mean <= 0.7;
  report(6, pass,
         fmt("latent distance to stripes target keeps %.1f%% on average over 10 images "
             "(need <= 70%%; worst single image %.1f%%), %.1fs",
             100.0 * mean, 100.0 * worst, secs_since(t0)));
}

void c07_finetune(const Checkpoint& ck) {
  auto t0 = Clock::now();
  Dataset ds = Dataset::procedural(256, 42);
  std::vector<Tensor> clean(ds.images.begin(), ds.images.begin() + 10);
  std::vector<Tensor> attacked;
  for (size_t i = 0; i < clean.size(); ++i) {
    AttackConfig cfg = defaults_with(AttackMode::kFused, 300 + i, TargetKind::kGlyph);
    attacked.push_back(pgd_attack(ck.params, ck.schedule, clean[i], cfg).adversarial);
  }
  int f_votes = 0, p_votes = 0;
  for (uint64_t s = 1; s <= 5; ++s) {
    MetricReport mc = scenario_finetune(ck.params, ck.schedule, clean, ds.images, 32, s);
    MetricReport ma = scenario_finetune(ck.params, ck.schedule, attacked, ds.images, 32, s);
    if (ma.frechet_proxy > mc.frechet_proxy) ++f_votes;
    if (ma.precision < mc.precision) ++p_votes;
  }
  bool pass = f_votes >= 4 && p_votes >= 4;
  report(7, pass,
         fmt("attacked-training degrades generations: frechet %d/5, precision %d/5 "
             "(need 4/5 each), %.1fs",
             f_votes, p_votes, secs_since(t0)));
}

double c08_grid(const std::string& bin, const fs::path& scratch) {
  // crop identity first; then the CLI robustness grid end to end.
  Dataset ds = Dataset::procedural(1, 7);
  bool identity = crop_and_resize(ds.images[0], 0).data == ds.images[0].data;

  auto t0 = Clock::now();
  std::string out = (scratch / "grid").string();
  std::string fixture = getenv_required("VEIL_FIXTURE_DIR");
  int rc = run_cli(bin, "eval --scenario grid --checkpoint " + fixture + "/model.mstf --out " +
                            out + " --seed 7");
  double dt = secs_since(t0);

  bool csv_ok = false;
  std::string why = fmt("eval exit code %d", rc);
  if (rc == 0) {
    std::ifstream is(out + "/report.csv");
    std::string line;
    std::getline(is, line);
    csv_ok = line ==
             "scenario,mode,transform,target_id,w,frechet_proxy,precision,"
             "mean_dm_loss,mean_latent_distance,mean_psnr,seed";
    int rows = 0;
    while (csv_ok && std::getline(is, line)) {
      ++rows;
      std::stringstream ss(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (fields.size() != 11) {
        csv_ok = false;
        why = fmt("row %d has %zu fields", rows, fields.size());
        break;
      }
      double fre = std::atof(fields[5].c_str());
      double prec = std::atof(fields[6].c_str());
      double dm = std::atof(fields[7].c_str());
      double psnr_v = std::atof(fields[9].c_str());
      if (!(std::isfinite(fre) && fre >= 0.0 && prec >= 0.0 && prec <= 1.0 && dm >= 0.0 &&
            psnr_v > 0.0)) {
        csv_ok = false;
        why = "row " + std::to_string(rows) + " violates metric invariants: " + line;
        break;
      }
    }
    if (csv_ok && rows != 10) {
      csv_ok = false;
      why = fmt("expected 10 grid rows, got %d", rows);
    }
    if (csv_ok) why = fmt("identity crop exact; 10-row grid CSV well-formed, %.1fs", dt);
  }
  report(8, identity && csv_ok, identity ? why : "crop_px=0 is not the identity");
  return dt;
}

void c09_targets(const Checkpoint& ck) {
  auto t0 = Clock::now();
  Dataset ds = Dataset::procedural(256, 42);
  // Near-mid-gray inputs: the regime where the zero target is the weakest
  // pull (constant images share the encoder's no-texture response).
  std::vector<Tensor> imgs;
  Rng gray_rng(4242);
  for (int i = 0; i < 6; ++i) {
    Tensor x = Tensor::zeros({3, 32, 32});
    for (int64_t j = 0; j < x.numel(); ++j) x[j] = 0.5 + 0.2 * (gray_rng.uniform01() - 0.5);
    imgs.push_back(std::move(x));
  }
  int disp_votes = 0, fre_votes = 0;
  for (uint64_t s = 1; s <= 5; ++s) {
    double best_disp = 1e300, best_fre = 1e300;
    size_t disp_arg = 99, fre_arg = 99, ti = 0;
    for (TargetKind k : all_targets()) {
      std::vector<Tensor> adv;
      for (size_t i = 0; i < imgs.size(); ++i) {
        AttackConfig cfg;
        cfg.mode = AttackMode::kTextural;
        cfg.target = make_target(k);
        cfg.seed = 7000 + 100 * s + i;  // paired across targets
        adv.push_back(pgd_attack(ck.params, ck.schedule, imgs[i], cfg).adversarial);
      }
      double disp = mean_latent_distance(ck.params, imgs, adv);
      MetricReport m = scenario_finetune(ck.params, ck.schedule, adv, ds.images, 32, s);
      if (disp < best_disp) {
        best_disp = disp;
        disp_arg = ti;
      }
      if (m.frechet_proxy < best_fre) {
        best_fre = m.frechet_proxy;
        fre_arg = ti;
      }
      ++ti;
    }
    if (disp_arg == 0) ++disp_votes;  // index 0 is the zero target
    if (fre_arg == 0) ++fre_votes;
  }
  bool pass = disp_votes >= 4 && fre_votes >= 4;
  report(9, pass,
         fmt("zero target weakest: displacement argmin %d/5, finetune frechet argmin %d/5 "
             "(need 4/5 each), %.1fs",
             disp_votes, fre_votes, secs_since(t0)));
}

void c10_determinism(const std::string& bin, const Checkpoint& ck, const fs::path& scratch) {
  // Checkpoint round-trip.
  std::string ckpath = (scratch / "roundtrip.mstf").string();
  save_checkpoint(ckpath, ck);
  Checkpoint back = load_checkpoint(ckpath);
  bool ck_ok = back.params.bit_equal(ck.params) && back.schedule.beta == ck.schedule.beta &&
               back.schedule.alpha_bar == ck.schedule.alpha_bar;

  // PNG round-trip within the quantization bound.
  Rng rng(5);
  Tensor img = Tensor::zeros({3, 32, 32});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform01();
  std::string png = (scratch / "roundtrip.png").string();
  save_image(png, img);
  Tensor loaded = load_image(png, 32, 32);
  double max_err = 0.0;
  for (int64_t i = 0; i < img.numel(); ++i) {
    max_err = std::max(max_err, std::abs(loaded[i] - img[i]));
  }
  bool png_ok = max_err <= 1.0 / 510.0;

  // Same manifest, same bytes: rerun an attack from its own manifest.
  std::string fixture = getenv_required("VEIL_FIXTURE_DIR");
  std::string input = fixture + "/dataset_preview_00.png";
  std::string a = (scratch / "runA").string(), b = (scratch / "runB").string();
  int rc1 = run_cli(bin, "attack " + input + " --checkpoint " + fixture +
                             "/model.mstf --mode semantic --steps 8 --seed 5 --out " + a);
  int rc2 = run_cli(bin, "attack --config " + a + "/manifest.txt --out " + b);
  const char* name = "/adv_000_dataset_preview_00.png";
  bool rerun_ok = rc1 == 0 && rc2 == 0 && slurp(a + name) == slurp(b + name) &&
                  !slurp(a + name).empty() &&
                  slurp(a + "/delta_000_dataset_preview_00.mstf") ==
                      slurp(b + "/delta_000_dataset_preview_00.mstf");

  bool pass = ck_ok && png_ok && rerun_ok;
  report(10, pass,
         fmt("checkpoint bit-exact: %s; png max err %.2e <= 1/510: %s; manifest rerun "
             "byte-identical: %s",
             ck_ok ? "yes" : "NO", max_err, png_ok ? "yes" : "NO", rerun_ok ? "yes" : "NO"));
}

void c11_envelope(const std::string& bin, double grid_seconds, const fs::path& scratch) {
  std::string fixture = getenv_required("VEIL_FIXTURE_DIR");
  std::string stats = slurp(fixture + "/stats.txt");
  double train_seconds = -1.0;
  size_t pos = stats.find("train_seconds=");
  if (pos != std::string::npos) train_seconds = std::atof(stats.c_str() + pos + 14);

  std::string input = fixture + "/dataset_preview_00.png";
  std::string target_png = (scratch / "target_glyph.png").string();
  save_image(target_png, make_target(TargetKind::kGlyph));

  auto t0 = Clock::now();
  int rc = 0;
  rc |= run_cli(bin, "attack " + input + " --checkpoint " + fixture +
                         "/model.mstf --mode semantic --seed 1 --out " +
                         (scratch / "sem").string());
  rc |= run_cli(bin, "attack " + input + " --checkpoint " + fixture +
                         "/model.mstf --mode textural --target " + target_png +
                         " --seed 1 --out " + (scratch / "tex").string());
  rc |= run_cli(bin, "attack " + input + " --checkpoint " + fixture +
                         "/model.mstf --mode fused --target " + target_png + " --seed 1 --out " +
                         (scratch / "fus").string());
  double attack_seconds = secs_since(t0);

  double total = train_seconds + attack_seconds + grid_seconds;
  bool pass = rc == 0 && train_seconds > 0.0 && total < 3600.0;
  report(11, pass,
         fmt("train %.0fs + attacks %.0fs + grid %.0fs = %.0fs of the 3600s budget",
             train_seconds, attack_seconds, grid_seconds, total));
}

}  // namespace

int main() {
  std::string bin = getenv_required("VEIL_BIN");
  std::string fixture = getenv_required("VEIL_FIXTURE_DIR");
  Checkpoint ck = load_checkpoint(fixture + "/model.mstf");

  fs::path scratch = fs::temp_directory_path() / ("veil_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);

  c01_gradients(gradcheck_model(9));
  c02_feasibility(ck);
  c03_oracle();
  c04_degeneracy(ck);
  c05_semantic(ck);
  c06_textural(ck);
  c07_finetune(ck);
  double grid_seconds = c08_grid(bin, scratch);
  c09_targets(ck);
  c10_determinism(bin, ck, scratch);
  c11_envelope(bin, grid_seconds, scratch);

  std::error_code ec;
  fs::remove_all(scratch, ec);
  if (g_failures == 0) {
    std::printf("all 11 criteria pass\n");
  } else {
    std::printf("%d criteria FAILED\n", g_failures);
  }
  return g_failures;
}
