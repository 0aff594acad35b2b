#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "test_util.hpp"
#include "veil/attack.hpp"
#include "veil/gradcheck.hpp"
#include "veil/targets.hpp"

using namespace veil;
using veil::test::random_image;

namespace {

constexpr double kEps = 17.0 / 255.0;
constexpr double kAlpha = 1.0 / 255.0;

AttackConfig base_config(AttackMode mode) {
  AttackConfig cfg;
  cfg.mode = mode;
  cfg.steps = 6;
  cfg.seed = 3;
  if (mode != AttackMode::kSemantic) cfg.target = make_target(TargetKind::kGlyph);
  return cfg;
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(std::string(mode_name(AttackMode::kSemantic)) == "semantic");
  CHECK(std::string(mode_name(AttackMode::kTextural)) == "textural");
  CHECK(std::string(mode_name(AttackMode::kFused)) == "fused");
}

TEST_CASE("config validation names the offending field") {
  AttackConfig cfg = base_config(AttackMode::kFused);
  SUBCASE("valid") { CHECK_NOTHROW(cfg.validate()); }
  SUBCASE("steps") {
    cfg.steps = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("steps"), std::invalid_argument);
  }
  SUBCASE("alpha") {
    cfg.alpha = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("alpha"), std::invalid_argument);
  }
  SUBCASE("epsilon") {
    cfg.epsilon = -0.1;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("epsilon"), std::invalid_argument);
  }
  SUBCASE("weight") {
    cfg.fused_weight = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("missing target") {
    cfg.target.reset();
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("target"), std::invalid_argument);
  }
  SUBCASE("bad target shape") {
    cfg.target = Tensor::zeros({3, 16, 16});
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("semantic needs no target") {
    AttackConfig sem = base_config(AttackMode::kSemantic);
    CHECK_NOTHROW(sem.validate());
  }
}

TEST_CASE("pgd_step saturates a constant-sign gradient at the box edge") {
  // Objective (delta - m)^2 has gradient 2(delta - m); ascent walks toward
  // the epsilon face and must land on it exactly, not within a tolerance.
  Tensor x = Tensor::zeros({2, 2});
  for (double& v : x.data) v = 0.5;
  Tensor delta = Tensor::zeros({2, 2});
  Tensor grad = Tensor::zeros({2, 2});
  for (int step = 0; step < 40; ++step) {
    for (int64_t i = 0; i < delta.numel(); ++i) grad[i] = 2.0 * (delta[i] - 0.2);
    delta = pgd_step(x, delta, grad, kAlpha, kEps);
  }
  for (int64_t i = 0; i < delta.numel(); ++i) CHECK(delta[i] == -kEps);

  for (double& v : delta.data) v = 0.0;
  for (int step = 0; step < 40; ++step) {
    for (int64_t i = 0; i < delta.numel(); ++i) grad[i] = 2.0 * (delta[i] + 0.2);
    delta = pgd_step(x, delta, grad, kAlpha, kEps);
  }
  for (int64_t i = 0; i < delta.numel(); ++i) CHECK(delta[i] == kEps);
}

TEST_CASE("pgd_step folds the pixel clamp into delta") {
  Tensor x = Tensor::zeros({1, 1});
  x[0] = 0.99;
  Tensor delta = Tensor::zeros({1, 1});
  Tensor grad = Tensor::zeros({1, 1});
  grad[0] = 1.0;
  for (int step = 0; step < 10; ++step) delta = pgd_step(x, delta, grad, kAlpha, kEps);
  CHECK(x[0] + delta[0] == 1.0);  // pinned to the pixel boundary, bit-exact

  // Zero gradient is a fixed point: sign(0) = 0.
  Tensor zero_grad = Tensor::zeros({1, 1});
  Tensor before = delta;
  delta = pgd_step(x, delta, zero_grad, kAlpha, kEps);
  CHECK(delta.data == before.data);

  CHECK_THROWS_AS(pgd_step(x, Tensor::zeros({2, 1}), grad, kAlpha, kEps),
                  std::invalid_argument);
}

TEST_CASE("attack loop fills traces and respects feasibility") {
  ModelParams p = gradcheck_model(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(1);

  AttackConfig cfg = base_config(AttackMode::kSemantic);
  PerturbationResult r = pgd_attack(p, s, x, cfg);

  REQUIRE(r.loss_trace.size() == 6);  // one entry per step, evaluated pre-update
  REQUIRE(r.audit.size() == 6);
  CHECK(r.delta_history.empty());
  for (const StepAudit& a : r.audit) {
    CHECK(a.max_abs_delta <= kEps + 1e-12);
    CHECK(a.min_pixel >= 0.0);
    CHECK(a.max_pixel <= 1.0);
  }
  for (const StepLoss& l : r.loss_trace) {
    CHECK(l.textural == 0.0);  // semantic mode never encodes a target
    CHECK(l.objective == l.semantic);
  }
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(r.adversarial[i] == x[i] + r.delta[i]);
  }
  // The ascent must actually move.
  CHECK(max_abs(r.delta) > 0.0);

  cfg.record_deltas = true;
  PerturbationResult rh = pgd_attack(p, s, x, cfg);
  REQUIRE(rh.delta_history.size() == 6);
  CHECK(rh.delta_history.back().data == rh.delta.data);
  CHECK(rh.delta.data == r.delta.data);  // history capture does not perturb the run
}

TEST_CASE("fused with zero weight reproduces the textural run bit-for-bit") {
  ModelParams p = gradcheck_model(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(2);

  AttackConfig tex = base_config(AttackMode::kTextural);
  tex.record_deltas = true;
  AttackConfig fz = base_config(AttackMode::kFused);
  fz.fused_weight = 0.0;
  fz.record_deltas = true;

  PerturbationResult a = pgd_attack(p, s, x, tex);
  PerturbationResult b = pgd_attack(p, s, x, fz);
  REQUIRE(a.delta_history.size() == b.delta_history.size());
  for (size_t i = 0; i < a.delta_history.size(); ++i) {
    CHECK(a.delta_history[i].data == b.delta_history[i].data);
  }
  for (size_t i = 0; i < a.loss_trace.size(); ++i) {
    CHECK(a.loss_trace[i].objective == b.loss_trace[i].objective);
    CHECK(a.loss_trace[i].textural == b.loss_trace[i].textural);
  }
}

TEST_CASE("fused trace combines the terms with the configured weight") {
  ModelParams p = gradcheck_model(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(3);
  AttackConfig cfg = base_config(AttackMode::kFused);
  cfg.fused_weight = 250.0;
  PerturbationResult r = pgd_attack(p, s, x, cfg);
  for (const StepLoss& l : r.loss_trace) {
    CHECK(l.objective == doctest::Approx(250.0 * l.semantic - l.textural).epsilon(1e-12));
  }
}

TEST_CASE("textural objective drives the latent toward the target") {
  ModelParams p = gradcheck_model(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(4);
  AttackConfig cfg = base_config(AttackMode::kTextural);
  cfg.steps = 30;
  PerturbationResult r = pgd_attack(p, s, x, cfg);
  // Objective is -distance, so the trace's textural column must shrink.
  CHECK(r.loss_trace.back().textural < r.loss_trace.front().textural);
  // Endpoint check at the final delta, computed outside the trace.
  CHECK(textural_term(p, x, r.delta, *cfg.target) <= textural_term(p, x, Tensor::zeros(x.shape), *cfg.target));
}

TEST_CASE("value-level terms agree with the attack trace") {
  ModelParams p = gradcheck_model(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(5);
  Tensor y = make_target(TargetKind::kStripes);
  Tensor delta = Tensor::zeros({3, 32, 32});
  Rng rng(8);
  Tensor eps = rng.normal_tensor({4, 8, 8});

  double sem = semantic_term(p, s, x, 17, eps);
  CHECK(sem == dm_loss(p, s, x, 17, eps));

  Tensor ex = encode(p, x);
  Tensor ey = encode(p, y);
  double acc = 0.0;
  for (int64_t i = 0; i < ex.numel(); ++i) {
    double d = ey[i] - ex[i];
    acc += d * d;
  }
  CHECK(textural_term(p, x, delta, y) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));

  double fused = fused_objective(p, s, x, delta, y, 100.0, 17, eps);
  CHECK(fused == doctest::Approx(100.0 * sem - textural_term(p, x, delta, y)).epsilon(1e-12));
}

TEST_CASE("direction probe tracks the pure modes at extreme weights") {
  ModelParams p = gradcheck_model(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(6);
  Tensor y = make_target(TargetKind::kGlyph);

  std::vector<double> ws = {0.0, 1e8};
  std::vector<DirectionProbe> probes = gradient_direction_probe(p, s, x, y, ws, 11);
  REQUIRE(probes.size() == 2);
  REQUIRE(probes[0].cos_textural.has_value());
  CHECK(*probes[0].cos_textural == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(probes[1].cos_semantic.has_value());
  CHECK(*probes[1].cos_semantic > 0.999);

  std::vector<DirectionProbe> again = gradient_direction_probe(p, s, x, y, ws, 11);
  CHECK(*again[0].cos_textural == *probes[0].cos_textural);
  CHECK(*again[1].cos_semantic == *probes[1].cos_semantic);
}
