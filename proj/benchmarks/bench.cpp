#include <benchmark/benchmark.h>

#include "veil/attack.hpp"
#include "veil/gradcheck.hpp"
#include "veil/metrics.hpp"
#include "veil/rng.hpp"
#include "veil/targets.hpp"

namespace {

using namespace veil;

Tensor random_image(uint64_t seed) {
  Rng rng(seed);
  Tensor x = Tensor::zeros({3, 32, 32});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform01();
  return x;
}

const ModelParams& model() {
  static ModelParams p = gradcheck_model(7);
  return p;
}

void bm_conv_forward(benchmark::State& state) {
  Graph g;
  Rng rng(1);
  Var x = g.input(rng.normal_tensor({16, 32, 32}));
  Var w = g.input(rng.normal_tensor({32, 16, 3, 3}));
  Var b = g.input(rng.normal_tensor({32}));
  for (auto _ : state) {
    Graph fresh;
    Var xi = fresh.input(g.value(x));
    Var wi = fresh.input(g.value(w));
    Var bi = fresh.input(g.value(b));
    benchmark::DoNotOptimize(fresh.value(fresh.conv2d(xi, wi, bi, 1)));
  }
}
BENCHMARK(bm_conv_forward);

void bm_encode(benchmark::State& state) {
  Tensor x = random_image(2);
  for (auto _ : state) benchmark::DoNotOptimize(encode(model(), x));
}
BENCHMARK(bm_encode);

void bm_denoiser_forward(benchmark::State& state) {
  NoiseSchedule s = default_schedule();
  Rng rng(3);
  Tensor z = rng.normal_tensor({4, 8, 8});
  for (auto _ : state) benchmark::DoNotOptimize(denoiser_forward(model(), z, 50, s));
}
BENCHMARK(bm_denoiser_forward);

void bm_dm_loss_backward(benchmark::State& state) {
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(4);
  Rng rng(5);
  Tensor eps = rng.normal_tensor({4, 8, 8});
  for (auto _ : state) {
    Graph g;
    ParamVars pv = load_params(g, model());
    Var xv = g.input(x);
    Var loss = dm_loss_node(g, pv, s, xv, 50, g.input(eps));
    benchmark::DoNotOptimize(g.backward(loss, {xv}));
  }
}
BENCHMARK(bm_dm_loss_backward);

void bm_pgd_step_fused(benchmark::State& state) {
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(6);
  AttackConfig cfg;
  cfg.steps = 1;
  cfg.target = make_target(TargetKind::kGlyph);
  cfg.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pgd_attack(model(), s, x, cfg));
  }
}
BENCHMARK(bm_pgd_step_fused);

void bm_frechet(benchmark::State& state) {
  Rng rng(8);
  Tensor a = rng.normal_tensor({64, 64});
  Tensor b = rng.normal_tensor({64, 64});
  for (auto _ : state) benchmark::DoNotOptimize(frechet_proxy(a, b));
}
BENCHMARK(bm_frechet);

}  // namespace

BENCHMARK_MAIN();
