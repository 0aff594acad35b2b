#include <doctest.h>

#include <string>
#include <vector>

#include "test_util.hpp"
#include "veil/attack.hpp"
#include "veil/checkpoint.hpp"
#include "veil/dataset.hpp"
#include "veil/metrics.hpp"
#include "veil/targets.hpp"
#include "veil/train.hpp"

using namespace veil;
using veil::test::env_or_die;

namespace {

// Checkpoint produced by the ctest training fixture at product defaults.
const Checkpoint& fixture() {
  static Checkpoint ck = load_checkpoint(env_or_die("VEIL_FIXTURE_DIR") + "/model.mstf");
  return ck;
}

}  // namespace

TEST_CASE("trained autoencoder reconstructs the training distribution") {
  const Checkpoint& ck = fixture();
  Dataset ds = Dataset::procedural(10, 42);
  double mean_mse = 0.0;
  for (const Tensor& x : ds.images) {
    Tensor r = decode(ck.params, encode(ck.params, x));
    double mse = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
      double d = r[i] - x[i];
      mse += d * d;
    }
    mean_mse += mse / static_cast<double>(x.numel());
  }
  mean_mse /= 10.0;
  CHECK(mean_mse < 0.1);
}

TEST_CASE("trained denoiser actually conditions on the timestep") {
  const Checkpoint& ck = fixture();
  Rng rng(3);
  Tensor z = rng.normal_tensor({4, 8, 8});
  Tensor early = denoiser_forward(ck.params, z, 1, ck.schedule);
  Tensor late = denoiser_forward(ck.params, z, ck.schedule.T, ck.schedule);
  CHECK(early.data != late.data);
  CHECK(max_abs(early) > 0.0);  // the final conv has left its zero init
}

TEST_CASE("trained sampler beats the untrained one on the feature metric") {
  const Checkpoint& ck = fixture();
  Dataset ds = Dataset::procedural(64, 42);
  Tensor ref = feature_extract(ck.params, ds.images);

  std::vector<Tensor> strained = sample(ck.params, ck.schedule, 16, 33);
  std::vector<Tensor> srandom = sample(ModelParams::init(123), ck.schedule, 16, 33);
  double f_trained = frechet_proxy(ref, feature_extract(ck.params, strained));
  double f_random = frechet_proxy(ref, feature_extract(ck.params, srandom));
  CHECK(f_trained < f_random);

  std::vector<Tensor> again = sample(ck.params, ck.schedule, 2, 5);
  std::vector<Tensor> again2 = sample(ck.params, ck.schedule, 2, 5);
  CHECK(again[0].data == again2[0].data);
  CHECK(again[1].data == again2[1].data);
}

TEST_CASE("textural attack makes quick progress on the trained encoder") {
  const Checkpoint& ck = fixture();
  Dataset ds = Dataset::procedural(1, 42);
  AttackConfig cfg;
  cfg.mode = AttackMode::kTextural;
  cfg.steps = 40;
  cfg.target = make_target(TargetKind::kGlyph);
  cfg.seed = 11;
  PerturbationResult r = pgd_attack(ck.params, ck.schedule, ds.images[0], cfg);
  double initial = textural_term(ck.params, ds.images[0], Tensor::zeros({3, 32, 32}), *cfg.target);
  double final_d = textural_term(ck.params, ds.images[0], r.delta, *cfg.target);
  CHECK(final_d < 0.7 * initial);
}
