#include <doctest.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "test_util.hpp"
#include "veil/checkpoint.hpp"
#include "veil/model.hpp"
#include "veil/rng.hpp"
#include "veil/schedule.hpp"

using namespace veil;
using veil::test::TempDir;
using veil::test::random_image;

TEST_CASE("init produces the pinned architecture") {
  ModelParams p = ModelParams::init(7);
  CHECK(p.all_finite());
  CHECK(p.bit_equal(ModelParams::init(7)));
  CHECK_FALSE(p.bit_equal(ModelParams::init(8)));

  auto table = p.param_table();
  auto arch = ModelParams::architecture_table();
  REQUIRE(table.size() == 20);
  REQUIRE(arch.size() == 20);
  for (size_t i = 0; i < 20; ++i) {
    CHECK(table[i].first == arch[i].first);
    CHECK(table[i].second->shape == arch[i].second);
  }
  // Untrained denoiser predicts exactly zero noise.
  for (double v : p.den_conv3_w.data) CHECK(v == 0.0);
  for (double v : p.den_conv3_b.data) CHECK(v == 0.0);
}

TEST_CASE("forward shapes and determinism") {
  ModelParams p = ModelParams::init(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(21);

  Tensor z = encode(p, x);
  REQUIRE(z.shape == Shape{4, 8, 8});
  CHECK(z.data == encode(p, x).data);

  Tensor recon = decode(p, z);
  REQUIRE(recon.shape == Shape{3, 32, 32});
  CHECK(min_value(recon) > 0.0);
  CHECK(max_value(recon) < 1.0);

  Rng rng(5);
  Tensor eps = rng.normal_tensor({4, 8, 8});
  Tensor zt = add_noise(s, z, 50, eps);
  Tensor pred = denoiser_forward(p, zt, 50, s);
  REQUIRE(pred.shape == Shape{4, 8, 8});

  CHECK_THROWS_AS(encode(p, Tensor::zeros({3, 16, 16})), std::invalid_argument);
  CHECK_THROWS_AS(decode(p, Tensor::zeros({4, 4, 4})), std::invalid_argument);
}

TEST_CASE("add_noise matches the closed form exactly") {
  NoiseSchedule s = default_schedule();
  Rng rng(31);
  Tensor z0 = rng.normal_tensor({4, 8, 8});
  Tensor eps = rng.normal_tensor({4, 8, 8});
  for (int64_t t : {1, 50, 100}) {
    Tensor zt = add_noise(s, z0, t, eps);
    double sa = std::sqrt(s.alpha_bar_at(t));
    double sb = std::sqrt(1.0 - s.alpha_bar_at(t));
    for (int64_t i = 0; i < z0.numel(); ++i) {
      CHECK(zt[i] == z0[i] * sa + eps[i] * sb);
    }
  }
  CHECK_THROWS_AS(add_noise(s, z0, 0, eps), std::invalid_argument);
  CHECK_THROWS_AS(add_noise(s, z0, 101, eps), std::invalid_argument);
}

TEST_CASE("untrained dm_loss equals the eps mean square") {
  // Zero-initialized final conv means the prediction is exactly zero, so
  // dm_loss reduces to mean(eps^2); both paths must agree bit-for-bit.
  ModelParams p = ModelParams::init(7);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(77);
  Rng rng(9);
  double acc = 0.0;
  for (int i = 0; i < 100; ++i) {
    int64_t t = rng.uniform_int(1, s.T);
    Tensor eps = rng.normal_tensor({4, 8, 8});
    double manual = 0.0;
    for (int64_t j = 0; j < eps.numel(); ++j) manual += eps[j] * eps[j];
    manual /= static_cast<double>(eps.numel());
    double loss = dm_loss(p, s, x, t, eps);
    CHECK(loss == manual);
    acc += loss;
  }
  acc /= 100.0;
  CHECK(acc > 0.5);
  CHECK(acc < 2.0);
}

TEST_CASE("graph-node and value-level forwards agree") {
  ModelParams p = ModelParams::init(3);
  NoiseSchedule s = default_schedule();
  Tensor x = random_image(4);
  Rng rng(6);
  Tensor eps = rng.normal_tensor({4, 8, 8});

  Graph g;
  ParamVars pv = load_params(g, p);
  Var xv = g.input(x);
  CHECK(g.value(encode_node(g, pv, xv)).data == encode(p, x).data);
  CHECK(g.scalar_value(dm_loss_node(g, pv, s, xv, 42, g.input(eps))) ==
        dm_loss(p, s, x, 42, eps));
}

TEST_CASE("time embedding is a well-formed sinusoid table") {
  Tensor e1 = time_embedding(1, 100);
  Tensor eT = time_embedding(100, 100);
  REQUIRE(e1.shape == Shape{kTimeEmbedDim});
  CHECK(e1.data != eT.data);
  for (int64_t k = 0; k < kTimeEmbedDim; k += 2) {
    CHECK(e1[k] * e1[k] + e1[k + 1] * e1[k + 1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (double v : e1.data) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(time_embedding(0, 100), std::invalid_argument);
}

TEST_CASE("named tensor container round-trips") {
  TempDir tmp;
  Rng rng(8);
  NamedTensors ts;
  ts.emplace_back("alpha", rng.normal_tensor({3, 4}));
  ts.emplace_back("beta.gamma", rng.normal_tensor({7}));
  ts.emplace_back("scalar", Tensor::scalar(-0.25));
  save_tensors(tmp.file("t.mstf"), ts);
  NamedTensors back = load_tensors(tmp.file("t.mstf"));
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back[i].first == ts[i].first);
    CHECK(back[i].second.shape == ts[i].second.shape);
    CHECK(back[i].second.data == ts[i].second.data);
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  TempDir tmp;
  Checkpoint ck{ModelParams::init(7), default_schedule()};
  // Perturb away from init so the round-trip sees arbitrary payloads.
  Rng rng(12);
  ck.params.den_conv3_w = rng.normal_tensor({4, 32, 3, 3});
  save_checkpoint(tmp.file("m.mstf"), ck);
  Checkpoint back = load_checkpoint(tmp.file("m.mstf"));
  CHECK(back.params.bit_equal(ck.params));
  CHECK(back.schedule.T == 100);
  CHECK(back.schedule.beta == ck.schedule.beta);
  CHECK(back.schedule.alpha_bar == ck.schedule.alpha_bar);
}

TEST_CASE("checkpoint loader rejects corruption") {
  TempDir tmp;
  std::string path = tmp.file("m.mstf");
  save_checkpoint(path, {ModelParams::init(7), default_schedule()});

  auto slurp = [&]() {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  auto dump = [&](const std::string& name, const std::string& bytes) {
    std::string p = tmp.file(name.c_str());
    std::ofstream os(p, std::ios::binary);
    os << bytes;
    return p;
  };
  std::string good = slurp();

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(load_checkpoint(dump("magic.mstf", bad)),
                         doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    CHECK_THROWS_AS(load_checkpoint(dump("trunc.mstf", good.substr(0, good.size() - 9))),
                    std::runtime_error);
  }
  SUBCASE("truncated header") {
    CHECK_THROWS_AS(load_checkpoint(dump("hdr.mstf", good.substr(0, 10))),
                    std::runtime_error);
  }
  SUBCASE("trailing junk") {
    CHECK_THROWS_AS(load_checkpoint(dump("junk.mstf", good + "zz")), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(tmp.file("absent.mstf")), std::runtime_error);
  }
  SUBCASE("wrong tensor name") {
    NamedTensors ts = load_tensors(path);
    ts[0].first = "enc.conv1.weight";
    std::string p = tmp.file("name.mstf");
    save_tensors(p, ts);
    CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("enc.conv1"),
                         std::runtime_error);
  }
  SUBCASE("wrong tensor shape") {
    NamedTensors ts = load_tensors(path);
    ts[2].second = Tensor::zeros({16, 32, 3, 3});
    std::string p = tmp.file("shape.mstf");
    save_tensors(p, ts);
    CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("enc.conv2.w"),
                         std::runtime_error);
  }
  SUBCASE("missing schedule tensors") {
    NamedTensors ts = load_tensors(path);
    ts.pop_back();
    std::string p = tmp.file("count.mstf");
    save_tensors(p, ts);
    CHECK_THROWS_AS(load_checkpoint(p), std::runtime_error);
  }
  SUBCASE("non-finite weights") {
    NamedTensors ts = load_tensors(path);
    ts[4].second[0] = std::nan("");
    std::string p = tmp.file("nan.mstf");
    save_tensors(p, ts);
    CHECK_THROWS_AS(load_checkpoint(p), std::runtime_error);
  }
}
