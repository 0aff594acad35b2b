#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "test_util.hpp"
#include "veil/image_io.hpp"

using namespace veil;
using veil::test::TempDir;
using veil::test::env_or_die;
using veil::test::random_image;
namespace fs = std::filesystem;

namespace {

// Runs the CLI binary named by VEIL_BIN and returns its exit code.
int run(const std::string& args) {
  std::string cmd = env_or_die("VEIL_BIN") + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  if (rc == -1) throw std::runtime_error("system() failed");
  return WEXITSTATUS(rc);
}

std::string data_file(const char* name) {
  return env_or_die("VEIL_DATA_DIR") + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

bool grep_file(const std::string& path, const std::string& needle) {
  return slurp(path).find(needle) != std::string::npos;
}

// One tiny trained run shared by the CLI cases; built on first use and kept
// for the whole process so every subcase reuses the same checkpoint.
struct SharedRun {
  TempDir tmp;
  std::string dir;
  int rc;
  SharedRun()
      : dir(tmp.file("tiny_train")),
        rc(run("train --out " + dir +
               " --ae-steps 5 --dm-steps 5 --batch 2 --dataset-size 8 --seed 7")) {}
};

const SharedRun& tiny_run() {
  static SharedRun s;
  return s;
}

}  // namespace

TEST_CASE("png io round-trips within quantization error") {
  // tiny.png holds four known pixels; load must produce byte/255 exactly.
  Tensor t = load_image(data_file("tiny.png"));
  REQUIRE(t.shape == Shape{3, 2, 2});
  CHECK(t.at(0, 0, 0) == 0.0);
  CHECK(t.at(1, 0, 0) == 128.0 / 255.0);
  CHECK(t.at(2, 0, 0) == 1.0);
  CHECK(t.at(0, 0, 1) == 64.0 / 255.0);
  CHECK(t.at(1, 0, 1) == 0.0);
  CHECK(t.at(2, 0, 1) == 128.0 / 255.0);
  CHECK(t.at(0, 1, 0) == 1.0);
  CHECK(t.at(1, 1, 1) == 1.0);

  // Alpha channels are dropped, not an error.
  Tensor rgba = load_image(data_file("tiny_rgba.png"));
  CHECK(rgba.shape == Shape{3, 2, 2});

  CHECK_THROWS_AS(load_image(data_file("tiny_gray.png")), std::runtime_error);
  CHECK_THROWS_AS(load_image(data_file("absent.png")), std::runtime_error);
  CHECK_THROWS_AS(load_image(data_file("tiny.png"), 32, 32), std::runtime_error);
  CHECK_NOTHROW(load_image(data_file("tiny.png"), 2, 2));

  TempDir tmp;
  Tensor img = random_image(5);
  save_image(tmp.file("x.png"), img);
  Tensor back = load_image(tmp.file("x.png"), 32, 32);
  for (int64_t i = 0; i < img.numel(); ++i) {
    CHECK(std::abs(back[i] - img[i]) <= 0.5 / 255.0 + 1e-12);
  }
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("train --help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("train --no-such-flag 1") == 2);
}

TEST_CASE("train writes the full run directory") {
  TempDir tmp;
  const SharedRun& shared = tiny_run();
  REQUIRE(shared.rc == 0);
  const std::string& dir = shared.dir;
  CHECK(fs::exists(dir + "/manifest.txt"));
  CHECK(fs::exists(dir + "/model.mstf"));
  CHECK(fs::exists(dir + "/losses.csv"));
  CHECK(fs::exists(dir + "/stats.txt"));
  CHECK(fs::exists(dir + "/dataset_preview_00.png"));
  CHECK(grep_file(dir + "/manifest.txt", "ae_steps=5"));
  CHECK(grep_file(dir + "/losses.csv", "phase,step,loss"));
  CHECK(grep_file(dir + "/stats.txt", "train_seconds="));

  SUBCASE("attack produces per-image outputs") {
    std::string out = tmp.file("atk");
    int rc = run("attack " + dir + "/dataset_preview_00.png --checkpoint " + dir +
                 "/model.mstf --out " + out + " --steps 2 --mode semantic");
    CHECK(rc == 0);
    CHECK(fs::exists(out + "/adv_000_dataset_preview_00.png"));
    CHECK(fs::exists(out + "/delta_000_dataset_preview_00.mstf"));
    std::string trace = slurp(out + "/trace_000_dataset_preview_00.csv");
    CHECK(trace.find("step,semantic,textural,objective") == 0);
    // Header plus one line per step.
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 3);
  }

  SUBCASE("textural attack without target is a usage error") {
    std::string out = tmp.file("atk2");
    int rc = run("attack " + dir + "/dataset_preview_00.png --checkpoint " + dir +
                 "/model.mstf --out " + out + " --steps 2 --mode textural");
    CHECK(rc == 2);
  }

  SUBCASE("sample writes n images") {
    std::string out = tmp.file("smp");
    int rc = run("sample --checkpoint " + dir + "/model.mstf --out " + out + " --samples 2");
    CHECK(rc == 0);
    CHECK(fs::exists(out + "/sample_000.png"));
    CHECK(fs::exists(out + "/sample_001.png"));
    CHECK_FALSE(fs::exists(out + "/sample_002.png"));
  }

  SUBCASE("identical seeds reproduce the checkpoint byte for byte") {
    std::string out = tmp.file("re");
    int rc = run("train --out " + out +
                 " --ae-steps 5 --dm-steps 5 --batch 2 --dataset-size 8 --seed 7");
    REQUIRE(rc == 0);
    CHECK(slurp(out + "/model.mstf") == slurp(dir + "/model.mstf"));
  }

  SUBCASE("config file applies under flags") {
    std::string cfg = tmp.file("run.cfg");
    {
      std::ofstream os(cfg);
      os << "ae_steps=4\ndm_steps=4\nbatch=2\ndataset_size=8\nseed=9\n";
    }
    std::string out = tmp.file("cfgrun");
    int rc = run("train --config " + cfg + " --out " + out + " --seed 11");
    REQUIRE(rc == 0);
    CHECK(grep_file(out + "/manifest.txt", "ae_steps=4"));  // from the file
    CHECK(grep_file(out + "/manifest.txt", "seed=11"));     // flag wins
  }

  SUBCASE("unknown config key is a usage error") {
    std::string cfg = tmp.file("bad.cfg");
    {
      std::ofstream os(cfg);
      os << "bogus=1\n";
    }
    CHECK(run("train --config " + cfg + " --out " + tmp.file("nope")) == 2);
  }

  SUBCASE("runtime failures leave an INCOMPLETE marker") {
    std::string out = tmp.file("fail");
    int rc = run("attack " + dir + "/dataset_preview_00.png --mode semantic --checkpoint " +
                 tmp.file("absent.mstf") + " --out " + out + " --steps 2");
    CHECK(rc == 1);
    CHECK(fs::exists(out + "/INCOMPLETE"));
  }

  SUBCASE("gradcheck passes on the built-in model") {
    CHECK(run("gradcheck --seed 9") == 0);
  }
}

TEST_CASE("invalid attack settings are rejected before any work") {
  TempDir tmp;
  CHECK(run("attack missing.png --out " + tmp.file("x") + " --steps 0") == 2);
  CHECK(run("eval --scenario bogus --out " + tmp.file("y")) == 2);
}
