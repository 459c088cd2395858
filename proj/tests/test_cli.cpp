#include "support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

const fs::path kScratch = fs::temp_directory_path() / "swats-test-cli";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli(const std::string& args, const std::string& env = "") {
  fs::create_directories(kScratch);
  const fs::path log = kScratch / "output.txt";
  const std::string command = "cd '" + kScratch.string() + "' && " + env + " '" SWATS_CLI "' " +
                              args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(command.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
}

std::string config(const std::string& name) {
  return std::string("'") + SWATS_CONFIG_DIR + "/" + name + "'";
}

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("validate accepts every bundled config") {
  for (const auto& entry : fs::directory_iterator(SWATS_CONFIG_DIR)) {
    CAPTURE(entry.path().string());
    CHECK(cli("validate --config '" + entry.path().string() + "'").code == 0);
  }
}

TEST_CASE("invalid configs exit 3 and name the field") {
  const Outcome beta = cli("validate --config " + config("swats-quadratic.json") + " --set optimizer.beta2=1.0");
  CHECK(beta.code == 3);
  CHECK(contains(beta.output, "optimizer.beta2"));
  const Outcome clip = cli("validate --config " + config("swats-quadratic.json") + " --set grad_clip_norm=-1");
  CHECK(clip.code == 3);
  CHECK(contains(clip.output, "grad_clip_norm"));
  const Outcome epochs = cli("run --config " + config("swats-quadratic.json") + " --set epochs=0");
  CHECK(epochs.code == 3);
  CHECK(contains(epochs.output, "epochs"));
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli("run --config missing.json").code == 2);
  CHECK(cli("run").code == 2);
  CHECK(cli("frobnicate").code == 2);
  const Outcome demo = cli("demo nope");
  CHECK(demo.code == 2);
  CHECK(contains(demo.output, "min-norm"));
  CHECK(contains(demo.output, "switch"));
  CHECK(contains(demo.output, "clip"));
}

TEST_CASE("run prints the switch and writes byte-identical records") {
  fs::remove_all(kScratch / "a");
  fs::remove_all(kScratch / "b");
  const Outcome first = cli("run --config " + config("swats-quadratic.json") + " --out a");
  const Outcome second = cli("run --config " + config("swats-quadratic.json") + " --out b");
  REQUIRE(first.code == 0);
  REQUIRE(second.code == 0);
  // Pinned by oracle run.
  CHECK(contains(first.output, "switch_epoch        45\n"));
  CHECK(contains(first.output, "Lambda              0.00019549744542700847\n"));
  const std::string a = read_file(kScratch / "a" / "run-56-swats.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == read_file(kScratch / "b" / "run-56-swats.csv"));
  CHECK(fs::exists(kScratch / "a" / "run-56-swats.jsonl"));
}

TEST_CASE("seed flag and output directory from the environment") {
  fs::remove_all(kScratch / "env");
  const Outcome r = cli("run --config " + config("swats-logistic.json") + " --seed 9 --set epochs=1",
                        "SWATS_OUT_DIR=env");
  CHECK(r.code == 0);
  CHECK(fs::exists(kScratch / "env" / "run-9-swats.csv"));
}

TEST_CASE("grid writes a table and reports the best rate") {
  fs::remove_all(kScratch / "grid");
  const Outcome r = cli("grid --config " + config("grid-sgd-quadratic.json") + " --out grid");
  CHECK(r.code == 0);
  CHECK(contains(r.output, "best_lr 0.001"));
  CHECK(fs::exists(kScratch / "grid" / "grid-56-sgd.csv"));
}

TEST_CASE("demos write their tables") {
  fs::remove_all(kScratch / "demo");
  REQUIRE(cli("demo min-norm --out demo").code == 0);
  const std::string min_norm = read_file(kScratch / "demo" / "demo-min-norm.csv");
  CHECK(min_norm.rfind("epoch,sgd_residual,adam_residual,sgd_distance,adam_distance\n", 0) == 0);

  REQUIRE(cli("demo switch --out demo").code == 0);
  CHECK(read_file(kScratch / "demo" / "demo-switch.csv").rfind("step,gamma,lambda_corrected,running_mean\n", 0) == 0);

  REQUIRE(cli("demo clip --out demo").code == 0);
  const std::string clip = read_file(kScratch / "demo" / "demo-clip.csv");
  const std::string header = clip.substr(0, clip.find('\n'));
  for (const char* name : {"sgd", "adam", "adamclip_1_inf", "adamclip_0_1"})
    CHECK(contains(header, std::string(name) + "_test_accuracy"));
}
