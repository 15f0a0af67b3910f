#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "qmlsec/circuit_io.hpp"
#include "qmlsec/dataset.hpp"
#include "qmlsec/rng.hpp"
#include "qmlsec/sim.hpp"

#ifndef QMLSEC_CLI_PATH
#error "QMLSEC_CLI_PATH must point at the built binary"
#endif

using namespace qmlsec;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "qmlsec_test_cli";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  static int counter = 0;
  fs::path log = work_dir() / ("out_" + std::to_string(counter++) + ".txt");
  std::string cmd = std::string(QMLSEC_CLI_PATH) + " " + args + " > " +
                    log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream f(log);
    std::stringstream ss;
    ss << f.rdbuf();
    *output = ss.str();
  }
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// relative path -> file bytes, for whole-tree comparisons
std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  }
  return files;
}

int count_files_with_extension(const fs::path& root, const std::string& ext) {
  int n = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) n++;
  }
  return n;
}

}  // namespace

TEST_CASE("version flag reports and exits cleanly") {
  std::string out;
  CHECK(run_cli("--version", &out) == 0);
  CHECK(out.find("0.1.0") != std::string::npos);
}

TEST_CASE("an unknown command is a usage error") {
  std::string out;
  CHECK(run_cli("frobnicate", &out) == 2);
}

TEST_CASE("gradcheck passes from the command line") {
  std::string out;
  CHECK(run_cli("qnn gradcheck --seed 7", &out) == 0);
  CHECK(out.find("max relative error") != std::string::npos);
}

TEST_CASE("dataset generation is byte-identical on repeat") {
  fs::path dir = work_dir() / "gen_repeat";
  fs::remove_all(dir);
  std::string args =
      "dataset gen --per-class 3 --seed 1 --out " + dir.string();
  REQUIRE(run_cli(args) == 0);
  auto first = snapshot_tree(dir);
  CHECK(first.count("run_manifest.json") == 1);
  CHECK(first.count("manifest.csv") == 1);

  REQUIRE(run_cli(args + " --force") == 0);
  auto second = snapshot_tree(dir);
  CHECK(first == second);
}

TEST_CASE("existing outputs are refused without --force") {
  fs::path dir = work_dir() / "gen_refuse";
  fs::remove_all(dir);
  std::string args =
      "dataset gen --per-class 1 --seed 2 --out " + dir.string();
  REQUIRE(run_cli(args) == 0);
  std::string out;
  CHECK(run_cli(args, &out) == 1);
  CHECK(out.find("already exists") != std::string::npos);
  CHECK(run_cli(args + " --force") == 0);
}

TEST_CASE("split and recombine round trip the circuit file") {
  fs::path dir = work_dir() / "split";
  fs::remove_all(dir);
  fs::create_directories(dir);
  namespace ops = sim::ops;
  sim::Circuit c{3, {ops::h(0), ops::cnot(0, 1), ops::rx(2, 0.75),
                     ops::zz(1, 2, 1.25), ops::x(0), ops::crx(0, 2, 0.5)}};
  fs::path circuit_path = dir / "circuit.txt";
  sim::save_circuit(c, circuit_path.string());
  std::string original = slurp(circuit_path);

  fs::path frag_dir = dir / "fragments";
  REQUIRE(run_cli("sec split --circuit " + circuit_path.string() +
                  " -k 3 --out-dir " + frag_dir.string()) == 0);
  CHECK(count_files_with_extension(frag_dir, ".txt") == 3);

  fs::path back = dir / "recombined.txt";
  REQUIRE(run_cli("sec recombine --dir " + frag_dir.string() + " --out " +
                  back.string()) == 0);
  CHECK(slurp(back) == original);

  // a shuffled split carries its order in the fragment headers
  fs::path frag_shuffled = dir / "fragments_shuffled";
  REQUIRE(run_cli("sec split --circuit " + circuit_path.string() +
                  " -k 3 --shuffle --shuffle-seed 5 --out-dir " +
                  frag_shuffled.string()) == 0);
  fs::path back2 = dir / "recombined2.txt";
  REQUIRE(run_cli("sec recombine --dir " + frag_shuffled.string() + " --out " +
                  back2.string()) == 0);
  CHECK(slurp(back2) == original);
}

TEST_CASE("config files fill options and flags override them") {
  fs::path dir = work_dir() / "config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path out_a = dir / "a";
  fs::path out_b = dir / "b";
  fs::path cfg = dir / "cfg.json";
  {
    std::ofstream f(cfg);
    f << "{\"dataset\": {\"gen\": {\"per-class\": 2, \"seed\": 3, \"out\": \""
      << out_a.string() << "\"}}}\n";
  }
  REQUIRE(run_cli("--config " + cfg.string() + " dataset gen") == 0);
  CHECK(count_files_with_extension(out_a, ".pgm") == 12);

  REQUIRE(run_cli("--config " + cfg.string() +
                  " dataset gen --per-class 1 --out " + out_b.string()) == 0);
  CHECK(count_files_with_extension(out_b, ".pgm") == 6);
}

TEST_CASE("exact simulation prints the bell distribution") {
  fs::path dir = work_dir() / "simrun";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path circuit_path = dir / "bell.txt";
  namespace ops = sim::ops;
  sim::save_circuit({2, {ops::h(0), ops::cnot(0, 1)}}, circuit_path.string());
  std::string out;
  CHECK(run_cli("sim run --circuit " + circuit_path.string() + " --shots 0",
                &out) == 0);
  CHECK(out.find("00") != std::string::npos);
  CHECK(out.find("11") != std::string::npos);
  CHECK(out.find("0.5") != std::string::npos);
  CHECK(out.find("01 ") == std::string::npos);
}

TEST_CASE("signature extraction runs against a builtin device") {
  std::string out;
  CHECK(run_cli("sec puf --device noisy-a --shots 500 --seed 4", &out) == 0);
  CHECK(out.find("signature") != std::string::npos);
}

TEST_CASE("train then evaluate through the command line") {
  fs::path dir = work_dir() / "train";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // two well-separated blobs in four dimensions
  std::mt19937_64 rng(31);
  data::FeatureDataset set;
  set.features.resize(40, 4);
  set.labels.resize(40);
  for (int i = 0; i < 40; ++i) {
    int label = i % 2;
    set.labels[i] = label;
    for (int j = 0; j < 4; ++j) {
      double center = label == 0 ? 0.25 : 0.75;
      set.features(i, j) = center + 0.05 * (uniform_double(rng) - 0.5);
    }
  }
  fs::path csv = dir / "features.csv";
  data::save_feature_csv(set, csv.string());

  fs::path model = dir / "model.json";
  fs::path history = dir / "history.csv";
  REQUIRE(run_cli("qnn train --train " + csv.string() +
                  " --layers 1 --epochs 4 --seed 5 --out " + model.string() +
                  " --history " + history.string()) == 0);
  CHECK(fs::exists(model));
  CHECK(fs::exists(history));

  std::string out;
  CHECK(run_cli("qnn eval --model " + model.string() + " --data " +
                csv.string(), &out) == 0);
  CHECK(out.find("accuracy") != std::string::npos);
}
