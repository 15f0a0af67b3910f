// Release gate: every numbered criterion below prints one PASS/FAIL line.
// Exit status is the number of failures, so ctest can gate on it directly.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qmlsec/cae.hpp"
#include "qmlsec/circuit_io.hpp"
#include "qmlsec/dataset.hpp"
#include "qmlsec/data.hpp"
#include "qmlsec/noise.hpp"
#include "qmlsec/pipeline.hpp"
#include "qmlsec/qnn.hpp"
#include "qmlsec/rng.hpp"
#include "qmlsec/security.hpp"
#include "qmlsec/sim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace qmlsec;
namespace fs = std::filesystem;
namespace ops = sim::ops;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return buffer;
}

noise::DeviceProfile bare_line_device(int n, double multiplier) {
  noise::DeviceProfile d;
  d.device_id = "line";
  d.n_qubits = n;
  for (int q = 0; q + 1 < n; ++q) d.coupling_map.push_back({q, q + 1});
  d.per_qubit.resize(n);
  d.crosstalk_multiplier = multiplier;
  return d;
}

// ---- 1. statevector vs dense matrix-chain oracle ---------------------------

Outcome criterion_simulator_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = uniform_int(rng, 1, 3);
    int gates = uniform_int(rng, 1, 20);
    sim::Circuit c = testutil::random_circuit(rng, n, gates);
    Eigen::VectorXcd expected = oracle::circuit_state(c);
    Eigen::VectorXcd got = sim::run_circuit(c).amplitudes;
    worst = std::max(worst, testutil::max_amplitude_diff(got, expected));
  }
  return {worst < 1e-10,
          fmt("max amplitude error %.3g over 200 circuits", worst)};
}

// ---- 2. parameter-shift vs finite differences ------------------------------

double gradient_rel_error(const qnn::Gradient& ps, const qnn::Gradient& fd) {
  double gap = 0.0, scale = 0.0;
  auto update = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.size() > 0) gap = std::max(gap, (a - b).cwiseAbs().maxCoeff());
    if (a.size() > 0) scale = std::max(scale, a.cwiseAbs().maxCoeff());
  };
  update(ps.theta, fd.theta);
  update(ps.head_weights, fd.head_weights);
  update(ps.head_biases, fd.head_biases);
  return gap / std::max(scale, 1e-8);
}

Outcome criterion_gradient_fidelity() {
  struct Pairing {
    qnn::HeadKind head;
    qnn::LossKind loss;
    int classes;
  };
  const std::vector<Pairing> pairings = {
      {qnn::HeadKind::Parity, qnn::LossKind::Bce, 2},
      {qnn::HeadKind::Parity, qnn::LossKind::Sce, 2},
      {qnn::HeadKind::SingleZ, qnn::LossKind::Mse, 2},
      {qnn::HeadKind::Dense, qnn::LossKind::Sce, 3},
      {qnn::HeadKind::Dense, qnn::LossKind::Bce, 2},
  };
  const std::vector<std::string> families = {"crx-ring", "ry-cnot-line"};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Pairing& p = pairings[i % pairings.size()];
    qnn::AnsatzSpec spec{families[(i / pairings.size()) % families.size()], 4, 2};
    qnn::QnnModel model =
        qnn::init_model(spec, p.head, p.classes, derive_seed(201, i));
    std::mt19937_64 rng(derive_seed(202, i));
    Eigen::MatrixXd features(3, 4);
    std::vector<int> labels(3);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c)
        features(r, c) = uniform_range(rng, 0.0, 2.0 * M_PI);
      labels[r] = uniform_int(rng, 0, p.classes - 1);
    }
    qnn::Gradient ps =
        qnn::gradient_parameter_shift(model, features, labels, p.loss);
    qnn::Gradient fd =
        qnn::gradient_finite_difference(model, features, labels, p.loss);
    worst = std::max(worst, gradient_rel_error(ps, fd));
  }
  return {worst < 1e-5, fmt("max relative error %.3g over 50 models", worst)};
}

// ---- 3 & 4. paper pipeline on the synthetic latent tasks -------------------

struct PipelineStats {
  std::vector<double> train3, val3, train6, val6;
  double artifact_seconds = 0.0;
};

PipelineStats run_pipeline_seeds() {
  PipelineStats stats;
  auto start = std::chrono::steady_clock::now();
  pipeline::PipelineConfig config;
  pipeline::LatentArtifacts artifacts = pipeline::build_latent_artifacts(config);
  pipeline::LatentTask task3 = pipeline::make_task(
      artifacts, config.three_classes, config.samples_per_task,
      config.train_fraction);
  pipeline::LatentTask task6 = pipeline::make_task(
      artifacts, {0, 1, 2, 3, 4, 5}, config.samples_per_task,
      config.train_fraction);
  stats.artifact_seconds = seconds_since(start);
  for (int seed = 1; seed <= 10; ++seed) {
    qnn::TrainConfig train = config.qnn_train;
    train.seed = seed;
    pipeline::TaskRun run3 = pipeline::train_task(task3, config.qnn_layers, train);
    stats.train3.push_back(run3.train_accuracy);
    stats.val3.push_back(run3.val_accuracy);
    pipeline::TaskRun run6 = pipeline::train_task(task6, config.qnn_layers, train);
    stats.train6.push_back(run6.train_accuracy);
    stats.val6.push_back(run6.val_accuracy);
  }
  return stats;
}

double mean(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return xs.empty() ? 0.0 : total / static_cast<double>(xs.size());
}

Outcome criterion_three_class(const PipelineStats& stats) {
  int good = 0;
  for (size_t i = 0; i < stats.train3.size(); ++i) {
    if (stats.train3[i] >= 0.60 && stats.val3[i] >= 0.55) good++;
  }
  return {good >= 8,
          fmt("%d/10 seeds reached train >= 0.60 and val >= 0.55 "
              "(mean train %.3f, mean val %.3f)",
              good, mean(stats.train3), mean(stats.val3))};
}

Outcome criterion_six_class_ordering(const PipelineStats& stats) {
  double v3 = mean(stats.val3);
  double v6 = mean(stats.val6);
  bool ordered = v6 <= v3;
  bool above_chance = v3 >= 2.0 / 3.0 && v6 >= 1.0 / 3.0;
  return {ordered && above_chance,
          fmt("mean val accuracy: 3-class %.3f (chance 0.333), "
              "6-class %.3f (chance 0.167)",
              v3, v6)};
}

// ---- 5. autoencoder backprop vs central differences ------------------------

Outcome criterion_cae_gradient() {
  cae::CaeConfig config{8, 4, 8, 3};
  cae::CaeModel model = cae::cae_init(config, 15);
  std::mt19937_64 rng(501);
  std::vector<cae::Image> batch;
  for (int i = 0; i < 4; ++i) {
    cae::Image img(8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) img(r, c) = uniform_double(rng);
    batch.push_back(img);
  }
  Eigen::VectorXd analytic = cae::cae_gradient(model, batch);
  Eigen::VectorXd packed = cae::cae_pack(model);
  Eigen::VectorXd numeric(packed.size());
  const double h = 1e-6;
  cae::CaeModel probe = model;
  for (Eigen::Index i = 0; i < packed.size(); ++i) {
    Eigen::VectorXd shifted = packed;
    shifted[i] = packed[i] + h;
    cae::cae_unpack(shifted, probe);
    double up = cae::cae_batch_loss(probe, batch);
    shifted[i] = packed[i] - h;
    cae::cae_unpack(shifted, probe);
    double down = cae::cae_batch_loss(probe, batch);
    numeric[i] = (up - down) / (2.0 * h);
  }
  double gap = (analytic - numeric).cwiseAbs().maxCoeff();
  double rel = gap / std::max(analytic.cwiseAbs().maxCoeff(), 1e-8);
  return {rel < 1e-4,
          fmt("max relative error %.3g over %lld parameters", rel,
              static_cast<long long>(packed.size()))};
}

// ---- 6. fingerprint separation across synthesized devices ------------------

Outcome criterion_qupuf_separation() {
  const int n_devices = 20, n_extractions = 10, n_qubits = 5;
  std::vector<std::vector<security::Signature>> sigs(n_devices);
  for (int d = 0; d < n_devices; ++d) {
    noise::DeviceProfile device = noise::random_device_profile(
        n_qubits, derive_seed(600, d), "dev-" + std::to_string(d));
    for (int e = 0; e < n_extractions; ++e) {
      sigs[d].push_back(security::qupuf_signature(
          device, "hadamard", 10000, {}, derive_seed(601, d * 100 + e)));
    }
  }
  double intra_sum = 0.0, inter_sum = 0.0;
  std::int64_t intra_n = 0, inter_n = 0;
  for (int d = 0; d < n_devices; ++d) {
    for (int a = 0; a < n_extractions; ++a) {
      for (int b = a + 1; b < n_extractions; ++b) {
        intra_sum += security::hamming_fraction(sigs[d][a], sigs[d][b]);
        intra_n++;
      }
    }
    for (int d2 = d + 1; d2 < n_devices; ++d2) {
      for (int a = 0; a < n_extractions; ++a) {
        for (int b = 0; b < n_extractions; ++b) {
          inter_sum += security::hamming_fraction(sigs[d][a], sigs[d2][b]);
          inter_n++;
        }
      }
    }
  }
  double intra = intra_sum / static_cast<double>(intra_n);
  double inter = inter_sum / static_cast<double>(inter_n);
  return {inter > 5.0 * intra,
          fmt("mean inter-device HD %.4f vs intra %.4f", inter, intra)};
}

// ---- 7. split compilation soundness ----------------------------------------

Outcome criterion_split_soundness() {
  std::mt19937_64 rng(700);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 152; ++trial) {
    int n = uniform_int(rng, 2, 4);
    int gates = uniform_int(rng, 1, 16);
    sim::Circuit c = testutil::random_circuit(rng, n, gates);
    Eigen::VectorXcd expected = sim::run_circuit(c).amplitudes;
    auto policy = trial % 2 == 0 ? security::SplitPolicy::ByGateCount
                                 : security::SplitPolicy::ByLayer;
    std::vector<int> ks = {1, 2, 3, gates};
    for (int k : ks) {
      if (k < 1 || k > gates) continue;
      auto fragments = security::split_circuit(c, k, policy);
      security::shuffle_fragments(fragments, derive_seed(701, trial * 8 + k));
      Eigen::VectorXcd got =
          sim::run_circuit(security::recombine_circuit(fragments)).amplitudes;
      worst = std::max(worst, testutil::max_amplitude_diff(got, expected));
      checked++;
    }
  }
  return {worst < 1e-12,
          fmt("max amplitude error %.3g over %d recombinations", worst, checked)};
}

// ---- 8. obfuscation scoring, restore, heuristic agreement ------------------

Outcome criterion_obfuscation() {
  std::mt19937_64 rng(800);
  noise::DeviceProfile device = bare_line_device(4, 3.0);
  int positive_tvd = 0, heuristic_hits = 0, restore_ok = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    sim::Circuit c = testutil::random_circuit(rng, 4, uniform_int(rng, 8, 16));
    auto exhaustive = security::rank_insertion_points(
        c, device, security::DummyKind::Swap, security::RankMode::Exhaustive);
    if (exhaustive[0].score > 0.0) positive_tvd++;

    std::vector<security::DummySelection> picks{
        {exhaustive[0].position, exhaustive[0].edge, security::DummyKind::Swap}};
    auto [obfuscated, key] = security::insert_dummy_gates(c, picks);
    sim::Circuit restored = security::restore_circuit(obfuscated, key);
    double tvd = sim::total_variation_distance(
        sim::probabilities(sim::run_circuit(restored)),
        sim::probabilities(sim::run_circuit(c)));
    if (tvd < 1e-12) restore_ok++;

    auto heuristic = security::rank_insertion_points(
        c, device, security::DummyKind::Swap, security::RankMode::Heuristic);
    size_t cutoff = (exhaustive.size() * 3 + 9) / 10;  // ceil of the top 30%
    for (size_t i = 0; i < exhaustive.size(); ++i) {
      if (exhaustive[i].position == heuristic[0].position &&
          exhaustive[i].edge == heuristic[0].edge) {
        if (i < cutoff) heuristic_hits++;
        break;
      }
    }
  }
  bool pass = positive_tvd >= 95 && restore_ok == trials && heuristic_hits >= 70;
  return {pass,
          fmt("positive TVD %d/100, restores exact %d/100, heuristic in "
              "top 30%% %d/100",
              positive_tvd, restore_ok, heuristic_hits)};
}

// ---- 9. buffer-qubit reliability -------------------------------------------

double arm_z_score(double pa, double pb, double shots) {
  double var = pa * (1 - pa) / shots + pb * (1 - pb) / shots;
  if (var <= 0.0) return 0.0;
  return (pb - pa) / std::sqrt(var);
}

Outcome criterion_buffer_reliability() {
  const std::int64_t shots = 10000;
  sim::Circuit victim{4, {ops::h(0), ops::cnot(0, 1)}};
  auto noisy = [](double multiplier) {
    noise::DeviceProfile d = bare_line_device(4, multiplier);
    for (auto& q : d.per_qubit) {
      q.gate_error_1q = 0.01;
      q.gate_error_2q = 0.04;
    }
    return d;
  };

  noise::DeviceProfile boosted = noisy(3.0);
  double adjacent = security::simulate_fault_injection(
      victim, {2}, boosted, security::PlacementArm::Adjacent, shots, 901);
  double buffered = security::simulate_fault_injection(
      victim, {3}, boosted, security::PlacementArm::Buffered, shots, 902);
  double z_boosted = arm_z_score(adjacent, buffered, shots);

  noise::DeviceProfile flat = noisy(1.0);
  double adjacent1 = security::simulate_fault_injection(
      victim, {2}, flat, security::PlacementArm::Adjacent, shots, 903);
  double buffered1 = security::simulate_fault_injection(
      victim, {3}, flat, security::PlacementArm::Buffered, shots, 904);
  double z_flat = arm_z_score(adjacent1, buffered1, shots);

  bool pass = z_boosted > 3.0 && std::abs(z_flat) <= 3.0;
  return {pass,
          fmt("x3.0: buffered %.4f vs adjacent %.4f (z=%.1f); "
              "x1.0: %.4f vs %.4f (z=%.1f)",
              buffered, adjacent, z_boosted, buffered1, adjacent1, z_flat)};
}

// ---- 10. repeat runs produce byte-identical artifacts ----------------------

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  }
  return files;
}

Outcome criterion_determinism() {
  fs::path root = fs::temp_directory_path() / "qmlsec_acceptance_repeat";
  fs::remove_all(root);
  fs::create_directories(root);

  auto produce = [&](const fs::path& dir) {
    fs::create_directories(dir);
    data::LabeledImageSet set = data::generate_synthetic_defects(3, 42);
    data::save_image_set(set, (dir / "images").string());

    noise::DeviceProfile device = noise::random_device_profile(4, 77, "dev");
    security::Signature sig =
        security::qupuf_signature(device, "hadamard", 2000, {}, 5);
    security::save_signature_csv(sig, (dir / "signature.csv").string());

    std::mt19937_64 rng(31);
    data::FeatureDataset feats;
    feats.features.resize(12, 3);
    feats.labels.resize(12);
    for (int i = 0; i < 12; ++i) {
      feats.labels[i] = i % 2;
      for (int j = 0; j < 3; ++j) feats.features(i, j) = uniform_double(rng);
    }
    qnn::QnnModel model =
        qnn::init_model(qnn::AnsatzSpec{"crx-ring", 3, 1},
                        qnn::HeadKind::Dense, 2, 9);
    qnn::TrainConfig train_config;
    train_config.epochs = 2;
    train_config.seed = 9;
    qnn::TrainHistory history = qnn::train_qnn(model, feats, feats, train_config);
    qnn::save_model(model, (dir / "model.json").string());
    qnn::save_history_csv(history, (dir / "history.csv").string());

    cae::CaeModel cae_model = cae::cae_init({8, 4, 8, 3}, 3);
    std::vector<cae::Image> images;
    for (int i = 0; i < 4; ++i) {
      cae::Image img(8, 8);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) img(r, c) = uniform_double(rng);
      images.push_back(img);
    }
    cae::CaeTrainConfig cae_train_config;
    cae_train_config.epochs = 2;
    cae_train_config.batch_size = 2;
    cae_train_config.seed = 4;
    cae::cae_train(cae_model, images, cae_train_config);
    cae::save_cae(cae_model, (dir / "cae.json").string());

    std::mt19937_64 crng(55);
    sim::Circuit circuit = testutil::random_circuit(crng, 4, 10);
    noise::DeviceProfile line = bare_line_device(4, 3.0);
    auto ranked = security::rank_insertion_points(
        circuit, line, security::DummyKind::Swap, security::RankMode::Exhaustive);
    std::vector<security::DummySelection> picks{
        {ranked[0].position, ranked[0].edge, security::DummyKind::Swap}};
    auto [obfuscated, key] = security::insert_dummy_gates(circuit, picks);
    sim::save_circuit(obfuscated, (dir / "obfuscated.txt").string());
    security::save_key(key, (dir / "key.json").string());

    auto fragments =
        security::split_circuit(circuit, 3, security::SplitPolicy::ByGateCount);
    security::shuffle_fragments(fragments, 6);
    for (const auto& fragment : fragments) {
      security::save_fragment(
          fragment, (dir / fmt("part_%02d.txt", fragment.index)).string());
    }
  };

  produce(root / "first");
  produce(root / "second");
  auto first = snapshot_tree(root / "first");
  auto second = snapshot_tree(root / "second");
  bool pass = !first.empty() && first == second;
  fs::remove_all(root);
  return {pass, fmt("%zu artifacts byte-compared across repeated runs",
                    first.size())};
}

struct Criterion {
  int id;
  const char* label;
  double budget_seconds;  // <= 0 means no budget
  Outcome outcome;
  double seconds = 0.0;
};

void report(Criterion& criterion) {
  bool in_budget = criterion.budget_seconds <= 0.0 ||
                   criterion.seconds < criterion.budget_seconds;
  bool pass = criterion.outcome.pass && in_budget;
  criterion.outcome.pass = pass;
  std::printf("[%s] criterion %d: %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL",
              criterion.id, criterion.label, criterion.outcome.detail.c_str(),
              criterion.seconds,
              in_budget ? "" : ", over budget");
  std::fflush(stdout);
}

}  // namespace

int main() {
  std::vector<Criterion> results;

  auto timed = [&](int id, const char* label, double budget, auto&& fn) {
    auto start = std::chrono::steady_clock::now();
    Outcome outcome = fn();
    Criterion criterion{id, label, budget, outcome, seconds_since(start)};
    report(criterion);
    results.push_back(criterion);
  };

  timed(1, "simulator matches the dense oracle", 10.0,
        criterion_simulator_oracle);
  timed(2, "parameter-shift gradients match finite differences", 60.0,
        criterion_gradient_fidelity);

  // criteria 3 and 4 share one pipeline run; the shared artifacts and the
  // ten 3-class seeds are charged to criterion 3's budget
  auto pipeline_start = std::chrono::steady_clock::now();
  PipelineStats stats = run_pipeline_seeds();
  double pipeline_seconds = seconds_since(pipeline_start);
  {
    Criterion c3{3, "3-class latent task reaches the qualitative target", 600.0,
                 criterion_three_class(stats), pipeline_seconds};
    report(c3);
    results.push_back(c3);
    Criterion c4{4, "6-class accuracy orders below 3-class", 0.0,
                 criterion_six_class_ordering(stats), 0.0};
    report(c4);
    results.push_back(c4);
  }

  timed(5, "autoencoder backprop matches central differences", 30.0,
        criterion_cae_gradient);
  timed(6, "device fingerprints separate", 120.0, criterion_qupuf_separation);
  timed(7, "split compilation recombines exactly", 120.0,
        criterion_split_soundness);
  timed(8, "dummy-gate scoring, restore, and heuristic agree", 300.0,
        criterion_obfuscation);
  timed(9, "buffer qubits beat adjacent placement", 120.0,
        criterion_buffer_reliability);
  timed(10, "repeat runs are byte-identical", 0.0, criterion_determinism);

  int failures = 0;
  for (const auto& criterion : results)
    if (!criterion.outcome.pass) failures++;
  if (failures == 0) {
    std::printf("all %zu criteria passed\n", results.size());
  } else {
    std::printf("%d criteria failed\n", failures);
  }
  return failures;
}
