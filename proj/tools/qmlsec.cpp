// qmlsec: command-line front end for the workbench library.
//
// Subcommands cover dataset synthesis/ingestion, CAE and QNN training,
// ideal/noisy circuit simulation, and the security toolkit (fingerprints,
// split compilation, obfuscation, buffered allocation, fault injection).
// Every command is seeded and writes a run manifest next to its artifacts,
// so repeated runs with identical inputs produce byte-identical outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmlsec/cae.hpp"
#include "qmlsec/circuit_io.hpp"
#include "qmlsec/data.hpp"
#include "qmlsec/dataset.hpp"
#include "qmlsec/noise.hpp"
#include "qmlsec/pipeline.hpp"
#include "qmlsec/qnn.hpp"
#include "qmlsec/rng.hpp"
#include "qmlsec/security.hpp"
#include "qmlsec/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qmlsec;

namespace {

constexpr const char* kVersion = "qmlsec 0.1.0";

// JSON adapter for CLI11's config machinery. Top-level keys address global
// options, nested objects address subcommands ({"qnn": {"train": {...}}}).
// Command-line flags always take precedence over config values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    input >> j;
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, "", items);
    return items;
  }

 private:
  static void flatten(const json& j, std::vector<std::string> parents,
                      const std::string& name,
                      std::vector<CLI::ConfigItem>& out) {
    if (j.is_object()) {
      if (!name.empty()) parents.push_back(name);
      for (auto it = j.begin(); it != j.end(); ++it) {
        flatten(it.value(), parents, it.key(), out);
      }
      return;
    }
    if (name.empty()) {
      throw CLI::ConversionError("config root must be a JSON object");
    }
    CLI::ConfigItem item;
    item.parents = std::move(parents);
    item.name = name;
    if (j.is_array()) {
      for (const auto& elem : j) {
        item.inputs.push_back(elem.is_string() ? elem.get<std::string>()
                                               : elem.dump());
      }
    } else if (j.is_string()) {
      item.inputs.push_back(j.get<std::string>());
    } else {
      item.inputs.push_back(j.dump());  // numbers, booleans, null
    }
    out.push_back(std::move(item));
  }
};

void require_fresh(const std::string& path, bool force) {
  if (!force && fs::exists(path)) {
    throw std::runtime_error("output already exists: " + path +
                             " (pass --force to overwrite)");
  }
}

void require_fresh_dir(const std::string& dir, bool force) {
  if (!force && fs::exists(dir) && !fs::is_empty(dir)) {
    throw std::runtime_error("output directory already exists and is not empty: " +
                             dir +
                             " (pass --force to overwrite)");
  }
}

// model.json -> model.manifest.json; extensionless paths get the suffix.
std::string manifest_path_for(const std::string& artifact) {
  fs::path p(artifact);
  p.replace_extension(".manifest.json");
  return p.string();
}

void write_manifest(const std::string& path, const std::string& command,
                    const json& config, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& artifacts) {
  json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config;
  m["seeds"] = seeds;
  m["artifacts"] = artifacts;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << m.dump(2) << "\n";
}

// Accepts a builtin profile name or a path to a profile JSON file.
noise::DeviceProfile device_from_arg(const std::string& arg) {
  if (fs::exists(arg)) return noise::load_device(arg);
  return noise::builtin_profile(arg);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::runtime_error("bad integer list: " + text);
    values.push_back(v);
  }
  if (values.empty()) throw std::runtime_error("empty integer list: " + text);
  return values;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::runtime_error("bad number list: " + text);
    values.push_back(v);
  }
  return values;
}

std::string bitstring(std::uint64_t index, int n_qubits) {
  std::string s(n_qubits, '0');
  for (int q = 0; q < n_qubits; ++q) {
    if ((index >> q) & 1ull) s[n_qubits - 1 - q] = '1';  // qubit 0 rightmost
  }
  return s;
}

// ---------------------------------------------------------------- dataset --

struct DatasetGenOpts {
  int per_class = 700;
  std::uint64_t seed = 11;
  std::string out;
  bool force = false;
};

void run_dataset_gen(const DatasetGenOpts& o) {
  require_fresh_dir(o.out, o.force);
  data::LabeledImageSet set = data::generate_synthetic_defects(o.per_class, o.seed);
  data::save_image_set(set, o.out);
  json cfg{{"per_class", o.per_class}, {"seed", o.seed}, {"out", o.out}};
  write_manifest((fs::path(o.out) / "run_manifest.json").string(), "dataset gen",
                 cfg, {o.seed}, {(fs::path(o.out) / "manifest.csv").string()});
  std::cout << "wrote " << set.size() << " images to " << o.out << "\n";
}

struct DatasetIngestOpts {
  std::string in, out;
  bool force = false;
};

void run_dataset_ingest(const DatasetIngestOpts& o) {
  require_fresh_dir(o.out, o.force);
  data::LabeledImageSet set = data::load_image_directory(o.in);
  data::save_image_set(set, o.out);
  json cfg{{"in", o.in}, {"out", o.out}};
  write_manifest((fs::path(o.out) / "run_manifest.json").string(),
                 "dataset ingest", cfg, {},
                 {(fs::path(o.out) / "manifest.csv").string()});
  std::cout << "ingested " << set.size() << " images into " << o.out << "\n";
}

struct DatasetSplitOpts {
  std::string manifest;
  double fraction = 0.7;
  std::uint64_t seed = 0;
  std::string out_train, out_val;
  bool force = false;
};

void run_dataset_split(const DatasetSplitOpts& o) {
  require_fresh_dir(o.out_train, o.force);
  require_fresh_dir(o.out_val, o.force);
  data::LabeledImageSet set = data::load_manifest(o.manifest);
  data::LabeledImageSet train, val;
  data::split_dataset(set, o.fraction, o.seed, train, val);
  data::save_image_set(train, o.out_train);
  data::save_image_set(val, o.out_val);
  json cfg{{"manifest", o.manifest}, {"fraction", o.fraction},
           {"seed", o.seed},        {"out_train", o.out_train},
           {"out_val", o.out_val}};
  write_manifest((fs::path(o.out_train) / "run_manifest.json").string(),
                 "dataset split", cfg, {o.seed},
                 {(fs::path(o.out_train) / "manifest.csv").string(),
                  (fs::path(o.out_val) / "manifest.csv").string()});
  std::cout << "split " << set.size() << " images into " << train.size()
            << " train / " << val.size() << " val\n";
}

void register_dataset(CLI::App& app) {
  CLI::App* ds = app.add_subcommand("dataset", "synthesize, ingest, and split image sets");
  ds->require_subcommand(1);

  auto gen = std::make_shared<DatasetGenOpts>();
  CLI::App* g = ds->add_subcommand("gen", "generate the synthetic defect corpus");
  g->add_option("--per-class", gen->per_class, "images per defect class")
      ->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen->seed, "generator seed")->capture_default_str();
  g->add_option("--out", gen->out, "output directory")->required();
  g->add_flag("--force", gen->force, "overwrite existing outputs");
  g->callback([gen] { run_dataset_gen(*gen); });

  auto ing = std::make_shared<DatasetIngestOpts>();
  CLI::App* i = ds->add_subcommand("ingest", "import PGM images from class-named subdirectories");
  i->add_option("--in", ing->in, "source directory")->required();
  i->add_option("--out", ing->out, "output directory")->required();
  i->add_flag("--force", ing->force, "overwrite existing outputs");
  i->callback([ing] { run_dataset_ingest(*ing); });

  auto sp = std::make_shared<DatasetSplitOpts>();
  CLI::App* s = ds->add_subcommand("split", "stratified train/validation split of a manifest");
  s->add_option("--manifest", sp->manifest, "manifest.csv of the source set")->required();
  s->add_option("--fraction", sp->fraction, "training fraction")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  s->add_option("--seed", sp->seed, "shuffle seed")->capture_default_str();
  s->add_option("--out-train", sp->out_train, "training output directory")->required();
  s->add_option("--out-val", sp->out_val, "validation output directory")->required();
  s->add_flag("--force", sp->force, "overwrite existing outputs");
  s->callback([sp] { run_dataset_split(*sp); });
}

// -------------------------------------------------------------------- cae --

struct CaeTrainOpts {
  std::string images;
  int size = 32, c1 = 8, c2 = 16, latent = 4;
  double lr = 0.001;
  int epochs = 25, batch = 50;
  std::uint64_t seed = 0;
  std::string out, history;
  bool force = false;
};

void run_cae_train(const CaeTrainOpts& o) {
  require_fresh(o.out, o.force);
  if (!o.history.empty()) require_fresh(o.history, o.force);
  data::LabeledImageSet set = data::load_manifest(o.images);
  cae::CaeConfig config{o.size, o.c1, o.c2, o.latent};
  cae::CaeModel model = cae::cae_init(config, o.seed);
  cae::CaeTrainConfig tc{o.lr, o.epochs, o.batch, o.seed};
  std::vector<double> history = cae::cae_train(model, set.images, tc);
  cae::save_cae(model, o.out);
  std::vector<std::string> artifacts{o.out};
  if (!o.history.empty()) {
    std::ofstream h(o.history, std::ios::binary);
    if (!h) throw std::runtime_error("cannot write " + o.history);
    h << "epoch,mse\n";
    for (size_t e = 0; e < history.size(); ++e) {
      h << (e + 1) << "," << sim::format_double(history[e]) << "\n";
    }
    artifacts.push_back(o.history);
  }
  json cfg{{"images", o.images},   {"input_size", o.size}, {"c1", o.c1},
           {"c2", o.c2},           {"latent_dim", o.latent},
           {"learning_rate", o.lr}, {"epochs", o.epochs},
           {"batch_size", o.batch}, {"seed", o.seed},      {"out", o.out}};
  write_manifest(manifest_path_for(o.out), "cae train", cfg, {o.seed}, artifacts);
  std::cout << "trained autoencoder on " << set.size() << " images, final mse "
            << sim::format_double(history.empty() ? 0.0 : history.back())
            << ", wrote " << o.out << "\n";
}

struct CaeEncodeOpts {
  std::string model, images, out;
  bool force = false;
};

void run_cae_encode(const CaeEncodeOpts& o) {
  require_fresh(o.out, o.force);
  cae::CaeModel model = cae::load_cae(o.model);
  data::LabeledImageSet set = data::load_manifest(o.images);
  data::FeatureDataset latent = cae::cae_encode_dataset(model, set);
  data::save_feature_csv(latent, o.out);
  json cfg{{"model", o.model}, {"images", o.images}, {"out", o.out}};
  write_manifest(manifest_path_for(o.out), "cae encode", cfg, {}, {o.out});
  std::cout << "encoded " << latent.size() << " samples to "
            << latent.feature_dim() << "-dim features in " << o.out << "\n";
}

void register_cae(CLI::App& app) {
  CLI::App* cae_cmd = app.add_subcommand("cae", "convolutional autoencoder training and encoding");
  cae_cmd->require_subcommand(1);

  auto tr = std::make_shared<CaeTrainOpts>();
  CLI::App* t = cae_cmd->add_subcommand("train", "train the autoencoder on an image manifest");
  t->add_option("--images", tr->images, "manifest.csv of training images")->required();
  t->add_option("--size", tr->size, "input image size")->capture_default_str();
  t->add_option("--c1", tr->c1, "first conv channel count")->capture_default_str();
  t->add_option("--c2", tr->c2, "second conv channel count")->capture_default_str();
  t->add_option("--latent", tr->latent, "bottleneck width")->capture_default_str();
  t->add_option("--lr", tr->lr, "Adam learning rate")->capture_default_str();
  t->add_option("--epochs", tr->epochs, "training epochs")->capture_default_str();
  t->add_option("--batch", tr->batch, "mini-batch size")->capture_default_str();
  t->add_option("--seed", tr->seed, "init and shuffle seed")->capture_default_str();
  t->add_option("--out", tr->out, "model JSON output path")->required();
  t->add_option("--history", tr->history, "per-epoch loss CSV output path");
  t->add_flag("--force", tr->force, "overwrite existing outputs");
  t->callback([tr] { run_cae_train(*tr); });

  auto en = std::make_shared<CaeEncodeOpts>();
  CLI::App* e = cae_cmd->add_subcommand("encode", "encode images to latent feature CSV");
  e->add_option("--model", en->model, "trained model JSON")->required();
  e->add_option("--images", en->images, "manifest.csv of images to encode")->required();
  e->add_option("--out", en->out, "feature CSV output path")->required();
  e->add_flag("--force", en->force, "overwrite existing outputs");
  e->callback([en] { run_cae_encode(*en); });
}

// -------------------------------------------------------------------- qnn --

struct QnnTrainOpts {
  std::string train_csv, val_csv;
  double split_fraction = 0.0;  // 0 disables the implicit split
  std::uint64_t split_seed = 0;
  std::string family = "crx-ring";
  int layers = 2;
  std::string head = "dense";
  int classes = 0;  // 0: infer from labels
  std::string loss = "sce", optimizer = "adagrad";
  double lr = 0.5;
  int epochs = 10, batch = 32;
  std::uint64_t seed = 0;
  std::string out, history;
  bool force = false;
};

void run_qnn_train(const QnnTrainOpts& o) {
  require_fresh(o.out, o.force);
  if (!o.history.empty()) require_fresh(o.history, o.force);
  data::FeatureDataset train = data::load_feature_csv(o.train_csv);
  data::FeatureDataset val;
  if (!o.val_csv.empty()) {
    val = data::load_feature_csv(o.val_csv);
  } else if (o.split_fraction > 0.0) {
    data::FeatureDataset whole = std::move(train);
    data::split_features(whole, o.split_fraction, o.split_seed, train, val);
  }
  int n_classes = o.classes > 0 ? o.classes : data::class_count(train.labels);
  qnn::AnsatzSpec spec{o.family, train.feature_dim(), o.layers};
  qnn::QnnModel model =
      qnn::init_model(spec, qnn::head_kind_from_name(o.head), n_classes, o.seed);
  qnn::TrainConfig tc;
  tc.loss = qnn::loss_kind_from_name(o.loss);
  tc.optimizer = qnn::optimizer_kind_from_name(o.optimizer);
  tc.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  qnn::TrainHistory history = qnn::train_qnn(model, train, val, tc);
  qnn::save_model(model, o.out);
  std::vector<std::string> artifacts{o.out};
  if (!o.history.empty()) {
    qnn::save_history_csv(history, o.history);
    artifacts.push_back(o.history);
  }
  json cfg{{"train", o.train_csv}, {"val", o.val_csv},
           {"family", o.family},   {"layers", o.layers},
           {"head", o.head},       {"classes", n_classes},
           {"loss", o.loss},       {"optimizer", o.optimizer},
           {"learning_rate", o.lr},
           {"epochs", o.epochs},   {"batch_size", o.batch},
           {"seed", o.seed},       {"out", o.out}};
  write_manifest(manifest_path_for(o.out), "qnn train", cfg, {o.seed}, artifacts);
  const qnn::EpochStats& last = history.back();
  std::cout << "trained " << o.family << " model (" << model.theta.size()
            << " circuit parameters), final train acc "
            << sim::format_double(last.train_acc);
  if (val.size() > 0) std::cout << ", val acc " << sim::format_double(last.val_acc);
  std::cout << ", wrote " << o.out << "\n";
}

struct QnnEvalOpts {
  std::string model, data_csv, out;
  bool force = false;
};

void run_qnn_eval(const QnnEvalOpts& o) {
  qnn::QnnModel model = qnn::load_model(o.model);
  data::FeatureDataset dataset = data::load_feature_csv(o.data_csv);
  qnn::EvalResult result = qnn::evaluate_qnn(model, dataset);
  std::cout << "accuracy " << sim::format_double(result.accuracy) << " over "
            << dataset.size() << " samples\n";
  std::cout << "confusion (rows true, cols predicted):\n";
  for (int r = 0; r < result.confusion.rows(); ++r) {
    for (int c = 0; c < result.confusion.cols(); ++c) {
      std::cout << (c ? " " : "") << result.confusion(r, c);
    }
    std::cout << "\n";
  }
  if (!o.out.empty()) {
    require_fresh(o.out, o.force);
    json report;
    report["accuracy"] = result.accuracy;
    report["confusion"] = json::array();
    for (int r = 0; r < result.confusion.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < result.confusion.cols(); ++c) {
        row.push_back(result.confusion(r, c));
      }
      report["confusion"].push_back(row);
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + o.out);
    f << report.dump(2) << "\n";
    json cfg{{"model", o.model}, {"data", o.data_csv}, {"out", o.out}};
    write_manifest(manifest_path_for(o.out), "qnn eval", cfg, {}, {o.out});
  }
}

struct QnnGradcheckOpts {
  std::uint64_t seed = 7;
  int qubits = 4, layers = 2, samples = 8;
  std::string family = "crx-ring", head = "dense", loss = "sce";
  int classes = 3;
  double tolerance = 1e-5;
};

// Compares the parameter-shift gradient against central differences on a
// random model and batch. The reported figure is the largest component
// mismatch over the gradient's own scale.
int run_qnn_gradcheck(const QnnGradcheckOpts& o) {
  qnn::AnsatzSpec spec{o.family, o.qubits, o.layers};
  qnn::HeadKind head = qnn::head_kind_from_name(o.head);
  int n_classes = head == qnn::HeadKind::Dense ? o.classes : 2;
  qnn::QnnModel model = qnn::init_model(spec, head, n_classes, o.seed);
  std::mt19937_64 rng(derive_seed(o.seed, 1));
  Eigen::MatrixXd features(o.samples, o.qubits);
  std::vector<int> labels(o.samples);
  for (int i = 0; i < o.samples; ++i) {
    for (int q = 0; q < o.qubits; ++q) {
      features(i, q) = uniform_range(rng, 0.0, 2.0 * M_PI);
    }
    labels[i] = static_cast<int>(uniform_int(rng, 0, n_classes - 1));
  }
  qnn::LossKind loss = qnn::loss_kind_from_name(o.loss);
  qnn::Gradient ps = qnn::gradient_parameter_shift(model, features, labels, loss);
  qnn::Gradient fd = qnn::gradient_finite_difference(model, features, labels, loss);
  double max_diff = (ps.theta - fd.theta).cwiseAbs().maxCoeff();
  double scale = fd.theta.cwiseAbs().maxCoeff();
  if (fd.head_weights.size() > 0) {
    max_diff = std::max(max_diff,
                        (ps.head_weights - fd.head_weights).cwiseAbs().maxCoeff());
    max_diff = std::max(max_diff,
                        (ps.head_biases - fd.head_biases).cwiseAbs().maxCoeff());
    scale = std::max(scale, fd.head_weights.cwiseAbs().maxCoeff());
    scale = std::max(scale, fd.head_biases.cwiseAbs().maxCoeff());
  }
  double rel = max_diff / std::max(scale, 1e-8);
  std::cout << "max relative error " << sim::format_double(rel) << "\n";
  return rel < o.tolerance ? 0 : 1;
}

void register_qnn(CLI::App& app, int& exit_code) {
  CLI::App* qnn_cmd = app.add_subcommand("qnn", "quantum classifier training and evaluation");
  qnn_cmd->require_subcommand(1);

  auto tr = std::make_shared<QnnTrainOpts>();
  CLI::App* t = qnn_cmd->add_subcommand("train", "train a classifier on feature CSVs");
  t->add_option("--train", tr->train_csv, "training feature CSV")->required();
  t->add_option("--val", tr->val_csv, "validation feature CSV");
  t->add_option("--split", tr->split_fraction,
                "if no --val: carve validation out of --train at this fraction")
      ->check(CLI::Range(0.0, 1.0));
  t->add_option("--split-seed", tr->split_seed, "seed for --split")->capture_default_str();
  t->add_option("--family", tr->family, "ansatz family")->capture_default_str()
      ->check(CLI::IsMember(qnn::ansatz_families()));
  t->add_option("--layers", tr->layers, "ansatz layers")->capture_default_str()
      ->check(CLI::PositiveNumber);
  t->add_option("--head", tr->head, "readout head")->capture_default_str()
      ->check(CLI::IsMember({"parity", "single_z", "dense"}));
  t->add_option("--classes", tr->classes, "class count (default: infer from labels)");
  t->add_option("--loss", tr->loss, "loss function")->capture_default_str()
      ->check(CLI::IsMember({"mse", "bce", "sce"}));
  t->add_option("--optimizer", tr->optimizer, "optimizer")->capture_default_str()
      ->check(CLI::IsMember({"adagrad", "adam", "nelder_mead"}));
  t->add_option("--lr", tr->lr, "learning rate")->capture_default_str();
  t->add_option("--epochs", tr->epochs, "training epochs")->capture_default_str();
  t->add_option("--batch", tr->batch, "mini-batch size")->capture_default_str();
  t->add_option("--seed", tr->seed, "init and shuffle seed")->capture_default_str();
  t->add_option("--out", tr->out, "model JSON output path")->required();
  t->add_option("--history", tr->history, "per-epoch metrics CSV output path");
  t->add_flag("--force", tr->force, "overwrite existing outputs");
  t->callback([tr] { run_qnn_train(*tr); });

  auto ev = std::make_shared<QnnEvalOpts>();
  CLI::App* e = qnn_cmd->add_subcommand("eval", "evaluate a saved model on a feature CSV");
  e->add_option("--model", ev->model, "model JSON")->required();
  e->add_option("--data", ev->data_csv, "feature CSV")->required();
  e->add_option("--out", ev->out, "optional JSON report path");
  e->add_flag("--force", ev->force, "overwrite existing outputs");
  e->callback([ev] { run_qnn_eval(*ev); });

  auto gc = std::make_shared<QnnGradcheckOpts>();
  CLI::App* g = qnn_cmd->add_subcommand(
      "gradcheck", "compare parameter-shift and finite-difference gradients");
  g->add_option("--seed", gc->seed, "model and batch seed")->capture_default_str();
  g->add_option("--qubits", gc->qubits, "qubit count")->capture_default_str();
  g->add_option("--layers", gc->layers, "ansatz layers")->capture_default_str();
  g->add_option("--samples", gc->samples, "batch size")->capture_default_str();
  g->add_option("--family", gc->family, "ansatz family")->capture_default_str()
      ->check(CLI::IsMember(qnn::ansatz_families()));
  g->add_option("--head", gc->head, "readout head")->capture_default_str()
      ->check(CLI::IsMember({"parity", "single_z", "dense"}));
  g->add_option("--loss", gc->loss, "loss function")->capture_default_str()
      ->check(CLI::IsMember({"mse", "bce", "sce"}));
  g->add_option("--classes", gc->classes, "class count for the dense head")
      ->capture_default_str();
  g->callback([gc, &exit_code] { exit_code = run_qnn_gradcheck(*gc); });
}

// -------------------------------------------------------------------- sim --

struct SimRunOpts {
  std::string circuit;
  std::string params;
  std::int64_t shots = 0;
  std::uint64_t seed = 0;
  std::string device;
  std::string out;
  bool force = false;
};

void run_sim_run(const SimRunOpts& o) {
  sim::Circuit circuit = sim::load_circuit(o.circuit);
  if (!o.params.empty()) {
    std::vector<double> values = parse_double_list(o.params);
    Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size()));
    circuit = sim::bind_parameters(circuit, theta);
  }
  if (sim::parameter_count(circuit) > 0) {
    throw std::runtime_error("circuit has unbound parameters; pass --params");
  }
  json report;
  report["n_qubits"] = circuit.n_qubits;
  if (o.shots > 0) {
    std::map<std::uint64_t, std::int64_t> counts;
    if (!o.device.empty()) {
      noise::DeviceProfile device = device_from_arg(o.device);
      counts = noise::run_noisy_counts(circuit, device, o.shots, o.seed);
    } else {
      sim::StateVector state = sim::run_circuit(circuit);
      counts = sim::sample_counts(sim::probabilities(state), o.shots, o.seed);
    }
    report["shots"] = o.shots;
    report["counts"] = json::object();
    for (const auto& [outcome, count] : counts) {
      std::cout << bitstring(outcome, circuit.n_qubits) << " " << count << "\n";
      report["counts"][bitstring(outcome, circuit.n_qubits)] = count;
    }
  } else {
    if (!o.device.empty()) {
      throw std::runtime_error("--device requires --shots (trajectory sampling)");
    }
    sim::StateVector state = sim::run_circuit(circuit);
    sim::Distribution dist = sim::probabilities(state);
    report["probabilities"] = json::object();
    for (int i = 0; i < dist.probabilities.size(); ++i) {
      double p = dist.probabilities[i];
      if (p > 1e-15) {
        std::cout << bitstring(i, circuit.n_qubits) << " "
                  << sim::format_double(p) << "\n";
      }
      report["probabilities"][bitstring(i, circuit.n_qubits)] = p;
    }
  }
  if (!o.out.empty()) {
    require_fresh(o.out, o.force);
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + o.out);
    f << report.dump(2) << "\n";
    json cfg{{"circuit", o.circuit}, {"params", o.params}, {"shots", o.shots},
             {"seed", o.seed},       {"device", o.device}, {"out", o.out}};
    write_manifest(manifest_path_for(o.out), "sim run", cfg, {o.seed}, {o.out});
  }
}

struct SimTvdOpts {
  std::string circuit_a, circuit_b;
};

void run_sim_tvd(const SimTvdOpts& o) {
  sim::Circuit a = sim::load_circuit(o.circuit_a);
  sim::Circuit b = sim::load_circuit(o.circuit_b);
  sim::Distribution pa = sim::probabilities(sim::run_circuit(a));
  sim::Distribution pb = sim::probabilities(sim::run_circuit(b));
  std::cout << sim::format_double(sim::total_variation_distance(pa, pb)) << "\n";
}

void register_sim(CLI::App& app) {
  CLI::App* sim_cmd = app.add_subcommand("sim", "statevector simulation");
  sim_cmd->require_subcommand(1);

  auto r = std::make_shared<SimRunOpts>();
  CLI::App* run = sim_cmd->add_subcommand("run", "run a circuit file ideally or on a noise profile");
  run->add_option("--circuit", r->circuit, "circuit text file")->required();
  run->add_option("--params", r->params, "comma-separated parameter values to bind");
  run->add_option("--shots", r->shots, "sample this many shots (0: print exact probabilities)")
      ->capture_default_str();
  run->add_option("--seed", r->seed, "sampling seed")->capture_default_str();
  run->add_option("--device", r->device, "builtin profile name or profile JSON path");
  run->add_option("--out", r->out, "optional JSON report path");
  run->add_flag("--force", r->force, "overwrite existing outputs");
  run->callback([r] { run_sim_run(*r); });

  auto t = std::make_shared<SimTvdOpts>();
  CLI::App* tvd = sim_cmd->add_subcommand("tvd", "total variation distance between two circuits");
  tvd->add_option("--circuit", t->circuit_a, "first circuit file")->required();
  tvd->add_option("--other", t->circuit_b, "second circuit file")->required();
  tvd->callback([t] { run_sim_tvd(*t); });
}

// -------------------------------------------------------------------- sec --

struct SecPufOpts {
  std::string device = "noisy-a";
  std::string variant = "hadamard";
  std::int64_t shots = 10000;
  double delay = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

void run_sec_puf(const SecPufOpts& o) {
  noise::DeviceProfile device = device_from_arg(o.device);
  std::optional<double> delay;
  if (o.delay > 0.0) delay = o.delay;
  security::Signature sig =
      security::qupuf_signature(device, o.variant, o.shots, delay, o.seed);
  std::string bits;
  for (int b : sig.bits) bits += b ? '1' : '0';
  std::cout << "device " << sig.device_id << " signature " << bits << "\n";
  if (!o.out.empty()) {
    require_fresh(o.out, o.force);
    security::save_signature_csv(sig, o.out);
    json cfg{{"device", o.device}, {"variant", o.variant}, {"shots", o.shots},
             {"delay", o.delay},   {"seed", o.seed},       {"out", o.out}};
    write_manifest(manifest_path_for(o.out), "sec puf", cfg, {o.seed}, {o.out});
  }
}

struct SecSplitOpts {
  std::string circuit;
  int k = 2;
  std::string policy = "by_gate_count";
  std::uint64_t shuffle_seed = 0;
  bool shuffle = false;
  std::string out_dir;
  bool force = false;
};

void run_sec_split(const SecSplitOpts& o) {
  require_fresh_dir(o.out_dir, o.force);
  sim::Circuit circuit = sim::load_circuit(o.circuit);
  security::SplitPolicy policy = o.policy == "by_layer"
                                     ? security::SplitPolicy::ByLayer
                                     : security::SplitPolicy::ByGateCount;
  std::vector<security::Fragment> fragments =
      security::split_circuit(circuit, o.k, policy);
  if (o.shuffle) security::shuffle_fragments(fragments, o.shuffle_seed);
  fs::create_directories(o.out_dir);
  std::vector<std::string> artifacts;
  for (size_t i = 0; i < fragments.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "part_%02zu.txt", i);
    std::string path = (fs::path(o.out_dir) / name).string();
    security::save_fragment(fragments[i], path);
    artifacts.push_back(path);
  }
  json cfg{{"circuit", o.circuit},
           {"k", o.k},
           {"policy", o.policy},
           {"shuffle", o.shuffle},
           {"shuffle_seed", o.shuffle_seed},
           {"out_dir", o.out_dir}};
  write_manifest((fs::path(o.out_dir) / "run_manifest.json").string(),
                 "sec split", cfg, {o.shuffle_seed}, artifacts);
  std::cout << "wrote " << fragments.size() << " fragments to " << o.out_dir << "\n";
}

struct SecRecombineOpts {
  std::vector<std::string> files;
  std::string dir;
  std::string out;
  bool force = false;
};

void run_sec_recombine(const SecRecombineOpts& o) {
  require_fresh(o.out, o.force);
  std::vector<std::string> files = o.files;
  if (!o.dir.empty()) {
    for (const auto& entry : fs::directory_iterator(o.dir)) {
      if (entry.path().extension() == ".txt") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw std::runtime_error("no fragment files given");
  std::vector<security::Fragment> fragments;
  for (const std::string& f : files) fragments.push_back(security::load_fragment(f));
  sim::Circuit circuit = security::recombine_circuit(fragments);
  sim::save_circuit(circuit, o.out);
  json cfg{{"fragments", files}, {"out", o.out}};
  write_manifest(manifest_path_for(o.out), "sec recombine", cfg, {}, {o.out});
  std::cout << "recombined " << fragments.size() << " fragments into " << o.out << "\n";
}

struct SecObfuscateOpts {
  std::string circuit;
  std::string device = "noisy-a";
  std::string kind = "swap";
  std::string mode = "exhaustive";
  int count = 1;
  std::string out, key;
  bool force = false;
};

void run_sec_obfuscate(const SecObfuscateOpts& o) {
  require_fresh(o.out, o.force);
  require_fresh(o.key, o.force);
  sim::Circuit circuit = sim::load_circuit(o.circuit);
  noise::DeviceProfile device = device_from_arg(o.device);
  security::DummyKind kind =
      o.kind == "zz" ? security::DummyKind::ZZ : security::DummyKind::Swap;
  security::RankMode mode = o.mode == "heuristic" ? security::RankMode::Heuristic
                                                  : security::RankMode::Exhaustive;
  std::vector<security::InsertionPoint> ranked =
      security::rank_insertion_points(circuit, device, kind, mode);
  if (static_cast<int>(ranked.size()) < o.count) {
    throw std::runtime_error("only " + std::to_string(ranked.size()) +
                             " insertion points available");
  }
  std::vector<security::DummySelection> selections;
  for (int i = 0; i < o.count; ++i) {
    selections.push_back({ranked[i].position, ranked[i].edge, kind});
    std::cout << "insert at op " << ranked[i].position << " edge ("
              << ranked[i].edge.first << "," << ranked[i].edge.second
              << ") score " << sim::format_double(ranked[i].score) << "\n";
  }
  auto [obfuscated, security_key] = security::insert_dummy_gates(circuit, selections);
  sim::save_circuit(obfuscated, o.out);
  security::save_key(security_key, o.key);
  json cfg{{"circuit", o.circuit}, {"device", o.device}, {"kind", o.kind},
           {"mode", o.mode},       {"count", o.count},   {"out", o.out},
           {"key", o.key}};
  write_manifest(manifest_path_for(o.out), "sec obfuscate", cfg, {},
                 {o.out, o.key});
  std::cout << "wrote " << o.out << " and " << o.key << "\n";
}

struct SecRestoreOpts {
  std::string circuit, key, out;
  bool force = false;
};

void run_sec_restore(const SecRestoreOpts& o) {
  require_fresh(o.out, o.force);
  sim::Circuit obfuscated = sim::load_circuit(o.circuit);
  security::SecurityKey key = security::load_key(o.key);
  sim::Circuit restored = security::restore_circuit(obfuscated, key);
  sim::save_circuit(restored, o.out);
  json cfg{{"circuit", o.circuit}, {"key", o.key}, {"out", o.out}};
  write_manifest(manifest_path_for(o.out), "sec restore", cfg, {}, {o.out});
  std::cout << "restored " << o.out << " (" << restored.ops.size() << " ops)\n";
}

struct SecAllocateOpts {
  std::string device = "noisy-a";
  std::string sizes;
  std::string out;
  bool force = false;
};

void run_sec_allocate(const SecAllocateOpts& o) {
  noise::DeviceProfile device = device_from_arg(o.device);
  std::vector<int> sizes = parse_int_list(o.sizes);
  security::Allocation alloc =
      security::allocate_with_buffers(device.n_qubits, device.coupling_map, sizes);
  json report;
  report["programs"] = alloc.programs;
  report["buffer"] = alloc.buffer;
  std::cout << report.dump(2) << "\n";
  if (!o.out.empty()) {
    require_fresh(o.out, o.force);
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + o.out);
    f << report.dump(2) << "\n";
    json cfg{{"device", o.device}, {"sizes", o.sizes}, {"out", o.out}};
    write_manifest(manifest_path_for(o.out), "sec allocate", cfg, {}, {o.out});
  }
}

struct SecInjectOpts {
  std::string victim;
  std::string device = "noisy-a";
  std::string adversary;
  std::string arm = "adjacent";
  std::int64_t shots = 10000;
  std::uint64_t seed = 0;
};

void run_sec_inject(const SecInjectOpts& o) {
  sim::Circuit victim = sim::load_circuit(o.victim);
  noise::DeviceProfile device = device_from_arg(o.device);
  std::vector<int> adversary = parse_int_list(o.adversary);
  security::PlacementArm arm = o.arm == "buffered"
                                   ? security::PlacementArm::Buffered
                                   : security::PlacementArm::Adjacent;
  double reliability = security::simulate_fault_injection(victim, adversary,
                                                          device, arm, o.shots,
                                                          o.seed);
  std::cout << "reliability " << sim::format_double(reliability) << "\n";
}

void register_sec(CLI::App& app) {
  CLI::App* sec = app.add_subcommand("sec", "hardware security toolkit");
  sec->require_subcommand(1);

  auto pf = std::make_shared<SecPufOpts>();
  CLI::App* puf = sec->add_subcommand("puf", "extract a device fingerprint signature");
  puf->add_option("--device", pf->device, "builtin profile name or profile JSON path")
      ->capture_default_str();
  puf->add_option("--variant", pf->variant, "challenge variant")->capture_default_str()
      ->check(CLI::IsMember({"hadamard", "decoherence"}));
  puf->add_option("--shots", pf->shots, "shots per extraction")->capture_default_str();
  puf->add_option("--delay", pf->delay, "idle time for the decoherence variant");
  puf->add_option("--seed", pf->seed, "trajectory seed")->capture_default_str();
  puf->add_option("--out", pf->out, "signature CSV output path");
  puf->add_flag("--force", pf->force, "overwrite existing outputs");
  puf->callback([pf] { run_sec_puf(*pf); });

  auto sp = std::make_shared<SecSplitOpts>();
  CLI::App* split = sec->add_subcommand("split", "split a circuit into fragments");
  split->add_option("--circuit", sp->circuit, "circuit text file")->required();
  split->add_option("-k,--fragments", sp->k, "fragment count")->capture_default_str()
      ->check(CLI::PositiveNumber);
  split->add_option("--policy", sp->policy, "cut placement policy")->capture_default_str()
      ->check(CLI::IsMember({"by_gate_count", "by_layer"}));
  split->add_flag("--shuffle", sp->shuffle, "shuffle fragment order on disk");
  split->add_option("--shuffle-seed", sp->shuffle_seed, "seed for --shuffle")
      ->capture_default_str();
  split->add_option("--out-dir", sp->out_dir, "fragment output directory")->required();
  split->add_flag("--force", sp->force, "overwrite existing outputs");
  split->callback([sp] { run_sec_split(*sp); });

  auto rc = std::make_shared<SecRecombineOpts>();
  CLI::App* rec = sec->add_subcommand("recombine", "reassemble fragments into a circuit");
  rec->add_option("--fragments", rc->files, "fragment files in any order");
  rec->add_option("--dir", rc->dir, "directory holding fragment .txt files");
  rec->add_option("--out", rc->out, "circuit output path")->required();
  rec->add_flag("--force", rc->force, "overwrite existing outputs");
  rec->callback([rc] { run_sec_recombine(*rc); });

  auto ob = std::make_shared<SecObfuscateOpts>();
  CLI::App* obf = sec->add_subcommand("obfuscate", "insert keyed dummy gates at ranked positions");
  obf->add_option("--circuit", ob->circuit, "circuit text file")->required();
  obf->add_option("--device", ob->device, "builtin profile name or profile JSON path")
      ->capture_default_str();
  obf->add_option("--kind", ob->kind, "dummy gate kind")->capture_default_str()
      ->check(CLI::IsMember({"swap", "zz"}));
  obf->add_option("--mode", ob->mode, "ranking mode")->capture_default_str()
      ->check(CLI::IsMember({"exhaustive", "heuristic"}));
  obf->add_option("--count", ob->count, "how many top-ranked dummies to insert")
      ->capture_default_str()->check(CLI::PositiveNumber);
  obf->add_option("--out", ob->out, "obfuscated circuit output path")->required();
  obf->add_option("--key", ob->key, "restoration key output path")->required();
  obf->add_flag("--force", ob->force, "overwrite existing outputs");
  obf->callback([ob] { run_sec_obfuscate(*ob); });

  auto rs = std::make_shared<SecRestoreOpts>();
  CLI::App* res = sec->add_subcommand("restore", "strip dummy gates using the key");
  res->add_option("--circuit", rs->circuit, "obfuscated circuit file")->required();
  res->add_option("--key", rs->key, "restoration key JSON")->required();
  res->add_option("--out", rs->out, "restored circuit output path")->required();
  res->add_flag("--force", rs->force, "overwrite existing outputs");
  res->callback([rs] { run_sec_restore(*rs); });

  auto al = std::make_shared<SecAllocateOpts>();
  CLI::App* alloc = sec->add_subcommand("allocate", "place programs with buffer qubits");
  alloc->add_option("--device", al->device, "builtin profile name or profile JSON path")
      ->capture_default_str();
  alloc->add_option("--sizes", al->sizes, "comma-separated program qubit counts")
      ->required();
  alloc->add_option("--out", al->out, "optional allocation JSON output path");
  alloc->add_flag("--force", al->force, "overwrite existing outputs");
  alloc->callback([al] { run_sec_allocate(*al); });

  auto inj = std::make_shared<SecInjectOpts>();
  CLI::App* in = sec->add_subcommand("inject", "crosstalk fault-injection reliability of a victim");
  in->add_option("--victim", inj->victim, "victim circuit file (device-sized)")->required();
  in->add_option("--device", inj->device, "builtin profile name or profile JSON path")
      ->capture_default_str();
  in->add_option("--adversary", inj->adversary, "comma-separated adversary qubits")
      ->required();
  in->add_option("--arm", inj->arm, "placement arm label")->capture_default_str()
      ->check(CLI::IsMember({"adjacent", "buffered"}));
  in->add_option("--shots", inj->shots, "trajectory shots")->capture_default_str();
  in->add_option("--seed", inj->seed, "trajectory seed")->capture_default_str();
  in->callback([inj] { run_sec_inject(*inj); });
}

// ----------------------------------------------------------- paper preset --

struct PipelineOpts {
  std::string out_dir;
  int per_class = 700;
  std::uint64_t data_seed = 11;
  int samples = 2000;
  int cae_epochs = 25;
  int qnn_epochs = 10;
  std::uint64_t seed = 0;
  bool force = false;
};

void run_pipeline(const PipelineOpts& o) {
  require_fresh_dir(o.out_dir, o.force);
  pipeline::PipelineConfig config;
  config.per_class = o.per_class;
  config.data_seed = o.data_seed;
  config.samples_per_task = o.samples;
  config.cae_train.epochs = o.cae_epochs;
  config.cae_train.seed = o.seed;
  config.qnn_train.epochs = o.qnn_epochs;
  config.qnn_train.seed = o.seed;
  pipeline::PipelineResult result = pipeline::run_paper_pipeline(config);
  fs::create_directories(o.out_dir);
  fs::path dir(o.out_dir);
  cae::save_cae(result.artifacts.cae_model, (dir / "cae.json").string());
  data::save_feature_csv(result.artifacts.latent_train,
                         (dir / "latent_train.csv").string());
  data::save_feature_csv(result.artifacts.latent_val,
                         (dir / "latent_val.csv").string());
  qnn::save_model(result.three_class.model, (dir / "qnn_3class.json").string());
  qnn::save_model(result.six_class.model, (dir / "qnn_6class.json").string());
  std::string table = pipeline::format_result_table(result);
  {
    std::ofstream f(dir / "table.txt", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write table.txt");
    f << table;
  }
  json cfg{{"out_dir", o.out_dir},     {"per_class", o.per_class},
           {"data_seed", o.data_seed}, {"samples", o.samples},
           {"cae_epochs", o.cae_epochs},
           {"qnn_epochs", o.qnn_epochs},
           {"seed", o.seed}};
  write_manifest((dir / "run_manifest.json").string(), "paper-pipeline", cfg,
                 {o.data_seed, o.seed},
                 {(dir / "cae.json").string(), (dir / "latent_train.csv").string(),
                  (dir / "latent_val.csv").string(),
                  (dir / "qnn_3class.json").string(),
                  (dir / "qnn_6class.json").string(),
                  (dir / "table.txt").string()});
  std::cout << table;
}

void register_pipeline(CLI::App& app) {
  auto po = std::make_shared<PipelineOpts>();
  CLI::App* p = app.add_subcommand(
      "paper-pipeline", "synthetic data -> autoencoder -> latent QNN tasks, end to end");
  p->add_option("--out-dir", po->out_dir, "artifact output directory")->required();
  p->add_option("--per-class", po->per_class, "images per defect class")
      ->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("--data-seed", po->data_seed, "image generator seed")->capture_default_str();
  p->add_option("--samples", po->samples, "samples per classification task")
      ->capture_default_str();
  p->add_option("--cae-epochs", po->cae_epochs, "autoencoder epochs")->capture_default_str();
  p->add_option("--qnn-epochs", po->qnn_epochs, "classifier epochs")->capture_default_str();
  p->add_option("--seed", po->seed, "training seed")->capture_default_str();
  p->add_flag("--force", po->force, "overwrite existing outputs");
  p->callback([po] { run_pipeline(*po); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum ML security workbench"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.set_config("--config", "", "JSON config file (flags take precedence)");
  app.config_formatter(std::make_shared<JsonConfig>());

  int exit_code = 0;
  register_dataset(app);
  register_cae(app);
  register_qnn(app, exit_code);
  register_sim(app);
  register_sec(app);
  register_pipeline(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
