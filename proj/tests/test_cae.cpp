#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qmlsec/cae.hpp"
#include "qmlsec/rng.hpp"

using namespace qmlsec;
namespace fs = std::filesystem;

namespace {

const cae::CaeConfig kTiny{8, 4, 8, 3};

cae::Image random_image(std::mt19937_64& rng, int size) {
  cae::Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) img(y, x) = uniform_double(rng);
  }
  return img;
}

}  // namespace

TEST_CASE("initialization is seeded and shape-correct") {
  cae::CaeModel a = cae::cae_init({}, 3);
  cae::CaeModel b = cae::cae_init({}, 3);
  CHECK(cae::cae_pack(a) == cae::cae_pack(b));
  CHECK(a.config.latent_dim == 4);
  CHECK(a.enc.weights.rows() == 4);

  cae::CaeModel c = cae::cae_init({}, 4);
  CHECK(cae::cae_pack(a) != cae::cae_pack(c));

  CHECK_THROWS(cae::cae_init({30, 8, 16, 4}, 1));  // size must divide by 4
}

TEST_CASE("parameter count matches the layer arithmetic and the packed size") {
  // conv1 40 + conv2 296 + enc 99 + dec 128 + tconv1 292 + tconv2 37
  CHECK(cae::cae_parameter_count(kTiny) == 892);
  cae::CaeModel model = cae::cae_init(kTiny, 0);
  CHECK(cae::cae_pack(model).size() == 892);

  cae::CaeConfig full;  // 32x32, 8/16 channels, latent 4
  cae::CaeModel big = cae::cae_init(full, 0);
  CHECK(cae::cae_pack(big).size() == cae::cae_parameter_count(full));
}

TEST_CASE("pack and unpack are inverse") {
  cae::CaeModel model = cae::cae_init(kTiny, 9);
  Eigen::VectorXd packed = cae::cae_pack(model);
  cae::CaeModel other = cae::cae_init(kTiny, 1);
  cae::cae_unpack(packed, other);
  CHECK(cae::cae_pack(other) == packed);
  CHECK_THROWS(cae::cae_unpack(Eigen::VectorXd::Zero(10), other));
}

TEST_CASE("forward produces a sigmoid image and a latent of width d") {
  std::mt19937_64 rng(2);
  cae::CaeModel model = cae::cae_init({}, 5);
  cae::Image img = random_image(rng, 32);
  cae::CaeOutput out = cae::cae_forward(model, img);
  CHECK(out.reconstruction.rows() == 32);
  CHECK(out.reconstruction.cols() == 32);
  CHECK(out.reconstruction.minCoeff() > 0.0);
  CHECK(out.reconstruction.maxCoeff() < 1.0);
  CHECK(out.latent.size() == 4);
  CHECK(cae::cae_encode(model, img) == out.latent);

  CHECK_THROWS(cae::cae_forward(model, random_image(rng, 16)));
}

TEST_CASE("a zero-weight model reconstructs a flat 0.5 image") {
  cae::CaeModel model = cae::cae_init(kTiny, 0);
  cae::cae_unpack(Eigen::VectorXd::Zero(cae::cae_parameter_count(kTiny)), model);
  std::mt19937_64 rng(3);
  cae::CaeOutput out = cae::cae_forward(model, random_image(rng, 8));
  CHECK((out.reconstruction.array() - 0.5).abs().maxCoeff() < 1e-15);
  CHECK(out.latent.cwiseAbs().maxCoeff() == 0.0);

  // 0.5 is then a perfect reconstruction of a flat 0.5 image: zero gradient
  std::vector<cae::Image> batch{cae::Image::Constant(8, 8, 0.5)};
  CHECK(cae::cae_batch_loss(model, batch) == 0.0);
  CHECK(cae::cae_gradient(model, batch).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicating the batch leaves the gradient unchanged") {
  std::mt19937_64 rng(4);
  cae::CaeModel model = cae::cae_init(kTiny, 6);
  cae::Image img = random_image(rng, 8);
  Eigen::VectorXd single = cae::cae_gradient(model, {img});
  Eigen::VectorXd doubled = cae::cae_gradient(model, {img, img});
  CHECK((single - doubled).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("backprop agrees with finite differences on sampled coordinates") {
  std::mt19937_64 rng(5);
  cae::CaeModel model = cae::cae_init(kTiny, 11);
  std::vector<cae::Image> batch{random_image(rng, 8), random_image(rng, 8)};
  Eigen::VectorXd analytic = cae::cae_gradient(model, batch);
  Eigen::VectorXd packed = cae::cae_pack(model);
  double scale = analytic.cwiseAbs().maxCoeff();
  const double h = 1e-6;
  for (int probe = 0; probe < 30; ++probe) {
    int idx = static_cast<int>(uniform_int(rng, 0, packed.size() - 1));
    cae::CaeModel bumped = model;
    Eigen::VectorXd plus = packed, minus = packed;
    plus(idx) += h;
    minus(idx) -= h;
    cae::cae_unpack(plus, bumped);
    double f_plus = cae::cae_batch_loss(bumped, batch);
    cae::cae_unpack(minus, bumped);
    double f_minus = cae::cae_batch_loss(bumped, batch);
    double fd = (f_plus - f_minus) / (2.0 * h);
    CHECK(std::abs(analytic(idx) - fd) / std::max(scale, 1e-8) < 1e-4);
  }
}

TEST_CASE("training drives constant images to a matching flat output") {
  std::vector<cae::Image> images(10, cae::Image::Constant(8, 8, 0.7));
  cae::CaeModel model = cae::cae_init(kTiny, 7);
  cae::CaeTrainConfig config;
  config.learning_rate = 0.02;
  config.epochs = 150;
  config.batch_size = 10;
  std::vector<double> history = cae::cae_train(model, images, config);
  CHECK(history.size() == 150);
  CHECK(cae::cae_batch_loss(model, images) < 1e-3);
}

TEST_CASE("paper defaults record one loss entry per epoch") {
  std::mt19937_64 rng(8);
  std::vector<cae::Image> images;
  for (int i = 0; i < 6; ++i) images.push_back(random_image(rng, 8));
  cae::CaeModel model = cae::cae_init(kTiny, 1);
  cae::CaeTrainConfig config;  // 25 epochs
  std::vector<double> history = cae::cae_train(model, images, config);
  CHECK(history.size() == 25);
}

TEST_CASE("zero learning rate freezes the loss history") {
  std::mt19937_64 rng(9);
  std::vector<cae::Image> images;
  for (int i = 0; i < 7; ++i) images.push_back(random_image(rng, 8));
  cae::CaeModel model = cae::cae_init(kTiny, 2);
  Eigen::VectorXd before = cae::cae_pack(model);
  cae::CaeTrainConfig config;
  config.learning_rate = 0.0;
  config.epochs = 4;
  config.batch_size = 3;
  std::vector<double> history = cae::cae_train(model, images, config);
  CHECK(cae::cae_pack(model) == before);
  for (double loss : history) {
    CHECK(loss == doctest::Approx(history.front()).epsilon(1e-12));
  }
}

TEST_CASE("encoding a labeled set preserves order and labels") {
  std::mt19937_64 rng(10);
  data::LabeledImageSet set;
  for (int i = 0; i < 5; ++i) {
    set.images.push_back(random_image(rng, 8));
    set.labels.push_back(i % 3);
  }
  cae::CaeModel model = cae::cae_init(kTiny, 3);
  data::FeatureDataset ds = cae::cae_encode_dataset(model, set);
  CHECK(ds.features.rows() == 5);
  CHECK(ds.features.cols() == 3);
  CHECK(ds.labels == set.labels);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd direct = cae::cae_encode(model, set.images[i]);
    CHECK(ds.features.row(i).transpose() == direct);
  }
  // identical images map to identical latents
  data::LabeledImageSet twins;
  twins.images = {set.images[0], set.images[0]};
  twins.labels = {0, 0};
  data::FeatureDataset tw = cae::cae_encode_dataset(model, twins);
  CHECK(tw.features.row(0) == tw.features.row(1));
}

TEST_CASE("models round trip through json byte for byte") {
  fs::path dir = fs::temp_directory_path() / "qmlsec_test_cae";
  fs::create_directories(dir);
  cae::CaeModel model = cae::cae_init(kTiny, 13);
  std::string p1 = (dir / "cae_a.json").string();
  std::string p2 = (dir / "cae_b.json").string();
  cae::save_cae(model, p1);
  cae::CaeModel loaded = cae::load_cae(p1);
  cae::save_cae(loaded, p2);
  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK(cae::cae_pack(loaded) == cae::cae_pack(model));
}
