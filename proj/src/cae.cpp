#include "qmlsec/cae.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "qmlsec/optim.hpp"
#include "qmlsec/rng.hpp"

namespace qmlsec::cae {

namespace {

using json = nlohmann::ordered_json;
using Planes = std::vector<Eigen::MatrixXd>;

void check_config(const CaeConfig& config) {
  if (config.input_size < 4 || config.input_size % 4 != 0) {
    throw std::invalid_argument("cae input size must be a multiple of 4");
  }
  if (config.c1 < 1 || config.c2 < 1 || config.latent_dim < 1) {
    throw std::invalid_argument("cae channel and latent sizes must be >= 1");
  }
}

int flat_size(const CaeConfig& config) {
  const int s = config.input_size / 4;
  return s * s * config.c2;
}

double at_padded(const Eigen::MatrixXd& plane, int y, int x) {
  if (y < 0 || x < 0 || y >= plane.rows() || x >= plane.cols()) return 0.0;
  return plane(y, x);
}

Planes zero_planes(int channels, int size) {
  return Planes(channels, Eigen::MatrixXd::Zero(size, size));
}

// stride-2 pad-1 3x3 convolution, in-plane size 2s -> s
Planes conv_forward(const Planes& in, const ConvLayer& layer, int out_size) {
  Planes out = zero_planes(layer.out_ch, out_size);
  for (int o = 0; o < layer.out_ch; ++o) {
    out[o].array() += layer.bias[o];
    for (int i = 0; i < layer.in_ch; ++i) {
      const Eigen::Matrix3d& k = layer.kernel(o, i);
      for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
          double acc = 0.0;
          for (int u = 0; u < 3; ++u) {
            for (int v = 0; v < 3; ++v) {
              acc += at_padded(in[i], 2 * y + u - 1, 2 * x + v - 1) * k(u, v);
            }
          }
          out[o](y, x) += acc;
        }
      }
    }
  }
  return out;
}

// transposed stride-2 pad-1 3x3 convolution, in-plane size s -> 2s
Planes tconv_forward(const Planes& in, const ConvLayer& layer, int out_size) {
  Planes out = zero_planes(layer.out_ch, out_size);
  const int in_size = out_size / 2;
  for (int o = 0; o < layer.out_ch; ++o) {
    out[o].array() += layer.bias[o];
    for (int i = 0; i < layer.in_ch; ++i) {
      const Eigen::Matrix3d& k = layer.kernel(o, i);
      for (int y = 0; y < in_size; ++y) {
        for (int x = 0; x < in_size; ++x) {
          const double value = in[i](y, x);
          for (int u = 0; u < 3; ++u) {
            const int oy = 2 * y + u - 1;
            if (oy < 0 || oy >= out_size) continue;
            for (int v = 0; v < 3; ++v) {
              const int ox = 2 * x + v - 1;
              if (ox < 0 || ox >= out_size) continue;
              out[o](oy, ox) += value * k(u, v);
            }
          }
        }
      }
    }
  }
  return out;
}

// gradients of conv_forward; d_in accumulated only when requested
void conv_backward(const Planes& in, const Planes& d_out,
                   const ConvLayer& layer, ConvLayer& d_layer, Planes* d_in) {
  const int out_size = static_cast<int>(d_out[0].rows());
  for (int o = 0; o < layer.out_ch; ++o) {
    d_layer.bias[o] += d_out[o].sum();
    for (int i = 0; i < layer.in_ch; ++i) {
      const Eigen::Matrix3d& k = layer.kernel(o, i);
      Eigen::Matrix3d& dk = d_layer.kernel(o, i);
      for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
          const double g = d_out[o](y, x);
          for (int u = 0; u < 3; ++u) {
            const int iy = 2 * y + u - 1;
            if (iy < 0 || iy >= in[i].rows()) continue;
            for (int v = 0; v < 3; ++v) {
              const int ix = 2 * x + v - 1;
              if (ix < 0 || ix >= in[i].cols()) continue;
              dk(u, v) += in[i](iy, ix) * g;
              if (d_in) (*d_in)[i](iy, ix) += k(u, v) * g;
            }
          }
        }
      }
    }
  }
}

// gradients of tconv_forward
void tconv_backward(const Planes& in, const Planes& d_out,
                    const ConvLayer& layer, ConvLayer& d_layer, Planes* d_in) {
  const int out_size = static_cast<int>(d_out[0].rows());
  const int in_size = out_size / 2;
  for (int o = 0; o < layer.out_ch; ++o) {
    d_layer.bias[o] += d_out[o].sum();
    for (int i = 0; i < layer.in_ch; ++i) {
      const Eigen::Matrix3d& k = layer.kernel(o, i);
      Eigen::Matrix3d& dk = d_layer.kernel(o, i);
      for (int y = 0; y < in_size; ++y) {
        for (int x = 0; x < in_size; ++x) {
          const double value = in[i](y, x);
          double acc = 0.0;
          for (int u = 0; u < 3; ++u) {
            const int oy = 2 * y + u - 1;
            if (oy < 0 || oy >= out_size) continue;
            for (int v = 0; v < 3; ++v) {
              const int ox = 2 * x + v - 1;
              if (ox < 0 || ox >= out_size) continue;
              const double g = d_out[o](oy, ox);
              dk(u, v) += value * g;
              acc += k(u, v) * g;
            }
          }
          if (d_in) (*d_in)[i](y, x) += acc;
        }
      }
    }
  }
}

Planes relu(const Planes& planes) {
  Planes out = planes;
  for (auto& p : out) p = p.cwiseMax(0.0);
  return out;
}

Eigen::VectorXd flatten(const Planes& planes) {
  const int size = static_cast<int>(planes[0].rows());
  Eigen::VectorXd flat(static_cast<int>(planes.size()) * size * size);
  int at = 0;
  for (const auto& p : planes) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) flat[at++] = p(y, x);
    }
  }
  return flat;
}

Planes unflatten(const Eigen::VectorXd& flat, int channels, int size) {
  Planes planes = zero_planes(channels, size);
  int at = 0;
  for (auto& p : planes) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) p(y, x) = flat[at++];
    }
  }
  return planes;
}

ConvLayer make_conv(int in_ch, int out_ch) {
  ConvLayer layer;
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.kernels.assign(static_cast<std::size_t>(in_ch) * out_ch,
                       Eigen::Matrix3d::Zero());
  layer.bias = Eigen::VectorXd::Zero(out_ch);
  return layer;
}

void fill_conv(ConvLayer& layer, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (layer.in_ch * 9.0));
  for (auto& k : layer.kernels) {
    for (int u = 0; u < 3; ++u) {
      for (int v = 0; v < 3; ++v) k(u, v) = uniform_range(rng, -limit, limit);
    }
  }
}

void fill_dense(DenseLayer& layer, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      layer.weights(r, c) = uniform_range(rng, -limit, limit);
    }
  }
}

struct Trace {
  Planes input;
  Planes a1, z1;  // conv1 pre/post relu
  Planes a2, z2;  // conv2 pre/post relu
  Eigen::VectorXd flat, latent, expand;
  Planes z3;      // decoder dense output reshaped
  Planes a4, z4;  // tconv1 pre/post relu
  Planes a5;      // tconv2 pre-sigmoid
  Eigen::MatrixXd recon;
};

Trace forward_trace(const CaeModel& model, const Image& image) {
  const int s = model.config.input_size;
  if (image.rows() != s || image.cols() != s) {
    throw std::invalid_argument("cae_forward: image shape mismatch");
  }
  Trace t;
  t.input = {image};
  t.a1 = conv_forward(t.input, model.conv1, s / 2);
  t.z1 = relu(t.a1);
  t.a2 = conv_forward(t.z1, model.conv2, s / 4);
  t.z2 = relu(t.a2);
  t.flat = flatten(t.z2);
  t.latent = model.enc.weights * t.flat + model.enc.bias;
  t.expand = model.dec.weights * t.latent + model.dec.bias;
  t.z3 = unflatten(t.expand, model.config.c2, s / 4);
  t.a4 = tconv_forward(t.z3, model.tconv1, s / 2);
  t.z4 = relu(t.a4);
  t.a5 = tconv_forward(t.z4, model.tconv2, s);
  t.recon = t.a5[0].unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return t;
}

}  // namespace

CaeModel cae_init(const CaeConfig& config, std::uint64_t seed) {
  check_config(config);
  CaeModel model;
  model.config = config;
  const int flat = flat_size(config);

  model.conv1 = make_conv(1, config.c1);
  model.conv2 = make_conv(config.c1, config.c2);
  model.enc.weights = Eigen::MatrixXd::Zero(config.latent_dim, flat);
  model.enc.bias = Eigen::VectorXd::Zero(config.latent_dim);
  model.dec.weights = Eigen::MatrixXd::Zero(flat, config.latent_dim);
  model.dec.bias = Eigen::VectorXd::Zero(flat);
  model.tconv1 = make_conv(config.c2, config.c1);
  model.tconv2 = make_conv(config.c1, 1);

  std::mt19937_64 rng(derive_seed(seed, 0));
  fill_conv(model.conv1, rng);
  fill_conv(model.conv2, rng);
  fill_dense(model.enc, rng);
  fill_dense(model.dec, rng);
  fill_conv(model.tconv1, rng);
  fill_conv(model.tconv2, rng);
  return model;
}

int cae_parameter_count(const CaeConfig& config) {
  check_config(config);
  const int flat = flat_size(config);
  const auto conv = [](int in, int out) { return in * out * 9 + out; };
  const auto dense = [](int in, int out) { return in * out + out; };
  return conv(1, config.c1) + conv(config.c1, config.c2) +
         dense(flat, config.latent_dim) + dense(config.latent_dim, flat) +
         conv(config.c2, config.c1) + conv(config.c1, 1);
}

CaeOutput cae_forward(const CaeModel& model, const Image& image) {
  Trace t = forward_trace(model, image);
  return {std::move(t.recon), std::move(t.latent)};
}

Eigen::VectorXd cae_encode(const CaeModel& model, const Image& image) {
  const int s = model.config.input_size;
  if (image.rows() != s || image.cols() != s) {
    throw std::invalid_argument("cae_encode: image shape mismatch");
  }
  const Planes input = {image};
  const Planes z1 = relu(conv_forward(input, model.conv1, s / 2));
  const Planes z2 = relu(conv_forward(z1, model.conv2, s / 4));
  return model.enc.weights * flatten(z2) + model.enc.bias;
}

namespace {

void pack_conv(const ConvLayer& layer, Eigen::VectorXd& out, Eigen::Index& at) {
  for (const auto& k : layer.kernels) {
    for (int u = 0; u < 3; ++u) {
      for (int v = 0; v < 3; ++v) out[at++] = k(u, v);
    }
  }
  out.segment(at, layer.bias.size()) = layer.bias;
  at += layer.bias.size();
}

void pack_dense(const DenseLayer& layer, Eigen::VectorXd& out,
                Eigen::Index& at) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    out.segment(at, layer.weights.cols()) = layer.weights.row(r).transpose();
    at += layer.weights.cols();
  }
  out.segment(at, layer.bias.size()) = layer.bias;
  at += layer.bias.size();
}

void unpack_conv(const Eigen::VectorXd& in, ConvLayer& layer,
                 Eigen::Index& at) {
  for (auto& k : layer.kernels) {
    for (int u = 0; u < 3; ++u) {
      for (int v = 0; v < 3; ++v) k(u, v) = in[at++];
    }
  }
  layer.bias = in.segment(at, layer.bias.size());
  at += layer.bias.size();
}

void unpack_dense(const Eigen::VectorXd& in, DenseLayer& layer,
                  Eigen::Index& at) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    layer.weights.row(r) = in.segment(at, layer.weights.cols()).transpose();
    at += layer.weights.cols();
  }
  layer.bias = in.segment(at, layer.bias.size());
  at += layer.bias.size();
}

}  // namespace

Eigen::VectorXd cae_pack(const CaeModel& model) {
  Eigen::VectorXd packed(cae_parameter_count(model.config));
  Eigen::Index at = 0;
  pack_conv(model.conv1, packed, at);
  pack_conv(model.conv2, packed, at);
  pack_dense(model.enc, packed, at);
  pack_dense(model.dec, packed, at);
  pack_conv(model.tconv1, packed, at);
  pack_conv(model.tconv2, packed, at);
  return packed;
}

void cae_unpack(const Eigen::VectorXd& packed, CaeModel& model) {
  if (packed.size() != cae_parameter_count(model.config)) {
    throw std::invalid_argument("cae_unpack: parameter count mismatch");
  }
  Eigen::Index at = 0;
  unpack_conv(packed, model.conv1, at);
  unpack_conv(packed, model.conv2, at);
  unpack_dense(packed, model.enc, at);
  unpack_dense(packed, model.dec, at);
  unpack_conv(packed, model.tconv1, at);
  unpack_conv(packed, model.tconv2, at);
}

double cae_batch_loss(const CaeModel& model, const std::vector<Image>& batch) {
  if (batch.empty()) {
    throw std::invalid_argument("cae_batch_loss: empty batch");
  }
  const double pixels = static_cast<double>(model.config.input_size) *
                        model.config.input_size;
  double total = 0.0;
  for (const Image& image : batch) {
    const CaeOutput out = cae_forward(model, image);
    total += (out.reconstruction - image).squaredNorm() / pixels;
  }
  return total / static_cast<double>(batch.size());
}

namespace {

Eigen::VectorXd gradient_with_loss(const CaeModel& model,
                                   const std::vector<Image>& batch,
                                   double* loss_out) {
  if (batch.empty()) {
    throw std::invalid_argument("cae_gradient: empty batch");
  }
  const int s = model.config.input_size;
  const double pixels = static_cast<double>(s) * s;
  const double scale = 1.0 / (pixels * static_cast<double>(batch.size()));

  CaeModel grads = model;
  cae_unpack(Eigen::VectorXd::Zero(cae_parameter_count(model.config)), grads);

  double total_loss = 0.0;
  for (const Image& image : batch) {
    const Trace t = forward_trace(model, image);
    const Eigen::MatrixXd diff = t.recon - image;
    total_loss += diff.squaredNorm() / pixels;

    // d loss / d pre-sigmoid
    Planes d_a5 = {Eigen::MatrixXd(
        2.0 * scale * diff.array() * t.recon.array() * (1.0 - t.recon.array()))};

    Planes d_z4 = zero_planes(model.config.c1, s / 2);
    tconv_backward(t.z4, d_a5, model.tconv2, grads.tconv2, &d_z4);
    for (int c = 0; c < model.config.c1; ++c) {
      d_z4[c] = (t.a4[c].array() > 0.0).select(d_z4[c], 0.0);
    }

    Planes d_z3 = zero_planes(model.config.c2, s / 4);
    tconv_backward(t.z3, d_z4, model.tconv1, grads.tconv1, &d_z3);

    const Eigen::VectorXd d_expand = flatten(d_z3);
    grads.dec.weights += d_expand * t.latent.transpose();
    grads.dec.bias += d_expand;
    const Eigen::VectorXd d_latent = model.dec.weights.transpose() * d_expand;

    grads.enc.weights += d_latent * t.flat.transpose();
    grads.enc.bias += d_latent;
    const Eigen::VectorXd d_flat = model.enc.weights.transpose() * d_latent;

    Planes d_z2 = unflatten(d_flat, model.config.c2, s / 4);
    for (int c = 0; c < model.config.c2; ++c) {
      d_z2[c] = (t.a2[c].array() > 0.0).select(d_z2[c], 0.0);
    }

    Planes d_z1 = zero_planes(model.config.c1, s / 2);
    conv_backward(t.z1, d_z2, model.conv2, grads.conv2, &d_z1);
    for (int c = 0; c < model.config.c1; ++c) {
      d_z1[c] = (t.a1[c].array() > 0.0).select(d_z1[c], 0.0);
    }
    conv_backward(t.input, d_z1, model.conv1, grads.conv1, nullptr);
  }

  if (loss_out) *loss_out = total_loss / static_cast<double>(batch.size());
  return cae_pack(grads);
}

}  // namespace

Eigen::VectorXd cae_gradient(const CaeModel& model,
                             const std::vector<Image>& batch) {
  return gradient_with_loss(model, batch, nullptr);
}

std::vector<double> cae_train(CaeModel& model, const std::vector<Image>& images,
                              const CaeTrainConfig& config) {
  if (images.empty()) {
    throw std::invalid_argument("cae_train: empty dataset");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw std::invalid_argument("cae_train: epochs and batch_size must be >= 1");
  }
  if (config.learning_rate < 0.0) {
    throw std::invalid_argument("cae_train: negative learning rate");
  }

  const int n = static_cast<int>(images.size());
  const int n_batches = (n + config.batch_size - 1) / config.batch_size;
  qnn::AdamState adam;
  std::vector<int> order(n);
  std::vector<double> history;
  history.reserve(config.epochs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, epoch));
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform_int(rng, 0, i));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    for (int b = 0; b < n_batches; ++b) {
      const int begin = b * config.batch_size;
      const int end = std::min(n, begin + config.batch_size);
      std::vector<Image> batch;
      batch.reserve(end - begin);
      for (int i = begin; i < end; ++i) batch.push_back(images[order[i]]);

      double loss = 0.0;
      const Eigen::VectorXd grad = gradient_with_loss(model, batch, &loss);
      epoch_loss += loss * static_cast<double>(end - begin);

      Eigen::VectorXd packed = cae_pack(model);
      qnn::adam_step(packed, grad, adam, config.learning_rate);
      cae_unpack(packed, model);
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

data::FeatureDataset cae_encode_dataset(const CaeModel& model,
                                        const data::LabeledImageSet& set) {
  data::FeatureDataset out;
  out.features.resize(set.size(), model.config.latent_dim);
  out.labels = set.labels;
  for (int i = 0; i < set.size(); ++i) {
    out.features.row(i) = cae_encode(model, set.images[i]).transpose();
  }
  return out;
}

namespace {

json conv_to_json(const ConvLayer& layer) {
  json kernels = json::array();
  for (const auto& k : layer.kernels) {
    json rows = json::array();
    for (int u = 0; u < 3; ++u) {
      rows.push_back(json::array({k(u, 0), k(u, 1), k(u, 2)}));
    }
    kernels.push_back(rows);
  }
  json bias = json::array();
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) bias.push_back(layer.bias[i]);
  return {{"in_ch", layer.in_ch},
          {"out_ch", layer.out_ch},
          {"kernels", kernels},
          {"bias", bias}};
}

void conv_from_json(const json& doc, ConvLayer& layer) {
  if (doc.at("in_ch").get<int>() != layer.in_ch ||
      doc.at("out_ch").get<int>() != layer.out_ch) {
    throw std::runtime_error("cae file conv shape mismatch");
  }
  const json& kernels = doc.at("kernels");
  if (kernels.size() != layer.kernels.size()) {
    throw std::runtime_error("cae file kernel count mismatch");
  }
  for (std::size_t i = 0; i < layer.kernels.size(); ++i) {
    for (int u = 0; u < 3; ++u) {
      for (int v = 0; v < 3; ++v) {
        layer.kernels[i](u, v) = kernels[i][u][v].get<double>();
      }
    }
  }
  const json& bias = doc.at("bias");
  if (static_cast<Eigen::Index>(bias.size()) != layer.bias.size()) {
    throw std::runtime_error("cae file bias length mismatch");
  }
  for (std::size_t i = 0; i < bias.size(); ++i) {
    layer.bias[i] = bias[i].get<double>();
  }
}

json dense_to_json(const DenseLayer& layer) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      row.push_back(layer.weights(r, c));
    }
    rows.push_back(row);
  }
  json bias = json::array();
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) bias.push_back(layer.bias[i]);
  return {{"rows", layer.weights.rows()},
          {"cols", layer.weights.cols()},
          {"weights", rows},
          {"bias", bias}};
}

void dense_from_json(const json& doc, DenseLayer& layer) {
  if (doc.at("rows").get<Eigen::Index>() != layer.weights.rows() ||
      doc.at("cols").get<Eigen::Index>() != layer.weights.cols()) {
    throw std::runtime_error("cae file dense shape mismatch");
  }
  const json& rows = doc.at("weights");
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      layer.weights(r, c) = rows[r][c].get<double>();
    }
  }
  const json& bias = doc.at("bias");
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
    layer.bias[i] = bias[i].get<double>();
  }
}

}  // namespace

void save_cae(const CaeModel& model, const std::string& path) {
  json doc;
  doc["config"] = {{"input_size", model.config.input_size},
                   {"c1", model.config.c1},
                   {"c2", model.config.c2},
                   {"latent_dim", model.config.latent_dim}};
  doc["conv1"] = conv_to_json(model.conv1);
  doc["conv2"] = conv_to_json(model.conv2);
  doc["enc"] = dense_to_json(model.enc);
  doc["dec"] = dense_to_json(model.dec);
  doc["tconv1"] = conv_to_json(model.tconv1);
  doc["tconv2"] = conv_to_json(model.tconv2);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write cae file: " + path);
  out << doc.dump(2) << "\n";
}

CaeModel load_cae(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read cae file: " + path);
  json doc = json::parse(in);

  CaeConfig config;
  config.input_size = doc.at("config").at("input_size").get<int>();
  config.c1 = doc.at("config").at("c1").get<int>();
  config.c2 = doc.at("config").at("c2").get<int>();
  config.latent_dim = doc.at("config").at("latent_dim").get<int>();

  CaeModel model = cae_init(config, 0);
  conv_from_json(doc.at("conv1"), model.conv1);
  conv_from_json(doc.at("conv2"), model.conv2);
  dense_from_json(doc.at("enc"), model.enc);
  dense_from_json(doc.at("dec"), model.dec);
  conv_from_json(doc.at("tconv1"), model.tconv1);
  conv_from_json(doc.at("tconv2"), model.tconv2);
  return model;
}

}  // namespace qmlsec::cae
