#include "qmlsec/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qmlsec/circuit_io.hpp"
#include "qmlsec/rng.hpp"

namespace qmlsec::data {

namespace fs = std::filesystem;

namespace {

constexpr int kSize = 32;

const std::array<std::string, kNumClasses> kClassNames = {
    "missing_hole", "mouse_bite",      "open_circuit",
    "short",        "spur",            "spurious_copper"};

}  // namespace

std::string class_name(int code) {
  if (code < 0 || code >= kNumClasses) {
    throw std::invalid_argument("class code out of range");
  }
  return kClassNames[code];
}

int class_code(const std::string& name) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (kClassNames[c] == name) return c;
  }
  throw std::invalid_argument("unknown defect class: " + name);
}

namespace {

// Local coordinates: rotation about (cx, cy), u along the shape axis.
struct Frame {
  double cx = 0.0, cy = 0.0, cos_a = 1.0, sin_a = 0.0;

  void local(double x, double y, double& u, double& v) const {
    const double dx = x - cx;
    const double dy = y - cy;
    u = dx * cos_a + dy * sin_a;
    v = -dx * sin_a + dy * cos_a;
  }
};

double box_sdf(double u, double v, double hw, double hh) {
  const double qx = std::abs(u) - hw;
  const double qy = std::abs(v) - hh;
  const double ox = std::max(qx, 0.0);
  const double oy = std::max(qy, 0.0);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
}

double disc_sdf(double u, double v, double r) {
  return std::sqrt(u * u + v * v) - r;
}

// one-pixel soft edge
double coverage(double d) { return std::clamp(0.5 - d, 0.0, 1.0); }

using Mask = Eigen::MatrixXd;

template <typename Sdf>
void paint(Mask& mask, const Sdf& sdf) {
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      const double c = coverage(sdf(x + 0.5, y + 0.5));
      if (c > mask(y, x)) mask(y, x) = c;
    }
  }
}

template <typename Sdf>
void carve(Mask& mask, const Sdf& sdf) {
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      mask(y, x) = std::min(mask(y, x), 1.0 - coverage(sdf(x + 0.5, y + 0.5)));
    }
  }
}

Frame jittered_frame(std::mt19937_64& rng, double pos_jitter,
                     double angle_jitter) {
  Frame frame;
  frame.cx = kSize / 2.0 + uniform_range(rng, -pos_jitter, pos_jitter);
  frame.cy = kSize / 2.0 + uniform_range(rng, -pos_jitter, pos_jitter);
  const double angle = uniform_range(rng, -angle_jitter, angle_jitter);
  frame.cos_a = std::cos(angle);
  frame.sin_a = std::sin(angle);
  return frame;
}

// solid pad disc, the drill hole that should pierce it is absent
Mask motif_missing_hole(std::mt19937_64& rng) {
  Mask mask = Mask::Zero(kSize, kSize);
  const Frame frame = jittered_frame(rng, 3.0, 0.0);
  const double r = uniform_range(rng, 6.0, 9.0);
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return disc_sdf(u, v, r);
  });
  return mask;
}

// horizontal trace with a semicircular bite out of one edge
Mask motif_mouse_bite(std::mt19937_64& rng) {
  Mask mask = Mask::Zero(kSize, kSize);
  const Frame frame = jittered_frame(rng, 3.0, 0.15);
  const double hh = uniform_range(rng, 2.5, 3.5);
  const double u0 = uniform_range(rng, -10.0, 10.0);
  const double side = uniform_double(rng) < 0.5 ? -1.0 : 1.0;
  const double r = uniform_range(rng, 2.2, 3.2);
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u, v, kSize, hh);
  });
  carve(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return disc_sdf(u - u0, v - side * hh, r);
  });
  return mask;
}

// trace interrupted by a clean break
Mask motif_open_circuit(std::mt19937_64& rng) {
  Mask mask = Mask::Zero(kSize, kSize);
  const Frame frame = jittered_frame(rng, 3.0, 0.15);
  const double hh = uniform_range(rng, 2.5, 3.5);
  const double u0 = uniform_range(rng, -9.0, 9.0);
  const double half_gap = uniform_range(rng, 1.2, 2.0);
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u, v, kSize, hh);
  });
  carve(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u - u0, v, half_gap, hh + 2.0);
  });
  return mask;
}

// two parallel traces bridged by an unwanted strip of copper
Mask motif_short(std::mt19937_64& rng) {
  Mask mask = Mask::Zero(kSize, kSize);
  const Frame frame = jittered_frame(rng, 2.0, 0.15);
  const double hh = uniform_range(rng, 1.8, 2.4);
  const double half_sep = uniform_range(rng, 4.5, 6.5);
  const double u0 = uniform_range(rng, -9.0, 9.0);
  const double half_bw = uniform_range(rng, 1.0, 1.6);
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u, v - half_sep, kSize, hh);
  });
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u, v + half_sep, kSize, hh);
  });
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u - u0, v, half_bw, half_sep + hh);
  });
  return mask;
}

// trace with a triangular protrusion off one edge
Mask motif_spur(std::mt19937_64& rng) {
  Mask mask = Mask::Zero(kSize, kSize);
  const Frame frame = jittered_frame(rng, 3.0, 0.15);
  const double hh = uniform_range(rng, 2.5, 3.5);
  const double u0 = uniform_range(rng, -10.0, 10.0);
  const double side = uniform_double(rng) < 0.5 ? -1.0 : 1.0;
  const double height = uniform_range(rng, 3.0, 5.0);
  const double half_base = uniform_range(rng, 2.0, 3.5);
  const double slant = std::sqrt(height * height + half_base * half_base);
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    return box_sdf(u, v, kSize, hh);
  });
  paint(mask, [&](double x, double y) {
    double u, v;
    frame.local(x, y, u, v);
    const double s = u - u0;
    const double t = side * v - hh;  // outward distance from the trace edge
    const double d1 = (height * s + half_base * t - height * half_base) / slant;
    const double d2 = (-height * s + half_base * t - height * half_base) / slant;
    return std::max({d1, d2, -t - 1.0});
  });
  return mask;
}

// small isolated copper blob, no trace in the patch
Mask motif_spurious_copper(std::mt19937_64& rng) {
  Mask mask = Mask::Zero(kSize, kSize);
  const double cx = uniform_range(rng, 8.0, 24.0);
  const double cy = uniform_range(rng, 8.0, 24.0);
  const int lobes = 2 + static_cast<int>(uniform_int(rng, 0, 1));
  for (int i = 0; i < lobes; ++i) {
    const double ox = uniform_range(rng, -2.5, 2.5);
    const double oy = uniform_range(rng, -2.5, 2.5);
    const double r = uniform_range(rng, 1.5, 3.0);
    paint(mask, [&](double x, double y) {
      return disc_sdf(x - cx - ox, y - cy - oy, r);
    });
  }
  return mask;
}

Image render_defect(int defect_class, std::mt19937_64& rng) {
  const double bg = uniform_range(rng, 0.10, 0.16);
  const double copper = uniform_range(rng, 0.82, 0.92);

  Mask mask;
  switch (defect_class) {
    case 0: mask = motif_missing_hole(rng); break;
    case 1: mask = motif_mouse_bite(rng); break;
    case 2: mask = motif_open_circuit(rng); break;
    case 3: mask = motif_short(rng); break;
    case 4: mask = motif_spur(rng); break;
    case 5: mask = motif_spurious_copper(rng); break;
    default: throw std::invalid_argument("class code out of range");
  }

  Image image(kSize, kSize);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      double p = bg + (copper - bg) * mask(y, x) + 0.025 * normal_double(rng);
      p = std::clamp(p, 0.0, 1.0);
      image(y, x) = std::round(p * 255.0) / 255.0;  // 8-bit levels, PGM-exact
    }
  }
  return image;
}

}  // namespace

LabeledImageSet generate_synthetic_defects(int count_per_class,
                                           std::uint64_t seed) {
  if (count_per_class < 1) {
    throw std::invalid_argument("count_per_class must be >= 1");
  }
  LabeledImageSet set;
  set.provenance = Provenance::Synthetic;
  set.images.reserve(static_cast<std::size_t>(count_per_class) * kNumClasses);
  set.labels.reserve(set.images.capacity());
  for (int c = 0; c < kNumClasses; ++c) {
    for (int i = 0; i < count_per_class; ++i) {
      const std::uint64_t index =
          static_cast<std::uint64_t>(c) * count_per_class + i;
      std::mt19937_64 rng(derive_seed(seed, index));
      set.images.push_back(render_defect(c, rng));
      set.labels.push_back(c);
    }
  }
  return set;
}

void save_pgm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const int level =
          std::clamp(static_cast<int>(std::lround(image(y, x) * 255.0)), 0, 255);
      out.put(static_cast<char>(level));
    }
  }
  if (!out) throw std::runtime_error("cannot write image: " + path);
}

namespace {

// next token in a PGM header, skipping whitespace and # comments
std::string pgm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

}  // namespace

Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read image: " + path);
  if (pgm_token(in) != "P5") {
    throw std::runtime_error("not a binary PGM file: " + path);
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(pgm_token(in));
    height = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("malformed PGM header: " + path);
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) {
    throw std::runtime_error("unsupported PGM geometry: " + path);
  }
  Image image(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int ch = in.get();
      if (ch == EOF) throw std::runtime_error("truncated PGM file: " + path);
      image(y, x) = static_cast<double>(ch) / maxval;
    }
  }
  return image;
}

Image resize_image(const Image& image, int size) {
  const Eigen::Index side = std::min(image.rows(), image.cols());
  const Eigen::Index r0 = (image.rows() - side) / 2;
  const Eigen::Index c0 = (image.cols() - side) / 2;
  const Image crop = image.block(r0, c0, side, side);
  if (side == size) return crop;

  Image out(size, size);
  const double scale = static_cast<double>(side) / size;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double y = std::clamp((i + 0.5) * scale - 0.5, 0.0,
                                  static_cast<double>(side - 1));
      const double x = std::clamp((j + 0.5) * scale - 0.5, 0.0,
                                  static_cast<double>(side - 1));
      const Eigen::Index y0 = static_cast<Eigen::Index>(y);
      const Eigen::Index x0 = static_cast<Eigen::Index>(x);
      const Eigen::Index y1 = std::min(y0 + 1, side - 1);
      const Eigen::Index x1 = std::min(x0 + 1, side - 1);
      const double fy = y - y0;
      const double fx = x - x0;
      out(i, j) = crop(y0, x0) * (1 - fy) * (1 - fx) +
                  crop(y0, x1) * (1 - fy) * fx +
                  crop(y1, x0) * fy * (1 - fx) + crop(y1, x1) * fy * fx;
    }
  }
  return out;
}

LabeledImageSet load_image_directory(const std::string& path) {
  if (!fs::is_directory(path)) {
    throw std::runtime_error("not a directory: " + path);
  }
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_directory()) {
      class_code(entry.path().filename().string());  // throws on unknown names
    }
  }

  LabeledImageSet set;
  set.provenance = Provenance::Ingested;
  for (int c = 0; c < kNumClasses; ++c) {
    const fs::path class_dir = fs::path(path) / class_name(c);
    if (!fs::is_directory(class_dir)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      Image image = load_pgm(file.string());
      if (image.rows() != kSize || image.cols() != kSize) {
        image = resize_image(image, kSize);
      }
      set.images.push_back(std::move(image));
      set.labels.push_back(c);
    }
  }
  if (set.size() == 0) {
    throw std::runtime_error("no PGM images under: " + path);
  }
  return set;
}

namespace {

// per-class index lists, shuffled by a class-derived seed, cut at the
// rounded train fraction
void split_indices(const std::vector<int>& labels, double train_fraction,
                   std::uint64_t seed, std::vector<int>& train_idx,
                   std::vector<int>& holdout_idx) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  int max_label = -1;
  for (int label : labels) {
    if (label < 0) throw std::invalid_argument("negative class label");
    max_label = std::max(max_label, label);
  }
  for (int c = 0; c <= max_label; ++c) {
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform_int(rng, 0, i));
      std::swap(members[i], members[j]);
    }
    const int n_train = std::clamp(
        static_cast<int>(std::llround(train_fraction * members.size())), 0,
        static_cast<int>(members.size()));
    for (int i = 0; i < static_cast<int>(members.size()); ++i) {
      (i < n_train ? train_idx : holdout_idx).push_back(members[i]);
    }
  }
}

}  // namespace

void split_dataset(const LabeledImageSet& set, double train_fraction,
                   std::uint64_t seed, LabeledImageSet& train,
                   LabeledImageSet& holdout) {
  std::vector<int> train_idx, holdout_idx;
  split_indices(set.labels, train_fraction, seed, train_idx, holdout_idx);
  train = LabeledImageSet{};
  holdout = LabeledImageSet{};
  train.provenance = set.provenance;
  holdout.provenance = set.provenance;
  for (int i : train_idx) {
    train.images.push_back(set.images[i]);
    train.labels.push_back(set.labels[i]);
  }
  for (int i : holdout_idx) {
    holdout.images.push_back(set.images[i]);
    holdout.labels.push_back(set.labels[i]);
  }
}

void split_features(const FeatureDataset& dataset, double train_fraction,
                    std::uint64_t seed, FeatureDataset& train,
                    FeatureDataset& val) {
  std::vector<int> train_idx, val_idx;
  split_indices(dataset.labels, train_fraction, seed, train_idx, val_idx);
  train = FeatureDataset{};
  val = FeatureDataset{};
  train.features.resize(train_idx.size(), dataset.features.cols());
  val.features.resize(val_idx.size(), dataset.features.cols());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    train.features.row(i) = dataset.features.row(train_idx[i]);
    train.labels.push_back(dataset.labels[train_idx[i]]);
  }
  for (std::size_t i = 0; i < val_idx.size(); ++i) {
    val.features.row(i) = dataset.features.row(val_idx[i]);
    val.labels.push_back(dataset.labels[val_idx[i]]);
  }
}

int class_count(const std::vector<int>& labels) {
  int max_label = -1;
  for (int label : labels) max_label = std::max(max_label, label);
  return max_label + 1;
}

void save_feature_csv(const FeatureDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (int f = 0; f < dataset.feature_dim(); ++f) {
    out << "f" << (f + 1) << ",";
  }
  out << "label\n";
  for (int i = 0; i < dataset.size(); ++i) {
    for (int f = 0; f < dataset.feature_dim(); ++f) {
      out << sim::format_double(dataset.features(i, f)) << ",";
    }
    out << dataset.labels[i] << "\n";
  }
}

FeatureDataset load_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty dataset file: " + path);
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int width = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected features and a label");
    }
    std::vector<double> row;
    try {
      for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
        row.push_back(std::stod(cells[i]));
      }
      labels.push_back(std::stoi(cells.back()));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed row");
    }
    if (width < 0) width = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != width) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": inconsistent feature count");
    }
    rows.push_back(std::move(row));
  }

  FeatureDataset dataset;
  dataset.features.resize(rows.size(), std::max(width, 0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < width; ++c) dataset.features(r, c) = rows[r][c];
  }
  dataset.labels = std::move(labels);
  return dataset;
}

void save_image_set(const LabeledImageSet& set, const std::string& directory) {
  fs::create_directories(directory);
  std::ofstream manifest(fs::path(directory) / "manifest.csv",
                         std::ios::binary);
  if (!manifest) {
    throw std::runtime_error("cannot write manifest under: " + directory);
  }
  manifest << "path,label\n";
  for (int c = 0; c < kNumClasses; ++c) {
    fs::create_directories(fs::path(directory) / class_name(c));
  }
  char name[32];
  for (int i = 0; i < set.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06d.pgm", i);
    const std::string rel = class_name(set.labels[i]) + "/" + name;
    save_pgm(set.images[i], (fs::path(directory) / rel).string());
    manifest << rel << "," << set.labels[i] << "\n";
  }
}

LabeledImageSet load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  LabeledImageSet set;
  set.provenance = Provenance::Ingested;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "path,label") continue;
    const auto comma = line.find_last_of(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": expected `path,label`");
    }
    const std::string rel = line.substr(0, comma);
    int label = 0;
    try {
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": malformed label");
    }
    if (label < 0 || label >= kNumClasses) {
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": label out of range");
    }
    Image image = load_pgm((base / rel).string());
    if (image.rows() != kSize || image.cols() != kSize) {
      image = resize_image(image, kSize);
    }
    set.images.push_back(std::move(image));
    set.labels.push_back(label);
  }
  return set;
}

}  // namespace qmlsec::data
