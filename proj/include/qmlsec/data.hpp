#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmlsec/dataset.hpp"

namespace qmlsec::data {

inline constexpr int kNumClasses = 6;

// Integer codes 0..5: missing_hole, mouse_bite, open_circuit, short, spur,
// spurious_copper.
std::string class_name(int code);
int class_code(const std::string& name);

// 32x32 grayscale defect patches, one parametric motif per class, balanced
// classes, class-major order. Image i draws everything from
// derive_seed(seed, global_index) so generation is order-independent.
// Pixels are quantized to 8-bit levels and round-trip through PGM exactly.
LabeledImageSet generate_synthetic_defects(int count_per_class,
                                           std::uint64_t seed);

// Reads PGM images from class-named subdirectories. Non-32x32 inputs are
// center-cropped square and bilinearly resized.
LabeledImageSet load_image_directory(const std::string& path);

// Seeded stratified split; per-class train counts land within +-1 sample of
// the requested fraction.
void split_dataset(const LabeledImageSet& set, double train_fraction,
                   std::uint64_t seed, LabeledImageSet& train,
                   LabeledImageSet& holdout);

// Binary (P5) portable graymap, 8-bit.
void save_pgm(const Image& image, const std::string& path);
Image load_pgm(const std::string& path);

Image resize_image(const Image& image, int size);

// Writes <dir>/<class_name>/NNNNNN.pgm plus <dir>/manifest.csv (`path,label`,
// paths relative to dir).
void save_image_set(const LabeledImageSet& set, const std::string& directory);
LabeledImageSet load_manifest(const std::string& manifest_path);

}  // namespace qmlsec::data
