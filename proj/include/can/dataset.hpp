#pragma once

#include <string>
#include <vector>

#include "can/image.hpp"
#include "can/rng.hpp"

namespace can {

struct LabeledImage {
  Image image;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledImage> items;
  int num_classes = 0;

  int size() const { return static_cast<int>(items.size()); }
};

// CIFAR-10 binary batches: 3073-byte records, one label byte followed by
// 3072 bytes of channel-planar 32x32 RGB (1024 red, 1024 green, 1024 blue,
// row-major within each plane). Pixels are mapped to [0,1] as byte/255.
Dataset load_cifar10_file(const std::string& path);
Dataset load_cifar10_dir(const std::string& dir, bool train);
void write_cifar10_file(const std::string& path, const Dataset& ds);

// Seeded procedural images: ten texture/shape families (stripes at several
// orientations, checkerboards, gradients, rectangles, rings) with randomized
// colors, phases and frequencies plus additive pixel noise. Labels are the
// family index. Hermetic stand-in wherever real data is unavailable.
struct SyntheticConfig {
  int count = 1024;
  int num_classes = 4;
  int height = 32;
  int width = 32;
  double pixel_noise = 0.06;
  std::uint64_t seed = 1;
};

Dataset make_synthetic_dataset(const SyntheticConfig& cfg);

}  // namespace can
