#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "amr/common.hpp"

namespace amr {

// Multi-label scenes built so that classification is solvable from a small
// class-unique signature patch while the object body carries no class
// evidence: every body shares one texture, so covering the whole object
// requires more than the discriminative shortcut.
struct DatasetConfig {
  int n_classes = 5;
  int image_size = 64;
  int train_count = 2000;
  int val_count = 500;
  int max_objects_per_image = 2;
  double noise_std = 0.05;
  uint64_t seed = 0;
};

enum class Split : uint64_t { Train = 0, Val = 1 };

struct Sample {
  // planar RGB in [0,1], (3, S, S)
  std::vector<float> image;
  // (S, S); 0 = background, 1..N = class index + 1
  std::vector<uint8_t> mask;
  // multi-hot, length n_classes
  std::vector<uint8_t> labels;
};

// Pure function of (config, split, index); identical inputs give
// bit-identical samples.
Sample generate_sample(const DatasetConfig& cfg, Split split, uint64_t index);

std::vector<Sample> generate_split(const DatasetConfig& cfg, Split split);

// Signature stripe colors for class `cls` (two alternating rows).
std::array<float, 3> signature_color(int cls);
std::array<float, 3> signature_color_alt(int cls);

}  // namespace amr
