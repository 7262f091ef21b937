#pragma once

#include <cstdint>
#include <vector>

#include "amr/common.hpp"

namespace amr {

// Per-sample stack of class activation maps at a fixed resolution.
struct CamStack {
  int n_classes = 0;
  int h = 0, w = 0;
  std::vector<float> maps;        // (n_classes, h, w) row-major
  bool normalized = false;        // values in [0,1], absent maps all-zero
  std::vector<uint8_t> class_mask;  // multi-hot, length n_classes

  float at(int n, int y, int x) const { return maps[(n * h + y) * w + x]; }
  float& at(int n, int y, int x) { return maps[(n * h + y) * w + x]; }
};

// Per-pixel labels: 0 = background, 1..N = class index + 1.
struct PseudoLabel {
  int h = 0, w = 0;
  std::vector<uint8_t> labels;
};

// Convex blend: xi * spotlight + (1 - xi) * compensation.
CamStack recalibrate(const CamStack& cam_s, const CamStack& cam_c, double xi);

// Thresholded argmax; ties go to the lowest class index.
PseudoLabel pseudo_label(const CamStack& cam, double bg_threshold);

// Bilinear resize of every map in the stack.
CamStack upsample(const CamStack& cam, int out_h, int out_w);

// Single-map bilinear resize helper shared with augmentation/export code.
void bilinear_resize(const float* src, int sh, int sw, float* dst, int dh, int dw);

}  // namespace amr
