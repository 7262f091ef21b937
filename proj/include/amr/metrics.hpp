#pragma once

#include <cstdint>
#include <vector>

#include "amr/common.hpp"

namespace amr {

// Segmentation scoring over labels 0..n_classes (0 = background).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_labels)
      : n_(n_labels), counts_(static_cast<std::size_t>(n_labels) * n_labels, 0) {}

  void accumulate(const uint8_t* truth, const uint8_t* pred, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (truth[i] >= n_ || pred[i] >= n_)
        throw ArgumentError("confusion matrix: label out of range");
      ++counts_[static_cast<std::size_t>(truth[i]) * n_ + pred[i]];
    }
  }

  uint64_t at(int truth, int pred) const {
    return counts_[static_cast<std::size_t>(truth) * n_ + pred];
  }

  // IoU per label; labels never seen in either truth or prediction get -1.
  std::vector<double> per_class_iou() const;

  // Unweighted mean over labels with defined IoU (background included).
  double miou() const;

  int n_labels() const { return n_; }

 private:
  int n_;
  std::vector<uint64_t> counts_;
};

struct PixelPr {
  double precision = 0.0;  // correct foreground / predicted foreground
  double recall = 0.0;     // correct foreground / true foreground
};

// Class-sensitive foreground precision/recall: a pixel counts as correct only
// when the predicted class equals the ground-truth class.
PixelPr foreground_pr(const uint8_t* truth, const uint8_t* pred, std::size_t n);

}  // namespace amr
