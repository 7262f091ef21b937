#include "amr/metrics.hpp"

namespace amr {

std::vector<double> ConfusionMatrix::per_class_iou() const {
  std::vector<double> out(n_, -1.0);
  for (int c = 0; c < n_; ++c) {
    uint64_t tp = at(c, c);
    uint64_t fn = 0, fp = 0;
    for (int o = 0; o < n_; ++o) {
      if (o == c) continue;
      fn += at(c, o);
      fp += at(o, c);
    }
    const uint64_t uni = tp + fn + fp;
    if (uni > 0) out[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double ConfusionMatrix::miou() const {
  const auto iou = per_class_iou();
  double acc = 0.0;
  int count = 0;
  for (double v : iou)
    if (v >= 0.0) {
      acc += v;
      ++count;
    }
  return count ? acc / count : 0.0;
}

PixelPr foreground_pr(const uint8_t* truth, const uint8_t* pred, std::size_t n) {
  uint64_t correct = 0, pred_fg = 0, true_fg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pred[i] != 0) ++pred_fg;
    if (truth[i] != 0) ++true_fg;
    if (truth[i] != 0 && pred[i] == truth[i]) ++correct;
  }
  PixelPr out;
  out.precision = pred_fg ? static_cast<double>(correct) / pred_fg : 0.0;
  out.recall = true_fg ? static_cast<double>(correct) / true_fg : 0.0;
  return out;
}

}  // namespace amr
