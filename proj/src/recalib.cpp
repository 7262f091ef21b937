#include "amr/recalib.hpp"

#include <algorithm>
#include <cmath>

namespace amr {

CamStack recalibrate(const CamStack& cam_s, const CamStack& cam_c, double xi) {
  if (xi < 0.0 || xi > 1.0)
    throw ArgumentError("recalibrate: coefficient must lie in [0,1]");
  if (!cam_s.normalized || !cam_c.normalized)
    throw ArgumentError("recalibrate: both stacks must be normalized");
  if (cam_s.n_classes != cam_c.n_classes || cam_s.h != cam_c.h || cam_s.w != cam_c.w)
    throw DimensionError("recalibrate: stack shapes differ");
  if (cam_s.class_mask != cam_c.class_mask)
    throw DimensionError("recalibrate: class masks differ");
  CamStack out = cam_s;
  const float a = static_cast<float>(xi);
  const float b = static_cast<float>(1.0 - xi);
  for (std::size_t i = 0; i < out.maps.size(); ++i)
    out.maps[i] = a * cam_s.maps[i] + b * cam_c.maps[i];
  out.normalized = true;  // convex combination of [0,1] values
  return out;
}

PseudoLabel pseudo_label(const CamStack& cam, double bg_threshold) {
  if (!cam.normalized) throw ArgumentError("pseudo_label: stack must be normalized");
  PseudoLabel out;
  out.h = cam.h;
  out.w = cam.w;
  out.labels.assign(static_cast<std::size_t>(cam.h) * cam.w, 0);
  const float t = static_cast<float>(bg_threshold);
  for (int y = 0; y < cam.h; ++y)
    for (int x = 0; x < cam.w; ++x) {
      int best = -1;
      float best_v = t;
      for (int n = 0; n < cam.n_classes; ++n) {
        const float v = cam.at(n, y, x);
        if (v > best_v) {  // strict: ties keep the lower class index
          best_v = v;
          best = n;
        }
      }
      out.labels[static_cast<std::size_t>(y) * cam.w + x] =
          best < 0 ? 0 : static_cast<uint8_t>(best + 1);
    }
  return out;
}

void bilinear_resize(const float* src, int sh, int sw, float* dst, int dh, int dw) {
  const double sy = static_cast<double>(sh) / dh;
  const double sx = static_cast<double>(sw) / dw;
  for (int y = 0; y < dh; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(sh - 1, static_cast<int>(fy));
    const int y1 = std::min(sh - 1, y0 + 1);
    const double wy = fy - y0;
    for (int x = 0; x < dw; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(sw - 1, static_cast<int>(fx));
      const int x1 = std::min(sw - 1, x0 + 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * src[y0 * sw + x0] + wx * src[y0 * sw + x1]) +
                       wy * ((1 - wx) * src[y1 * sw + x0] + wx * src[y1 * sw + x1]);
      dst[y * dw + x] = static_cast<float>(v);
    }
  }
}

CamStack upsample(const CamStack& cam, int out_h, int out_w) {
  CamStack out;
  out.n_classes = cam.n_classes;
  out.h = out_h;
  out.w = out_w;
  out.normalized = cam.normalized;
  out.class_mask = cam.class_mask;
  out.maps.assign(static_cast<std::size_t>(cam.n_classes) * out_h * out_w, 0.0f);
  for (int n = 0; n < cam.n_classes; ++n)
    bilinear_resize(cam.maps.data() + static_cast<std::size_t>(n) * cam.h * cam.w, cam.h,
                    cam.w, out.maps.data() + static_cast<std::size_t>(n) * out_h * out_w,
                    out_h, out_w);
  return out;
}

}  // namespace amr
