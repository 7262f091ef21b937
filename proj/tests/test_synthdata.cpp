#include <array>
#include <cmath>
#include <set>

#include "amr/synthdata.hpp"
#include "doctest.h"

using namespace amr;

namespace {

int mask_count(const Sample& s, int cls) {
  int n = 0;
  for (uint8_t m : s.mask)
    if (m == cls + 1) ++n;
  return n;
}

double color_dist(const float* img, int hw, int idx, const std::array<float, 3>& c) {
  double d2 = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const double d = img[ch * hw + idx] - c[ch];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

// Independent detector: a class is present when enough pixels sit close to
// either of its signature stripe colors.
bool detect_class(const Sample& s, int size, int cls) {
  const int hw = size * size;
  const auto base = signature_color(cls);
  const auto alt = signature_color_alt(cls);
  int hits = 0;
  for (int i = 0; i < hw; ++i)
    if (color_dist(s.image.data(), hw, i, base) < 0.15 ||
        color_dist(s.image.data(), hw, i, alt) < 0.15)
      ++hits;
  return hits >= 8;
}

}  // namespace

TEST_CASE("generation is a pure function of seed, split and index") {
  DatasetConfig cfg;
  cfg.seed = 42;
  auto a = generate_sample(cfg, Split::Train, 7);
  auto b = generate_sample(cfg, Split::Train, 7);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);
  CHECK(a.labels == b.labels);

  CHECK(generate_sample(cfg, Split::Train, 8).image != a.image);
  CHECK(generate_sample(cfg, Split::Val, 7).image != a.image);
  DatasetConfig other = cfg;
  other.seed = 43;
  CHECK(generate_sample(other, Split::Train, 7).image != a.image);
}

TEST_CASE("labels agree with mask occupancy, classes are distinct per scene") {
  DatasetConfig cfg;
  cfg.seed = 3;
  for (uint64_t i = 0; i < 50; ++i) {
    auto s = generate_sample(cfg, Split::Train, i);
    std::set<uint8_t> seen;
    for (uint8_t m : s.mask)
      if (m != 0) seen.insert(m);
    REQUIRE(!seen.empty());
    CHECK(seen.size() <= static_cast<std::size_t>(cfg.max_objects_per_image));
    int label_count = 0;
    for (int c = 0; c < cfg.n_classes; ++c) {
      label_count += s.labels[c];
      CHECK(s.labels[c] == (seen.count(static_cast<uint8_t>(c + 1)) ? 1 : 0));
    }
    CHECK(label_count == static_cast<int>(seen.size()));
  }
}

TEST_CASE("object areas stay within the configured band") {
  DatasetConfig cfg;
  cfg.seed = 11;
  const double total = cfg.image_size * cfg.image_size;
  for (uint64_t i = 0; i < 40; ++i) {
    auto s = generate_sample(cfg, Split::Train, i);
    for (int c = 0; c < cfg.n_classes; ++c) {
      const int px = mask_count(s, c);
      if (px == 0) continue;
      CHECK(px >= 0.10 * total);
      CHECK(px <= 0.35 * total);
    }
  }
}

TEST_CASE("signature patches cover at most a tenth of each object") {
  DatasetConfig cfg;
  cfg.seed = 21;
  cfg.noise_std = 0.0;  // exact colors
  const int hw = cfg.image_size * cfg.image_size;
  for (uint64_t i = 0; i < 40; ++i) {
    auto s = generate_sample(cfg, Split::Train, i);
    for (int c = 0; c < cfg.n_classes; ++c) {
      const int body = mask_count(s, c);
      if (body == 0) continue;
      const auto base = signature_color(c);
      const auto alt = signature_color_alt(c);
      int sig = 0;
      for (int p = 0; p < hw; ++p)
        if (color_dist(s.image.data(), hw, p, base) < 1e-6 ||
            color_dist(s.image.data(), hw, p, alt) < 1e-6)
          ++sig;
      CHECK(sig > 0);  // the discriminative cue exists
      CHECK(sig * 10 <= body);
    }
  }
}

TEST_CASE("signature template matching recovers the labels") {
  DatasetConfig cfg;
  cfg.seed = 5;
  int correct = 0, total = 0;
  for (uint64_t i = 0; i < 150; ++i) {
    auto s = generate_sample(cfg, Split::Train, i);
    for (int c = 0; c < cfg.n_classes; ++c) {
      if (detect_class(s, cfg.image_size, c) == (s.labels[c] == 1)) ++correct;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total > 0.95);
}

TEST_CASE("pixel values stay in range and noise perturbs the clean scene") {
  DatasetConfig cfg;
  cfg.seed = 9;
  auto noisy = generate_sample(cfg, Split::Train, 0);
  for (float v : noisy.image) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  DatasetConfig clean_cfg = cfg;
  clean_cfg.noise_std = 0.0;
  auto clean = generate_sample(clean_cfg, Split::Train, 0);
  CHECK(clean.mask == noisy.mask);
  CHECK(clean.image != noisy.image);
  double mean_abs = 0.0;
  for (std::size_t i = 0; i < clean.image.size(); ++i)
    mean_abs += std::abs(clean.image[i] - noisy.image[i]);
  mean_abs /= clean.image.size();
  CHECK(mean_abs < 3 * cfg.noise_std);
}

TEST_CASE("split generation and config validation") {
  DatasetConfig cfg;
  cfg.train_count = 12;
  cfg.val_count = 5;
  CHECK(generate_split(cfg, Split::Train).size() == 12);
  CHECK(generate_split(cfg, Split::Val).size() == 5);

  DatasetConfig tiny = cfg;
  tiny.image_size = 16;
  CHECK_THROWS_AS(generate_sample(tiny, Split::Train, 0), ArgumentError);
  DatasetConfig many = cfg;
  many.n_classes = 9;
  CHECK_THROWS_AS(generate_sample(many, Split::Train, 0), ArgumentError);
}
