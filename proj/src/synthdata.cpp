#include "amr/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "amr/tensor.hpp"  // mix_seed

namespace amr {
namespace {

constexpr int kMaxClasses = 8;

// Stripe pairs; hues are far apart so a template matcher can separate them
// from each other and from the shared body/background palette.
constexpr std::array<std::array<float, 3>, kMaxClasses> kSigBase = {{
    {0.95f, 0.08f, 0.08f},  // red
    {0.08f, 0.85f, 0.10f},  // green
    {0.12f, 0.25f, 0.95f},  // blue
    {0.95f, 0.90f, 0.05f},  // yellow
    {0.90f, 0.08f, 0.90f},  // magenta
    {0.05f, 0.90f, 0.90f},  // cyan
    {0.95f, 0.55f, 0.05f},  // orange
    {0.60f, 0.95f, 0.55f},  // pale green
}};

struct ObjectSpec {
  int cls = 0;
  bool ellipse = false;
  int x0 = 0, y0 = 0, w = 0, h = 0;  // bounding box
  int sx = 0, sy = 0, ss = 0;        // signature patch (top-left, side)
};

inline bool inside_body(const ObjectSpec& o, int x, int y) {
  if (x < o.x0 || y < o.y0 || x >= o.x0 + o.w || y >= o.y0 + o.h) return false;
  if (!o.ellipse) return true;
  const double cx = o.x0 + 0.5 * (o.w - 1), cy = o.y0 + 0.5 * (o.h - 1);
  const double rx = 0.5 * o.w, ry = 0.5 * o.h;
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

inline void body_color(int x, int y, float* rgb) {
  // shared diagonal-stripe texture, class-agnostic
  const bool a = ((x + y) / 4) % 2 == 0;
  rgb[0] = a ? 0.55f : 0.40f;
  rgb[1] = a ? 0.45f : 0.32f;
  rgb[2] = a ? 0.35f : 0.25f;
}

inline void background_color(int x, int y, float* rgb) {
  const bool a = ((x / 8) + (y / 8)) % 2 == 0;
  rgb[0] = a ? 0.18f : 0.14f;
  rgb[1] = a ? 0.18f : 0.14f;
  rgb[2] = a ? 0.22f : 0.18f;
}

bool overlaps(const ObjectSpec& a, const ObjectSpec& b) {
  return a.x0 < b.x0 + b.w && b.x0 < a.x0 + a.w && a.y0 < b.y0 + b.h && b.y0 < a.y0 + a.h;
}

// Attempts one full scene layout; returns false when placement fails.
bool try_layout(const DatasetConfig& cfg, std::mt19937_64& rng, std::vector<ObjectSpec>& out) {
  const int S = cfg.image_size;
  const double min_area = 0.15 * S * S, max_area = 0.30 * S * S;
  std::uniform_int_distribution<int> coin(0, 1);
  const int n_obj = 1 + static_cast<int>(rng() % static_cast<uint64_t>(cfg.max_objects_per_image));

  // distinct classes per image
  std::vector<int> classes(cfg.n_classes);
  for (int i = 0; i < cfg.n_classes; ++i) classes[i] = i;
  std::shuffle(classes.begin(), classes.end(), rng);

  out.clear();
  for (int i = 0; i < n_obj; ++i) {
    ObjectSpec o;
    o.cls = classes[i];
    o.ellipse = coin(rng) == 1;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      std::uniform_int_distribution<int> side(S / 4, (S * 3) / 5);
      o.w = side(rng);
      o.h = side(rng);
      double area = static_cast<double>(o.w) * o.h;
      if (o.ellipse) area *= 3.14159265358979 / 4.0;
      if (area < min_area || area > max_area) continue;
      std::uniform_int_distribution<int> px(1, S - o.w - 1), py(1, S - o.h - 1);
      o.x0 = px(rng);
      o.y0 = py(rng);
      bool clash = false;
      for (const auto& prev : out) clash = clash || overlaps(prev, o);
      if (clash) continue;

      // count body pixels, then size the signature to <= ~9% of them
      int body_px = 0;
      for (int y = o.y0; y < o.y0 + o.h; ++y)
        for (int x = o.x0; x < o.x0 + o.w; ++x)
          if (inside_body(o, x, y)) ++body_px;
      o.ss = std::max(4, static_cast<int>(std::floor(std::sqrt(0.09 * body_px))));
      while (o.ss > 4 && o.ss * o.ss * 10 > body_px) --o.ss;
      if (o.ss * o.ss * 10 > body_px) continue;

      // Drop the patch fully inside the body, preferring candidates at about
      // half the maximal off-center distance. A mid-offset signature leaves
      // an evidence gradient across the body: cells near the patch see it
      // fully, cells on the far side only partially or not at all, which is
      // what makes naive discriminative activation cover part of the object
      // while leaving the rest recoverable.
      const double bcx = o.x0 + 0.5 * (o.w - o.ss), bcy = o.y0 + 0.5 * (o.h - o.ss);
      const double reach = 0.5 * std::hypot(static_cast<double>(o.w - o.ss),
                                            static_cast<double>(o.h - o.ss));
      const double target = 0.55 * reach;
      bool sig_ok = false;
      double best = 1e30;
      for (int sattempt = 0; sattempt < 48; ++sattempt) {
        std::uniform_int_distribution<int> sx(o.x0, o.x0 + o.w - o.ss);
        std::uniform_int_distribution<int> sy(o.y0, o.y0 + o.h - o.ss);
        const int cx = sx(rng), cy = sy(rng);
        bool ok = true;
        for (int y = cy; y < cy + o.ss && ok; ++y)
          for (int x = cx; x < cx + o.ss && ok; ++x)
            ok = inside_body(o, x, y);
        if (!ok) continue;
        const double d =
            std::hypot(static_cast<double>(cx) - bcx, static_cast<double>(cy) - bcy);
        const double score = std::abs(d - target);
        if (score < best) {
          best = score;
          o.sx = cx;
          o.sy = cy;
          sig_ok = true;
        }
      }
      placed = sig_ok;
    }
    if (!placed) return false;
    out.push_back(o);
  }
  return true;
}

}  // namespace

std::array<float, 3> signature_color(int cls) { return kSigBase[cls % kMaxClasses]; }

std::array<float, 3> signature_color_alt(int cls) {
  auto c = kSigBase[cls % kMaxClasses];
  for (auto& v : c) v *= 0.65f;
  return c;
}

Sample generate_sample(const DatasetConfig& cfg, Split split, uint64_t index) {
  if (cfg.image_size < 32) throw ArgumentError("image_size must be at least 32");
  if (cfg.n_classes < 1 || cfg.n_classes > kMaxClasses)
    throw ArgumentError("n_classes must lie in [1,8]");

  const int S = cfg.image_size;
  std::vector<ObjectSpec> objects;
  // bounded resampling: a failed layout draws a fresh derived stream
  bool ok = false;
  for (uint64_t retry = 0; retry < 16 && !ok; ++retry) {
    std::mt19937_64 rng(
        mix_seed(mix_seed(cfg.seed, static_cast<uint64_t>(split)), index + (retry << 40)));
    ok = try_layout(cfg, rng, objects);
  }
  if (!ok) throw std::runtime_error("synthdata: object placement failed");

  Sample s;
  s.image.assign(static_cast<std::size_t>(3) * S * S, 0.0f);
  s.mask.assign(static_cast<std::size_t>(S) * S, 0);
  s.labels.assign(cfg.n_classes, 0);

  const int hw = S * S;
  float rgb[3];
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      background_color(x, y, rgb);
      for (int c = 0; c < 3; ++c) s.image[c * hw + y * S + x] = rgb[c];
    }

  // later objects overwrite earlier ones
  for (const auto& o : objects) {
    const auto base = signature_color(o.cls);
    const auto alt = signature_color_alt(o.cls);
    for (int y = o.y0; y < o.y0 + o.h; ++y)
      for (int x = o.x0; x < o.x0 + o.w; ++x) {
        if (!inside_body(o, x, y)) continue;
        const bool in_sig =
            x >= o.sx && x < o.sx + o.ss && y >= o.sy && y < o.sy + o.ss;
        if (in_sig) {
          const auto& c = ((y - o.sy) / 2) % 2 == 0 ? base : alt;
          for (int ch = 0; ch < 3; ++ch) s.image[ch * hw + y * S + x] = c[ch];
        } else {
          body_color(x, y, rgb);
          for (int ch = 0; ch < 3; ++ch) s.image[ch * hw + y * S + x] = rgb[ch];
        }
        s.mask[static_cast<std::size_t>(y) * S + x] = static_cast<uint8_t>(o.cls + 1);
      }
  }

  // labels reflect post-occlusion mask occupancy
  for (uint8_t m : s.mask)
    if (m != 0) s.labels[m - 1] = 1;

  // i.i.d. pixel noise, clamped back into [0,1]
  std::mt19937_64 noise_rng(
      mix_seed(mix_seed(cfg.seed, 0x6e6f6973ULL + static_cast<uint64_t>(split)), index));
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  for (auto& v : s.image)
    v = std::min(1.0f, std::max(0.0f, v + static_cast<float>(noise(noise_rng))));

  return s;
}

std::vector<Sample> generate_split(const DatasetConfig& cfg, Split split) {
  const int count = split == Split::Train ? cfg.train_count : cfg.val_count;
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(generate_sample(cfg, split, static_cast<uint64_t>(i)));
  return out;
}

}  // namespace amr
