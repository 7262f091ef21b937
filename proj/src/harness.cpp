#include "amr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "amr/io.hpp"
#include "amr/optim.hpp"

namespace amr {
namespace {

using Clock = std::chrono::steady_clock;

void hflip_planar(float* img, int channels, int h, int w) {
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y) {
      float* row = img + (static_cast<std::size_t>(c) * h + y) * w;
      std::reverse(row, row + w);
    }
}

// Resize to round(S*s) then center-crop (s>1) or zero-pad (s<1) back to S.
void scale_jitter(std::vector<float>& img, int S, double s) {
  const int ns = std::max(8, static_cast<int>(std::lround(S * s)));
  if (ns == S) return;
  std::vector<float> scaled(static_cast<std::size_t>(3) * ns * ns);
  for (int c = 0; c < 3; ++c)
    bilinear_resize(img.data() + static_cast<std::size_t>(c) * S * S, S, S,
                    scaled.data() + static_cast<std::size_t>(c) * ns * ns, ns, ns);
  std::vector<float> out(static_cast<std::size_t>(3) * S * S, 0.0f);
  const int off = std::abs(ns - S) / 2;
  const int copy = std::min(S, ns);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < copy; ++y)
      for (int x = 0; x < copy; ++x) {
        const int sy = ns > S ? y + off : y;
        const int sx = ns > S ? x + off : x;
        const int dy = ns > S ? y : y + off;
        const int dx = ns > S ? x : x + off;
        out[(static_cast<std::size_t>(c) * S + dy) * S + dx] =
            scaled[(static_cast<std::size_t>(c) * ns + sy) * ns + sx];
      }
  img = std::move(out);
}

// Zero-center the network input. The engine has no normalization layers, so
// feeding all-positive pixels gives every first-layer weight a correlated
// gradient component and slows SGD badly.
void center_pixels(float* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] -= 0.5f;
}

std::vector<float> labels_as_float(const std::vector<const Sample*>& batch, int n_classes) {
  std::vector<float> out;
  out.reserve(batch.size() * n_classes);
  for (const Sample* s : batch)
    for (int n = 0; n < n_classes; ++n) out.push_back(static_cast<float>(s->labels[n]));
  return out;
}

struct PrCounts {
  uint64_t correct = 0, pred_fg = 0, true_fg = 0;
  void add(const uint8_t* truth, const uint8_t* pred, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] != 0) ++pred_fg;
      if (truth[i] != 0) ++true_fg;
      if (truth[i] != 0 && pred[i] == truth[i]) ++correct;
    }
  }
  PixelPr pr() const {
    PixelPr out;
    out.precision = pred_fg ? static_cast<double>(correct) / pred_fg : 0.0;
    out.recall = true_fg ? static_cast<double>(correct) / true_fg : 0.0;
    return out;
  }
};

}  // namespace

TrainResult train(const RunConfig& cfg, std::ostream* log) {
  const auto t0 = Clock::now();
  DatasetConfig dc = cfg.data;
  dc.seed = cfg.seed;
  std::vector<Sample> trainset = generate_split(dc, Split::Train);

  TrainResult res;
  res.model = AmrModel<float>::init(dc.n_classes, cfg.seed, cfg.k_c, cfg.k_s);
  auto params = res.model.params(cfg.use_amm_c, cfg.use_amm_s);
  OptimState<float> opt(static_cast<float>(cfg.lr), static_cast<float>(cfg.momentum),
                        static_cast<float>(cfg.weight_decay));
  const ModulationFn fn = cfg.modulation_fn();
  const int S = dc.image_size;
  const int hw = S * S;
  const int n_batches = static_cast<int>(trainset.size()) / cfg.batch_size;
  if (n_batches == 0) throw ArgumentError("train: batch size exceeds dataset size");

  std::vector<int> order(trainset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool cps_on = cfg.use_cps && epoch >= cfg.cps_warmup_epochs;
    if (cfg.use_cps && cfg.cps_warmup_epochs > 0 && epoch == cfg.cps_warmup_epochs)
      opt.learning_rate = static_cast<float>(cfg.lr * cfg.cps_lr_decay);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xe90c0000ULL + epoch));
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    for (int bi = 0; bi < n_batches; ++bi) {
      std::vector<const Sample*> batch;
      Tensor<float> images = Tensor<float>::zeros({cfg.batch_size, 3, S, S});
      for (int i = 0; i < cfg.batch_size; ++i) {
        const Sample& s = trainset[order[bi * cfg.batch_size + i]];
        batch.push_back(&s);
        std::vector<float> img = s.image;
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5)
          hflip_planar(img.data(), 3, S, S);
        scale_jitter(img, S, std::uniform_real_distribution<double>(0.75, 1.25)(rng));
        std::copy(img.begin(), img.end(),
                  images.value().begin() + static_cast<std::size_t>(i) * 3 * hw);
      }
      center_pixels(images.value().data(), images.value().size());
      const std::vector<float> labels = labels_as_float(batch, dc.n_classes);

      Graph<float> g;
      ForwardOut<float> out = forward(g, res.model, images, fn, cfg.use_amm_c, cfg.use_amm_s);
      LossOut<float> loss = loss_total(g, out, labels, cps_on);
      // loss_cps records the term's contribution to the optimized objective:
      // exactly 0 while it is excluded, the computed value once it engages.
      const double all = loss.total.item(), cls = loss.cls.item();
      const double cps = cps_on ? loss.cps.item() : 0.0;
      if (!std::isfinite(all)) {
        std::ofstream dump("amr_diag_batch.tnsr", std::ios::binary);
        io::write_tensor(dump, images);
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(bi) + "; offending batch dumped to amr_diag_batch.tnsr");
      }
      const double expected = cls + cps;
      res.max_objective_drift = std::max(res.max_objective_drift, std::abs(all - expected));
      g.backward(loss.total);
      sgd_step(params, opt);
      stats.loss_all += all;
      stats.loss_cls += cls;
      stats.loss_cps += cps;
    }
    stats.loss_all /= n_batches;
    stats.loss_cls /= n_batches;
    stats.loss_cps /= n_batches;
    res.epochs.push_back(stats);
    if (log)
      *log << "epoch " << (epoch + 1) << "/" << cfg.epochs << std::fixed
           << std::setprecision(5) << " loss_all=" << stats.loss_all
           << " loss_cls=" << stats.loss_cls << " loss_cps=" << stats.loss_cps << "\n";
  }
  res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return res;
}

std::vector<CamPair> compute_cams(AmrModel<float>& model, const RunConfig& cfg,
                                  const std::vector<Sample>& split) {
  const ModulationFn fn = cfg.modulation_fn();
  const int S = cfg.data.image_size;
  const int hw = S * S;
  const int N = model.n_classes;
  std::vector<CamPair> out;
  out.reserve(split.size());
  const int chunk = 16;
  for (std::size_t start = 0; start < split.size(); start += chunk) {
    const int B = static_cast<int>(std::min<std::size_t>(chunk, split.size() - start));
    Tensor<float> images = Tensor<float>::zeros({B, 3, S, S});
    std::vector<float> labels(static_cast<std::size_t>(B) * N);
    for (int i = 0; i < B; ++i) {
      const Sample& s = split[start + i];
      std::copy(s.image.begin(), s.image.end(),
                images.value().begin() + static_cast<std::size_t>(i) * 3 * hw);
      for (int n = 0; n < N; ++n) labels[static_cast<std::size_t>(i) * N + n] = s.labels[n];
    }
    center_pixels(images.value().data(), images.value().size());
    Graph<float> g;
    ForwardOut<float> fo = forward(g, model, images, fn, cfg.use_amm_c, cfg.use_amm_s);
    const int ch = static_cast<int>(fo.cam_s.dim(2)), cw = static_cast<int>(fo.cam_s.dim(3));
    Tensor<float> ns = fo.cam_s;
    Tensor<float> nc = fo.cam_c;
    const float gamma = static_cast<float>(cfg.eval_gamma);
    normalize_cam_eval(ns.value(), labels, static_cast<int64_t>(ch) * cw, gamma);
    normalize_cam_eval(nc.value(), labels, static_cast<int64_t>(ch) * cw, gamma);
    if (cfg.flip_average) {
      Tensor<float> flipped = Tensor<float>::from(images.shape(), images.value());
      hflip_planar(flipped.value().data(), B * 3, S, S);
      ForwardOut<float> ff = forward(g, model, flipped, fn, cfg.use_amm_c, cfg.use_amm_s);
      Tensor<float> fns = ff.cam_s;
      Tensor<float> fnc = ff.cam_c;
      normalize_cam_eval(fns.value(), labels, static_cast<int64_t>(ch) * cw, gamma);
      normalize_cam_eval(fnc.value(), labels, static_cast<int64_t>(ch) * cw, gamma);
      hflip_planar(fns.value().data(), B * N * ch, 1, cw);
      hflip_planar(fnc.value().data(), B * N * ch, 1, cw);
      for (std::size_t i = 0; i < ns.value().size(); ++i) {
        ns.value()[i] = 0.5f * (ns.value()[i] + fns.value()[i]);
        nc.value()[i] = 0.5f * (nc.value()[i] + fnc.value()[i]);
      }
    }
    for (int i = 0; i < B; ++i) {
      CamPair pair;
      for (CamStack* st : {&pair.spotlight, &pair.compensation}) {
        st->n_classes = N;
        st->h = ch;
        st->w = cw;
        st->normalized = true;
        st->class_mask.assign(split[start + i].labels.begin(), split[start + i].labels.end());
      }
      const std::size_t stride = static_cast<std::size_t>(N) * ch * cw;
      pair.spotlight.maps.assign(ns.value().begin() + i * stride,
                                 ns.value().begin() + (i + 1) * stride);
      pair.compensation.maps.assign(nc.value().begin() + i * stride,
                                    nc.value().begin() + (i + 1) * stride);
      out.push_back(std::move(pair));
    }
  }
  return out;
}

MetricsReport evaluate(AmrModel<float>& model, const RunConfig& cfg,
                       const std::vector<Sample>& split, double xi, double bg_threshold) {
  if (!split.empty() &&
      static_cast<int>(split.front().labels.size()) != model.n_classes)
    throw ArgumentError("evaluate: dataset class count does not match checkpoint");
  const int S = cfg.data.image_size;
  const int n_labels = model.n_classes + 1;
  std::vector<CamPair> cams = compute_cams(model, cfg, split);

  ConfusionMatrix cm_s(n_labels), cm_c(n_labels), cm_w(n_labels);
  PrCounts pr_s, pr_c, pr_w;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const CamStack& s = cams[i].spotlight;
    const CamStack& c = cams[i].compensation;
    const CamStack w = recalibrate(s, c, xi);
    const std::size_t n_px = static_cast<std::size_t>(S) * S;
    const uint8_t* truth = split[i].mask.data();
    const PseudoLabel ps = pseudo_label(upsample(s, S, S), bg_threshold);
    const PseudoLabel pc = pseudo_label(upsample(c, S, S), bg_threshold);
    const PseudoLabel pw = pseudo_label(upsample(w, S, S), bg_threshold);
    cm_s.accumulate(truth, ps.labels.data(), n_px);
    cm_c.accumulate(truth, pc.labels.data(), n_px);
    cm_w.accumulate(truth, pw.labels.data(), n_px);
    pr_s.add(truth, ps.labels.data(), n_px);
    pr_c.add(truth, pc.labels.data(), n_px);
    pr_w.add(truth, pw.labels.data(), n_px);
  }
  MetricsReport rep;
  rep.spotlight = {cm_s.miou(), cm_s.per_class_iou(), pr_s.pr()};
  rep.compensation = {cm_c.miou(), cm_c.per_class_iou(), pr_c.pr()};
  rep.weighted = {cm_w.miou(), cm_w.per_class_iou(), pr_w.pr()};
  return rep;
}

std::vector<SweepRow> xi_sweep(AmrModel<float>& model, const RunConfig& cfg,
                               const std::vector<Sample>& split,
                               const std::vector<double>& xis) {
  std::vector<SweepRow> rows;
  for (double xi : xis) {
    if (xi < 0.0 || xi > 1.0) throw ArgumentError("xi_sweep: xi outside [0,1]");
    rows.push_back({xi, evaluate(model, cfg, split, xi, cfg.bg_threshold)});
  }
  return rows;
}

std::vector<AblationRow> ablate(const RunConfig& base, std::ostream* log) {
  struct RowDef {
    const char* name;
    bool c, s, cps;
  };
  const RowDef defs[] = {
      {"baseline", false, false, false},
      {"+amm_channel", true, false, false},
      {"+amm_spatial", false, true, false},
      {"+amm_channel+spatial", true, true, false},
      {"full", true, true, true},
  };
  DatasetConfig dc = base.data;
  dc.seed = base.seed;
  const std::vector<Sample> val = generate_split(dc, Split::Val);
  std::vector<AblationRow> rows;
  for (const auto& d : defs) {
    RunConfig cfg = base;
    cfg.use_amm_c = d.c;
    cfg.use_amm_s = d.s;
    cfg.use_cps = d.cps;
    if (log) *log << "[ablate] training row '" << d.name << "'\n";
    TrainResult tr = train(cfg, log);
    rows.push_back({d.name, d.c, d.s, d.cps,
                    evaluate(tr.model, cfg, val, cfg.xi, cfg.bg_threshold)});
  }
  return rows;
}

std::vector<ModFnRow> modfn_compare(const RunConfig& base, std::ostream* log) {
  DatasetConfig dc = base.data;
  dc.seed = base.seed;
  const std::vector<Sample> val = generate_split(dc, Split::Val);
  std::vector<ModFnRow> rows;

  auto run = [&](const std::string& name, RunConfig cfg) {
    if (log) *log << "[modfn] training row '" << name << "'\n";
    TrainResult tr = train(cfg, log);
    rows.push_back({name, evaluate(tr.model, cfg, val, cfg.xi, cfg.bg_threshold)});
  };

  RunConfig baseline = base;
  baseline.use_amm_c = baseline.use_amm_s = baseline.use_cps = false;
  run("baseline", baseline);
  for (auto [name, kind] :
       {std::pair{"threshold", ModulationKind::Threshold},
        std::pair{"gaussian", ModulationKind::Gaussian},
        std::pair{"identity", ModulationKind::Identity}}) {
    RunConfig cfg = base;
    cfg.use_amm_c = cfg.use_amm_s = cfg.use_cps = true;
    cfg.modulation = kind;
    run(name, cfg);
  }
  return rows;
}

void export_heatmaps(AmrModel<float>& model, const RunConfig& cfg,
                     const std::vector<Sample>& split, const std::vector<int>& indices,
                     const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int S = cfg.data.image_size;
  std::vector<Sample> picked;
  for (int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(split.size()))
      throw ArgumentError("export_heatmaps: sample index out of range");
    picked.push_back(split[idx]);
  }
  std::vector<CamPair> cams = compute_cams(model, cfg, picked);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const int idx = indices[i];
    const std::string stem = out_dir + "/sample_" + std::to_string(idx);
    io::write_ppm(stem + "_input.ppm", picked[i].image.data(), S, S);
    const CamStack& s = cams[i].spotlight;
    const CamStack& c = cams[i].compensation;
    const CamStack w = recalibrate(s, c, cfg.xi);
    const CamStack us = upsample(s, S, S), uc = upsample(c, S, S), uw = upsample(w, S, S);
    for (int n = 0; n < model.n_classes; ++n) {
      if (!picked[i].labels[n]) continue;
      const std::size_t off = static_cast<std::size_t>(n) * S * S;
      io::write_pgm_norm(stem + "_class" + std::to_string(n) + "_spotlight.pgm",
                         us.maps.data() + off, S, S);
      io::write_pgm_norm(stem + "_class" + std::to_string(n) + "_compensation.pgm",
                         uc.maps.data() + off, S, S);
      io::write_pgm_norm(stem + "_class" + std::to_string(n) + "_weighted.pgm",
                         uw.maps.data() + off, S, S);
    }
  }
}

namespace {
std::ostream& csv_num(std::ostream& os, double v) {
  os << std::fixed << std::setprecision(6) << v;
  return os;
}
}  // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "xi,miou_spotlight,miou_compensation,miou_weighted\n";
  for (const auto& r : rows) {
    csv_num(os, r.xi) << ",";
    csv_num(os, r.report.spotlight.miou) << ",";
    csv_num(os, r.report.compensation.miou) << ",";
    csv_num(os, r.report.weighted.miou) << "\n";
  }
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "row,use_amm_c,use_amm_s,use_cps,miou_spotlight,miou_compensation,miou_weighted\n";
  for (const auto& r : rows) {
    os << r.name << "," << r.use_amm_c << "," << r.use_amm_s << "," << r.use_cps << ",";
    csv_num(os, r.report.spotlight.miou) << ",";
    csv_num(os, r.report.compensation.miou) << ",";
    csv_num(os, r.report.weighted.miou) << "\n";
  }
}

void write_modfn_csv(std::ostream& os, const std::vector<ModFnRow>& rows) {
  os << "modulation,miou_spotlight,miou_compensation,miou_weighted\n";
  for (const auto& r : rows) {
    os << r.name << ",";
    csv_num(os, r.report.spotlight.miou) << ",";
    csv_num(os, r.report.compensation.miou) << ",";
    csv_num(os, r.report.weighted.miou) << "\n";
  }
}

void write_report_csv(std::ostream& os, const MetricsReport& report) {
  os << "variant,miou,fg_precision,fg_recall\n";
  const std::pair<const char*, const EvalVariant*> rows[] = {
      {"spotlight", &report.spotlight},
      {"compensation", &report.compensation},
      {"weighted", &report.weighted},
  };
  for (const auto& [name, v] : rows) {
    os << name << ",";
    csv_num(os, v->miou) << ",";
    csv_num(os, v->pr.precision) << ",";
    csv_num(os, v->pr.recall) << "\n";
  }
}

}  // namespace amr
