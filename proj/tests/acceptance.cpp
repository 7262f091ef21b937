// End-to-end acceptance gate. Runs nine checks and prints one PASS/FAIL line
// per criterion; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "../tests/gradcheck.hpp"
#include "amr/checkpoint.hpp"
#include "amr/harness.hpp"
#include "amr/metrics.hpp"
#include "amr/modulation.hpp"

using namespace amr;
namespace op = amr::ops;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::cout << "criterion " << criterion << ": " << (ok ? "PASS" : "FAIL") << " - "
            << detail << "\n";
  std::cout.flush();
  if (!ok) ++g_failures;
}

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- criterion 1: finite-difference integrity over 100 seeds ----

bool check_ops_once(uint64_t seed, std::string& err) {
  std::mt19937_64 rng(seed);
  const int archetype = static_cast<int>(seed % 5);
  gradcheck::Result res;
  switch (archetype) {
    case 0: {  // conv / relu / pool / linear / sigmoid
      auto x = gradcheck::random_tensor({1, 2, 4, 4}, rng);
      auto k = gradcheck::random_tensor({2, 2, 3, 3}, rng, 0.5);
      auto w = gradcheck::random_tensor({3, 2}, rng);
      res = gradcheck::check({x, k, w}, [](Graph<double>& g, auto& in) {
        auto conv = op::conv2d(g, in[0], in[1], 1, 1);
        auto act = op::relu(g, conv);
        auto pooled = op::pool(g, act, op::PoolMode::GlobalAvg);
        auto logits = op::linear(g, pooled, in[2]);
        return gradcheck::weighted_sum(g, op::sigmoid(g, logits));
      });
      break;
    }
    case 1: {  // broadcast arithmetic, abs, scale, mean
      auto a = gradcheck::random_tensor({2, 3, 2, 2}, rng);
      auto b = gradcheck::random_tensor({1, 3, 1, 1}, rng);
      auto c = gradcheck::random_tensor({2, 1, 2, 2}, rng);
      res = gradcheck::check({a, b, c}, [](Graph<double>& g, auto& in) {
        auto m = op::mul(g, in[0], in[1]);
        auto s = op::sub(g, m, in[2]);
        auto t = op::add(g, s, in[1]);
        auto v = op::absval(g, op::scale(g, t, 0.7));
        return op::mean_all(g, v);
      });
      break;
    }
    case 2: {  // channel conv + gaussian modulation with frozen statistics
      auto x = gradcheck::random_tensor({2, 6}, rng);
      auto k = gradcheck::random_tensor({3}, rng, 0.5);
      auto cache = std::make_shared<StatsCache>();
      res = gradcheck::check({x, k}, [cache](Graph<double>& g, auto& in) {
        ModulationFn fn = ModulationFn::gaussian();
        fn.stats_cache = cache;
        cache->rewind();
        if (!cache->entries.empty()) cache->frozen = true;
        auto conv = op::channel_conv1d(g, in[0], in[1]);
        auto mod = modulate(g, conv, fn, in[0].dim(1));
        return gradcheck::weighted_sum(g, mod);
      });
      break;
    }
    case 3: {  // cam projection + per-map peak normalization
      auto f = gradcheck::random_tensor({1, 3, 3, 3}, rng);
      auto w = gradcheck::random_tensor({2, 3}, rng);
      res = gradcheck::check({f, w}, [](Graph<double>& g, auto& in) {
        auto cam = op::cam_project(g, in[0], in[1]);
        auto pos = op::relu(g, cam);
        auto norm = op::minmax_normalize(g, pos, 9);
        return gradcheck::weighted_sum(g, norm);
      });
      break;
    }
    default: {  // sigmoid head and the fused classification loss
      auto z = gradcheck::random_tensor({2, 4}, rng);
      std::vector<double> labels(8);
      for (auto& v : labels) v = static_cast<double>(rng() % 2);
      res = gradcheck::check({z}, [labels](Graph<double>& g, auto& in) {
        auto sg = op::mean_all(g, op::sigmoid(g, in[0]));
        auto ml = op::multilabel_soft_margin(g, in[0], labels);
        return op::add(g, sg, ml);
      });
      break;
    }
  }
  if (!res.ok) err = "seed " + std::to_string(seed) + ": " + res.what;
  return res.ok;
}

bool check_full_objective(uint64_t seed, std::string& err) {
  auto model = AmrModel<double>::init(3, seed, 3, 3);
  auto imgs = Tensor<double>::zeros({1, 3, 32, 32});
  std::mt19937_64 rng(mix_seed(seed, 5));
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (auto& v : imgs.value()) v = dist(rng);
  std::vector<double> labels{1, 0, 1};
  auto cache = std::make_shared<StatsCache>();
  auto build = [&, cache](Graph<double>& g, std::vector<Tensor<double>>& in) {
    AmrModel<double> m;
    m.n_classes = 3;
    for (int i = 0; i < 4; ++i) m.backbone.convs.push_back(in[i]);
    m.w_spot = in[4];
    m.w_comp = in[5];
    m.amm.channel_kernel = in[6];
    m.amm.spatial_kernel = in[7];
    ModulationFn fn = ModulationFn::gaussian();
    fn.stats_cache = cache;
    cache->rewind();
    if (!cache->entries.empty()) cache->frozen = true;
    auto out = forward(g, m, imgs, fn);
    return loss_total(g, out, labels, true).total;
  };
  auto res = gradcheck::check_sampled(model.params(), build, 2, mix_seed(seed, 6), 1e-3, 1e-5);
  if (!res.ok) err = "objective seed " + std::to_string(seed) + ": " + res.what;
  return res.ok;
}

void criterion_1() {
  const auto t0 = Clock::now();
  std::string err;
  bool ok = true;
  for (uint64_t seed = 0; seed < 100 && ok; ++seed) {
    ok = check_ops_once(seed, err);
    if (ok && seed % 10 == 0) ok = check_full_objective(seed, err);
  }
  const double secs = elapsed(t0);
  std::ostringstream msg;
  msg << "finite differences over 100 seeds plus full objective, "
      << std::fixed << std::setprecision(1) << secs << "s";
  if (!ok) msg << " (" << err << ")";
  report(1, ok && secs < 60.0, msg.str());
}

// ---- criterion 2: modulation analytics ----

void criterion_2() {
  bool ok = true;
  std::ostringstream why;
  {
    Graph<float> g;
    auto t = Tensor<float>::from({3}, {1, 2, 3});
    auto out = modulate(g, t, ModulationFn::gaussian(), 3);
    if (std::abs(out.value()[0] - 0.4723665527f) > 1e-5f ||
        std::abs(out.value()[2] - 0.4723665527f) > 1e-5f ||
        std::abs(out.value()[1] - 1.0f) > 1e-6f) {
      ok = false;
      why << "reference triple mismatch; ";
    }
  }
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> dist(0.0, 2.0);
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 29);
    auto t = Tensor<float>::zeros({n});
    for (auto& v : t.value()) v = static_cast<float>(dist(rng));
    Graph<float> g;
    auto out = modulate(g, t, ModulationFn::gaussian(), n);
    const auto st = activation_stats(t);
    if (st.sigma < 1e-6) {
      for (auto v : out.value()) ok = ok && v == 1.0f;  // sigma floor
      continue;
    }
    for (int i = 0; i < n && ok; ++i) {
      ok = out.value()[i] > 0.0f && out.value()[i] <= 1.0f;
      for (int j = 0; j < n && ok; ++j) {
        const double di = std::abs(t.value()[i] - st.mu);
        const double dj = std::abs(t.value()[j] - st.mu);
        if (std::abs(di - dj) < 1e-7)  // symmetry
          ok = std::abs(out.value()[i] - out.value()[j]) <= 1e-5f;
        else if (di > dj)  // monotone decay
          ok = out.value()[i] <= out.value()[j] + 1e-6f;
      }
    }
    // shift covariance
    const float c = static_cast<float>(dist(rng));
    auto shifted = Tensor<float>::zeros({n});
    for (int i = 0; i < n; ++i) shifted.value()[i] = t.value()[i] + c;
    Graph<float> g2;
    auto out2 = modulate(g2, shifted, ModulationFn::gaussian(), n);
    for (int i = 0; i < n && ok; ++i)
      ok = std::abs(out2.value()[i] - out.value()[i]) <= 1e-4f;
    if (!ok) why << "property failed at trial " << trial << "; ";
  }
  report(2, ok, "gaussian reference value and properties on 1000 vectors " + why.str());
}

// ---- criterion 3: loss identities ----

void criterion_3(double train_drift) {
  bool ok = true;
  std::ostringstream why;

  // L_cps of ([1,0],[0,1]) under one present class over two pixels
  ForwardOut<float> fo;
  fo.logits_s = Tensor<float>::zeros({1, 1}, true);
  fo.logits_c = Tensor<float>::zeros({1, 1}, true);
  fo.cam_s = Tensor<float>::from({1, 1, 1, 2}, {1, 0}, true);
  fo.cam_c = Tensor<float>::from({1, 1, 1, 2}, {0, 1}, true);
  Graph<float> g;
  auto l = loss_total(g, fo, std::vector<float>{1}, true);
  if (l.cps.item() != 1.0f) {
    ok = false;
    why << "cps([1,0],[0,1])=" << l.cps.item() << "; ";
  }

  Graph<float> g2;
  auto zero = Tensor<float>::zeros({1, 1}, true);
  auto ln2 = loss_cls(g2, zero, std::vector<float>{1});
  if (std::abs(ln2.item() - std::log(2.0)) > 1e-6) {
    ok = false;
    why << "loss_cls(0,1)=" << ln2.item() << "; ";
  }

  if (!(train_drift < 1e-6)) {
    ok = false;
    why << "objective drift " << train_drift << "; ";
  }
  std::ostringstream msg;
  msg << "cps unit example, ln 2 reference, objective drift "
      << std::scientific << std::setprecision(2) << train_drift << " " << why.str();
  report(3, ok, msg.str());
}

// ---- criterion 4: miou oracle equivalence ----

void criterion_4() {
  std::mt19937_64 rng(909);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int n_labels = 2 + static_cast<int>(rng() % 5);
    const std::size_t n = 64 + rng() % 1024;
    std::vector<uint8_t> truth(n), pred(n);
    const int used = 1 + static_cast<int>(rng() % n_labels);
    for (auto& v : truth) v = static_cast<uint8_t>(rng() % used);
    for (auto& v : pred) v = static_cast<uint8_t>(rng() % n_labels);
    ConfusionMatrix cm(n_labels);
    cm.accumulate(truth.data(), pred.data(), n);

    double acc = 0.0;
    int defined = 0;
    for (int c = 0; c < n_labels; ++c) {
      uint64_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool t = truth[i] == c, p = pred[i] == c;
        if (t && p) ++inter;
        if (t || p) ++uni;
      }
      if (uni > 0) {
        acc += static_cast<double>(inter) / static_cast<double>(uni);
        ++defined;
      }
    }
    const double oracle = defined ? acc / defined : 0.0;
    ok = cm.miou() == oracle;  // same arithmetic, exact match expected
  }
  report(4, ok, "harness miou equals brute-force oracle on 1000 random pairs");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_4();

  // ---- shared trainings for the table criteria ----
  RunConfig base;
  base.seed = 0;
  std::cout << "[info] training 6 model variants on the default dataset...\n";
  std::cout.flush();

  struct Variant {
    const char* name;
    bool c, s, cps;
    ModulationKind kind;
  };
  const Variant defs[] = {
      {"baseline", false, false, false, ModulationKind::Gaussian},
      {"+amm_channel", true, false, false, ModulationKind::Gaussian},
      {"+amm_spatial", false, true, false, ModulationKind::Gaussian},
      {"+amm_channel+spatial", true, true, false, ModulationKind::Gaussian},
      {"full", true, true, true, ModulationKind::Gaussian},
      {"threshold", true, true, true, ModulationKind::Threshold},
  };

  const auto t_tables = Clock::now();
  DatasetConfig dc = base.data;
  dc.seed = base.seed;
  const std::vector<Sample> val = generate_split(dc, Split::Val);

  std::vector<double> weighted_miou;
  MetricsReport full_report;
  TrainResult full_train;
  RunConfig full_cfg;
  for (const auto& d : defs) {
    RunConfig cfg = base;
    cfg.use_amm_c = d.c;
    cfg.use_amm_s = d.s;
    cfg.use_cps = d.cps;
    cfg.modulation = d.kind;
    TrainResult tr = train(cfg);
    MetricsReport rep = evaluate(tr.model, cfg, val, cfg.xi, cfg.bg_threshold);
    weighted_miou.push_back(rep.weighted.miou);
    std::cout << "[info] " << d.name << ": weighted miou "
              << std::fixed << std::setprecision(4) << rep.weighted.miou
              << " (" << std::setprecision(1) << tr.seconds << "s)\n";
    std::cout.flush();
    if (std::string(d.name) == "full") {
      full_report = rep;
      full_train = std::move(tr);
      full_cfg = cfg;
    }
  }
  const double table_secs = elapsed(t_tables);

  criterion_3(full_train.max_objective_drift);

  // criterion 5: component ablation ordering
  {
    const double baseline = weighted_miou[0], full = weighted_miou[4];
    bool ok = full >= baseline + 0.05;
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(4) << "ablation baseline " << baseline
        << " -> full " << full;
    for (int i = 1; i <= 4; ++i) {
      if (weighted_miou[i] < weighted_miou[i - 1] - 0.01) {
        ok = false;
        msg << "; harmful step " << defs[i].name;
      }
    }
    msg << "; " << std::setprecision(1) << table_secs << "s for all rows";
    ok = ok && table_secs < 900.0;
    report(5, ok, msg.str());
  }

  // criterion 6: modulation function ordering
  {
    const double baseline = weighted_miou[0], gauss = weighted_miou[4],
                 thresh = weighted_miou[5];
    const bool ok = gauss >= thresh + 0.01 && thresh >= baseline + 0.01;
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(4) << "gaussian " << gauss << " > threshold "
        << thresh << " > baseline " << baseline;
    report(6, ok, msg.str());
  }

  // criterion 7: interior maximum over the recalibration coefficient
  {
    auto rows = xi_sweep(full_train.model, full_cfg, val, {0.1, 0.3, 0.5, 0.7, 0.9});
    const double lo = rows[0].report.weighted.miou, mid = rows[2].report.weighted.miou,
                 hi = rows[4].report.weighted.miou;
    const bool ok = mid >= lo + 0.02 && mid >= hi + 0.02;
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(4) << "weighted miou xi=0.1/0.5/0.9: " << lo
        << "/" << mid << "/" << hi;
    report(7, ok, msg.str());
  }

  // criterion 8: weighted cam coverage
  {
    const double spot = full_report.spotlight.pr.recall;
    const double weighted = full_report.weighted.pr.recall;
    const bool ok = weighted >= spot + 0.10;
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(4) << "foreground recall spotlight " << spot
        << " -> weighted " << weighted;
    report(8, ok, msg.str());
  }

  // criterion 9: byte-level determinism of checkpoints and reports
  {
    RunConfig cfg;
    cfg.data.train_count = 160;
    cfg.data.val_count = 32;
    cfg.epochs = 2;
    cfg.seed = 7;
    auto run_once = [&](const std::string& path) {
      TrainResult tr = train(cfg);
      save_checkpoint(path, tr.model);
      DatasetConfig d2 = cfg.data;
      d2.seed = cfg.seed;
      auto v = generate_split(d2, Split::Val);
      std::ostringstream csv;
      write_sweep_csv(csv, xi_sweep(tr.model, cfg, v, {0.1, 0.5, 0.9}));
      return csv.str();
    };
    const std::string p1 = "/tmp/amr_accept_a.ckpt", p2 = "/tmp/amr_accept_b.ckpt";
    const std::string csv1 = run_once(p1), csv2 = run_once(p2);
    auto slurp = [](const std::string& p) {
      std::ifstream is(p, std::ios::binary);
      std::ostringstream os;
      os << is.rdbuf();
      return os.str();
    };
    const bool ok = !csv1.empty() && csv1 == csv2 && slurp(p1) == slurp(p2);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
    report(9, ok, "repeated runs give byte-identical checkpoints and CSV reports");
  }

  if (g_failures) {
    std::cout << g_failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
