#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "amr/config.hpp"
#include "amr/metrics.hpp"
#include "amr/network.hpp"
#include "amr/recalib.hpp"
#include "amr/synthdata.hpp"

namespace amr {

struct EpochStats {
  double loss_all = 0.0;
  double loss_cls = 0.0;
  double loss_cps = 0.0;
};

struct TrainResult {
  AmrModel<float> model;
  std::vector<EpochStats> epochs;
  // largest |recorded_all - (cls + cps_contribution)| seen across all steps
  double max_objective_drift = 0.0;
  double seconds = 0.0;
};

struct EvalVariant {
  double miou = 0.0;
  std::vector<double> per_class_iou;
  PixelPr pr;
};

struct MetricsReport {
  EvalVariant spotlight, compensation, weighted;
};

TrainResult train(const RunConfig& cfg, std::ostream* log = nullptr);

MetricsReport evaluate(AmrModel<float>& model, const RunConfig& cfg,
                       const std::vector<Sample>& split, double xi, double bg_threshold);

// Per-sample normalized CAM stacks at feature resolution.
struct CamPair {
  CamStack spotlight, compensation;
};
std::vector<CamPair> compute_cams(AmrModel<float>& model, const RunConfig& cfg,
                                  const std::vector<Sample>& split);

struct SweepRow {
  double xi = 0.0;
  MetricsReport report;
};
std::vector<SweepRow> xi_sweep(AmrModel<float>& model, const RunConfig& cfg,
                               const std::vector<Sample>& split,
                               const std::vector<double>& xis);

struct AblationRow {
  std::string name;
  bool use_amm_c = false, use_amm_s = false, use_cps = false;
  MetricsReport report;
};
std::vector<AblationRow> ablate(const RunConfig& base, std::ostream* log = nullptr);

struct ModFnRow {
  std::string name;
  MetricsReport report;
};
// Rows: no-AMM baseline, threshold, gaussian, identity (diagnostic).
std::vector<ModFnRow> modfn_compare(const RunConfig& base, std::ostream* log = nullptr);

void export_heatmaps(AmrModel<float>& model, const RunConfig& cfg,
                     const std::vector<Sample>& split, const std::vector<int>& indices,
                     const std::string& out_dir);

// CSV writers (header row + one row per variant).
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);
void write_modfn_csv(std::ostream& os, const std::vector<ModFnRow>& rows);
void write_report_csv(std::ostream& os, const MetricsReport& report);

}  // namespace amr
