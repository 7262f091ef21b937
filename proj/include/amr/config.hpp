#pragma once

#include <string>
#include <vector>

#include "amr/modulation.hpp"
#include "amr/synthdata.hpp"

namespace amr {

// Every knob of a run. Defaults: 8 epochs, batch 16, lr 0.01, momentum 0.9,
// weight decay 1e-4, xi 0.5, background threshold 0.25, Gaussian modulation.
struct RunConfig {
  DatasetConfig data;

  int epochs = 8;
  int batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double xi = 0.5;
  double bg_threshold = 0.25;
  ModulationKind modulation = ModulationKind::Gaussian;
  uint64_t seed = 0;

  bool use_amm_c = true;
  bool use_amm_s = true;
  bool use_cps = true;
  bool flip_average = false;  // eval-time horizontal-flip averaging

  // Two-phase schedule for the consistency term. The objective excludes the
  // consistency loss for the first cps_warmup_epochs epochs, letting the
  // classification loss shape the CAMs first; when the term engages, the
  // learning rate is multiplied once by cps_lr_decay. Training both terms at
  // full rate from a cold start lets the consistency gradient (whose
  // magnitude does not shrink as the maps agree) flatten the young feature
  // maps before they carry any signal. Ignored when use_cps is off; a warmup
  // of 0 trains both terms at the base rate throughout.
  int cps_warmup_epochs = 2;
  double cps_lr_decay = 0.5;

  int k_c = 5;  // channel AMM kernel size
  int k_s = 3;  // spatial AMM kernel size

  // Contrast exponent applied to evaluation-time CAMs after max-scaling
  // (v^gamma). 1 leaves the maps untouched; larger values sharpen each map
  // around its peak at the cost of its low tail. Sharpening narrows both
  // branches, which erodes the fused map's coverage, so the default is off.
  double eval_gamma = 1.0;

  ModulationFn modulation_fn() const {
    switch (modulation) {
      case ModulationKind::Gaussian: return ModulationFn::gaussian();
      case ModulationKind::Threshold: return ModulationFn::threshold_mean();
      case ModulationKind::Identity: return ModulationFn::identity();
    }
    return ModulationFn::gaussian();
  }
};

// Applies one "key=value" assignment; throws ArgumentError on unknown keys or
// unparsable values.
void apply_config_entry(RunConfig& cfg, const std::string& entry);

// Plain-text config file: one key=value per line, '#' starts a comment.
void load_config_file(RunConfig& cfg, const std::string& path);

std::string describe(const RunConfig& cfg);

}  // namespace amr
