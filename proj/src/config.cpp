#include "amr/config.hpp"

#include <fstream>
#include <sstream>

namespace amr {
namespace {

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ArgumentError("bad boolean value: " + v);
}

ModulationKind parse_modulation(const std::string& v) {
  if (v == "gaussian") return ModulationKind::Gaussian;
  if (v == "threshold") return ModulationKind::Threshold;
  if (v == "identity") return ModulationKind::Identity;
  throw ArgumentError("bad modulation kind: " + v + " (gaussian|threshold|identity)");
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& entry) {
  const auto eq = entry.find('=');
  if (eq == std::string::npos) throw ArgumentError("expected key=value, got: " + entry);
  const std::string key = entry.substr(0, eq);
  const std::string val = entry.substr(eq + 1);
  try {
    if (key == "n_classes") cfg.data.n_classes = std::stoi(val);
    else if (key == "image_size") cfg.data.image_size = std::stoi(val);
    else if (key == "train_count") cfg.data.train_count = std::stoi(val);
    else if (key == "val_count") cfg.data.val_count = std::stoi(val);
    else if (key == "max_objects_per_image") cfg.data.max_objects_per_image = std::stoi(val);
    else if (key == "noise_std") cfg.data.noise_std = std::stod(val);
    else if (key == "epochs") cfg.epochs = std::stoi(val);
    else if (key == "batch_size") cfg.batch_size = std::stoi(val);
    else if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "momentum") cfg.momentum = std::stod(val);
    else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
    else if (key == "xi") cfg.xi = std::stod(val);
    else if (key == "bg_threshold") cfg.bg_threshold = std::stod(val);
    else if (key == "modulation") cfg.modulation = parse_modulation(val);
    else if (key == "seed") { cfg.seed = std::stoull(val); cfg.data.seed = cfg.seed; }
    else if (key == "use_amm_c") cfg.use_amm_c = parse_bool(val);
    else if (key == "use_amm_s") cfg.use_amm_s = parse_bool(val);
    else if (key == "use_cps") cfg.use_cps = parse_bool(val);
    else if (key == "cps_warmup_epochs") cfg.cps_warmup_epochs = std::stoi(val);
    else if (key == "cps_lr_decay") cfg.cps_lr_decay = std::stod(val);
    else if (key == "flip_average") cfg.flip_average = parse_bool(val);
    else if (key == "k_c") cfg.k_c = std::stoi(val);
    else if (key == "k_s") cfg.k_s = std::stoi(val);
    else if (key == "eval_gamma") cfg.eval_gamma = std::stod(val);
    else throw ArgumentError("unknown config key: " + key);
  } catch (const std::invalid_argument& e) {
    throw ArgumentError("bad value for " + key + ": " + val);
  }
  if (cfg.xi < 0.0 || cfg.xi > 1.0) throw ArgumentError("xi must lie in [0,1]");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot open config file: " + path);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    apply_config_entry(cfg, line.substr(b, e - b + 1));
  }
}

std::string describe(const RunConfig& cfg) {
  std::ostringstream os;
  os << "n_classes=" << cfg.data.n_classes << " image_size=" << cfg.data.image_size
     << " train_count=" << cfg.data.train_count << " val_count=" << cfg.data.val_count
     << " epochs=" << cfg.epochs << " batch_size=" << cfg.batch_size << " lr=" << cfg.lr
     << " momentum=" << cfg.momentum << " weight_decay=" << cfg.weight_decay
     << " xi=" << cfg.xi << " bg_threshold=" << cfg.bg_threshold << " modulation="
     << (cfg.modulation == ModulationKind::Gaussian
             ? "gaussian"
             : cfg.modulation == ModulationKind::Threshold ? "threshold" : "identity")
     << " seed=" << cfg.seed << " use_amm_c=" << cfg.use_amm_c
     << " use_amm_s=" << cfg.use_amm_s << " use_cps=" << cfg.use_cps
     << " cps_warmup_epochs=" << cfg.cps_warmup_epochs
     << " cps_lr_decay=" << cfg.cps_lr_decay;
  return os.str();
}

}  // namespace amr
