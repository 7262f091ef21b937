// Command-line front end for training, evaluation and the table-producing
// experiments. Every subcommand takes an optional plain-text config file plus
// repeatable key=value overrides; --seed is shorthand for -O seed=N.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amr/checkpoint.hpp"
#include "amr/harness.hpp"
#include "amr/io.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "plain-text key=value config file");
  cmd->add_option("-O,--set", opts.overrides, "config override, key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "run seed (overrides config)");
}

amr::RunConfig build_config(const CommonOpts& opts) {
  amr::RunConfig cfg;
  if (!opts.config_path.empty()) amr::load_config_file(cfg, opts.config_path);
  for (const auto& e : opts.overrides) amr::apply_config_entry(cfg, e);
  if (opts.seed >= 0)
    amr::apply_config_entry(cfg, "seed=" + std::to_string(opts.seed));
  return cfg;
}

std::ostream* open_out(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return &std::cout;
  file.open(path);
  if (!file) throw amr::ArgumentError("cannot open output file: " + path);
  return &file;
}

std::vector<amr::Sample> load_split(const amr::RunConfig& cfg, const std::string& split) {
  amr::DatasetConfig dc = cfg.data;
  dc.seed = cfg.seed;
  if (split == "train") return amr::generate_split(dc, amr::Split::Train);
  if (split == "val") return amr::generate_split(dc, amr::Split::Val);
  throw amr::ArgumentError("unknown split: " + split + " (train|val)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"activation modulation and recalibration experiments"};
  app.require_subcommand(1);

  CommonOpts train_o, eval_o, sweep_o, ablate_o, modfn_o, heat_o, gen_o;
  std::string ckpt_out = "amr.ckpt", ckpt_in, csv_out, split = "val", out_dir = "heatmaps";
  std::string gen_dir = "dataset";
  std::vector<double> xis{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<int> indices{0, 1, 2, 3};
  double eval_xi = -1.0, eval_bg = -1.0;
  int gen_count = 8;
  bool quiet = false;

  auto* t = app.add_subcommand("train", "train a model and save a checkpoint");
  add_common(t, train_o);
  t->add_option("-o,--out", ckpt_out, "checkpoint output path");
  t->add_flag("-q,--quiet", quiet, "suppress per-epoch progress");

  auto* e = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  add_common(e, eval_o);
  e->add_option("-c,--checkpoint", ckpt_in, "checkpoint path")->required();
  e->add_option("--split", split, "dataset split (train|val)");
  e->add_option("--xi", eval_xi, "recalibration coefficient (default: config)");
  e->add_option("--bg-threshold", eval_bg, "background threshold (default: config)");
  e->add_option("--csv", csv_out, "CSV output path ('-' for stdout)");

  auto* x = app.add_subcommand("xi-sweep", "evaluate across recalibration coefficients");
  add_common(x, sweep_o);
  x->add_option("-c,--checkpoint", ckpt_in, "checkpoint path")->required();
  x->add_option("--xis", xis, "coefficients to sweep");
  x->add_option("--csv", csv_out, "CSV output path ('-' for stdout)");

  auto* a = app.add_subcommand("ablate", "train and score the component ablation rows");
  add_common(a, ablate_o);
  a->add_option("--csv", csv_out, "CSV output path ('-' for stdout)");
  a->add_flag("-q,--quiet", quiet, "suppress progress");

  auto* m = app.add_subcommand("modfn-compare", "train and score each modulation function");
  add_common(m, modfn_o);
  m->add_option("--csv", csv_out, "CSV output path ('-' for stdout)");
  m->add_flag("-q,--quiet", quiet, "suppress progress");

  auto* h = app.add_subcommand("export-heatmaps", "dump per-class CAM images for samples");
  add_common(h, heat_o);
  h->add_option("-c,--checkpoint", ckpt_in, "checkpoint path")->required();
  h->add_option("--split", split, "dataset split (train|val)");
  h->add_option("--indices", indices, "sample indices to export");
  h->add_option("-d,--out-dir", out_dir, "output directory");

  auto* gd = app.add_subcommand("gen-data", "write synthetic samples as PPM/PGM files");
  add_common(gd, gen_o);
  gd->add_option("--split", split, "dataset split (train|val)");
  gd->add_option("-n,--count", gen_count, "number of samples to write");
  gd->add_option("-d,--out-dir", gen_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) {
      amr::RunConfig cfg = build_config(train_o);
      amr::TrainResult tr = amr::train(cfg, quiet ? nullptr : &std::cerr);
      amr::save_checkpoint(ckpt_out, tr.model);
      std::cerr << "saved " << ckpt_out << " after " << tr.epochs.size() << " epochs ("
                << tr.seconds << "s, objective drift " << tr.max_objective_drift << ")\n";
    } else if (e->parsed()) {
      amr::RunConfig cfg = build_config(eval_o);
      auto model = amr::load_checkpoint(ckpt_in);
      auto samples = load_split(cfg, split);
      const double xi = eval_xi >= 0 ? eval_xi : cfg.xi;
      const double bg = eval_bg >= 0 ? eval_bg : cfg.bg_threshold;
      auto report = amr::evaluate(model, cfg, samples, xi, bg);
      std::ofstream file;
      amr::write_report_csv(*open_out(file, csv_out), report);
    } else if (x->parsed()) {
      amr::RunConfig cfg = build_config(sweep_o);
      auto model = amr::load_checkpoint(ckpt_in);
      auto samples = load_split(cfg, split);
      auto rows = amr::xi_sweep(model, cfg, samples, xis);
      std::ofstream file;
      amr::write_sweep_csv(*open_out(file, csv_out), rows);
    } else if (a->parsed()) {
      amr::RunConfig cfg = build_config(ablate_o);
      auto rows = amr::ablate(cfg, quiet ? nullptr : &std::cerr);
      std::ofstream file;
      amr::write_ablation_csv(*open_out(file, csv_out), rows);
    } else if (m->parsed()) {
      amr::RunConfig cfg = build_config(modfn_o);
      auto rows = amr::modfn_compare(cfg, quiet ? nullptr : &std::cerr);
      std::ofstream file;
      amr::write_modfn_csv(*open_out(file, csv_out), rows);
    } else if (h->parsed()) {
      amr::RunConfig cfg = build_config(heat_o);
      auto model = amr::load_checkpoint(ckpt_in);
      auto samples = load_split(cfg, split);
      amr::export_heatmaps(model, cfg, samples, indices, out_dir);
      std::cerr << "wrote heatmaps for " << indices.size() << " samples to " << out_dir << "\n";
    } else if (gd->parsed()) {
      amr::RunConfig cfg = build_config(gen_o);
      auto samples = load_split(cfg, split);
      if (gen_count < 0 || gen_count > static_cast<int>(samples.size()))
        throw amr::ArgumentError("count exceeds split size");
      std::filesystem::create_directories(gen_dir);
      const int S = cfg.data.image_size;
      for (int i = 0; i < gen_count; ++i) {
        const std::string stem = gen_dir + "/" + split + "_" + std::to_string(i);
        amr::io::write_ppm(stem + ".ppm", samples[i].image.data(), S, S);
        // mask classes spread over the gray range for visibility
        std::vector<uint8_t> vis(samples[i].mask.size());
        for (std::size_t p = 0; p < vis.size(); ++p)
          vis[p] = static_cast<uint8_t>(samples[i].mask[p] * 255 / cfg.data.n_classes);
        amr::io::write_pgm(stem + "_mask.pgm", vis.data(), S, S);
      }
      std::cerr << "wrote " << gen_count << " samples to " << gen_dir << "\n";
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
