#include "amr/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "amr/io.hpp"

namespace amr {

void save_checkpoint(const std::string& path, AmrModel<float>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  auto params = model.named_params(true, true);
  os << "AMRCKPT 1 " << params.size() << " " << model.n_classes << " "
     << model.amm.channel_kernel.dim(0) << " " << model.amm.spatial_kernel.dim(2) << "\n";
  for (auto& [name, t] : params) {
    os << name << "\n";
    io::write_tensor(os, t);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

AmrModel<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("checkpoint: empty file");
  std::istringstream hs(line);
  std::string magic;
  int version = 0, count = 0, n_classes = 0, k_c = 0, k_s = 0;
  hs >> magic >> version >> count >> n_classes >> k_c >> k_s;
  if (magic != "AMRCKPT" || version != 1)
    throw std::runtime_error("checkpoint: bad manifest in " + path);
  AmrModel<float> model = AmrModel<float>::init(n_classes, 0, k_c, k_s);
  auto params = model.named_params(true, true);
  if (static_cast<int>(params.size()) != count)
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto& [name, t] : params) {
    std::string stored;
    if (!std::getline(is, stored) || stored != name)
      throw std::runtime_error("checkpoint: expected parameter " + name);
    Tensor<float> loaded = io::read_tensor(is);
    if (loaded.shape() != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    t.value() = loaded.value();
  }
  return model;
}

}  // namespace amr
