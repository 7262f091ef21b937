#pragma once

#include <string>

#include "amr/network.hpp"

namespace amr {

// Single-file checkpoint: a text manifest (magic, version, parameter count,
// class count, AMM kernel sizes) followed by one named tensor dump per
// parameter.
void save_checkpoint(const std::string& path, AmrModel<float>& model);
AmrModel<float> load_checkpoint(const std::string& path);

}  // namespace amr
