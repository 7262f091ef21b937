#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "amr/tensor.hpp"

namespace amr::io {

// "TNSR <rank> <d0> <d1> ..." header line, then little-endian float32 payload.
void write_tensor(std::ostream& os, const Tensor<float>& t);
Tensor<float> read_tensor(std::istream& is);

// Binary PPM (P6) from interleaved or planar RGB in [0,1].
void write_ppm(const std::string& path, const float* rgb_planar, int h, int w);
// Binary PGM (P5) from bytes.
void write_pgm(const std::string& path, const uint8_t* gray, int h, int w);
// PGM from floats in [0,1], linearly quantized (1.0 -> 255).
void write_pgm_norm(const std::string& path, const float* gray, int h, int w);

}  // namespace amr::io
