#include "amr/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "amr/common.hpp"

namespace amr::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor dump payload assumes a little-endian host");

void write_exact(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw std::runtime_error("tensor dump: write failed");
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor<float>& t) {
  os << "TNSR " << t.rank();
  for (int i = 0; i < t.rank(); ++i) os << " " << t.shape()[i];
  os << "\n";
  write_exact(os, t.value().data(), t.value().size() * sizeof(float));
}

Tensor<float> read_tensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("tensor dump: missing header");
  std::istringstream hs(line);
  std::string magic;
  int rank = -1;
  hs >> magic >> rank;
  if (magic != "TNSR" || rank < 0) throw std::runtime_error("tensor dump: bad header");
  Shape shape(rank);
  for (int i = 0; i < rank; ++i)
    if (!(hs >> shape[i])) throw std::runtime_error("tensor dump: truncated header");
  std::vector<float> data(numel(shape));
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!is) throw std::runtime_error("tensor dump: truncated payload");
  return Tensor<float>::from(std::move(shape), std::move(data));
}

void write_ppm(const std::string& path, const float* rgb_planar, int h, int w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<uint8_t> row(static_cast<std::size_t>(w) * 3);
  const int hw = h * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = rgb_planar[c * hw + y * w + x];
        v = std::min(1.0f, std::max(0.0f, v));
        row[static_cast<std::size_t>(x) * 3 + c] =
            static_cast<uint8_t>(std::lround(v * 255.0f));
      }
    write_exact(os, row.data(), row.size());
  }
}

void write_pgm(const std::string& path, const uint8_t* gray, int h, int w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  write_exact(os, gray, static_cast<std::size_t>(h) * w);
}

void write_pgm_norm(const std::string& path, const float* gray, int h, int w) {
  std::vector<uint8_t> bytes(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    float v = std::min(1.0f, std::max(0.0f, gray[i]));
    bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  write_pgm(path, bytes.data(), h, w);
}

}  // namespace amr::io
