#include "amr/kernels.hpp"

#include <cstdlib>

namespace amr::kernels {
namespace {

const Kernels& select() {
  if (std::getenv("AMR_FORCE_SCALAR") != nullptr) return scalar();
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_available()) return avx2();
#endif
  return scalar();
}

}  // namespace

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

}  // namespace amr::kernels
