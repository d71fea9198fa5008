#include "leaf/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace leaf::kernels {

#if !defined(LEAF_HAVE_AVX2_TU)
const Backend* avx2_backend() { return nullptr; }
#endif

const Backend& active() {
  static const Backend* selected = []() -> const Backend* {
    const char* env = std::getenv("LEAF_KERNELS");
    if (env != nullptr && std::string_view(env) == "scalar")
      return &scalar_backend();
    if (const Backend* simd = avx2_backend()) return simd;
    return &scalar_backend();
  }();
  return *selected;
}

}  // namespace leaf::kernels
