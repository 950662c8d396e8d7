#include "embreg/simd/kernels.hpp"

namespace embreg::simd {
namespace {

void score_key(const double* key, int channels, const double* query, std::size_t stride, std::size_t n,
               double* scores) {
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s = s + key[c] * query[static_cast<std::size_t>(c) * stride + v];
    scores[v] = s;
  }
}

void voxel_dot(const double* a, const double* b, int channels, std::size_t stride, std::size_t n,
               double* out) {
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * stride + v;
      s = s + a[i] * b[i];
    }
    out[v] = s;
  }
}

std::size_t argmax_first(const double* values, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t v = 1; v < n; ++v)
    if (values[v] > values[best]) best = v;
  return best;
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::Scalar, &score_key, &voxel_dot, &argmax_first};
}

}  // namespace embreg::simd
