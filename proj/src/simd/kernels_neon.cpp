#include <arm_neon.h>

#include "embreg/simd/kernels.hpp"

namespace embreg::simd {
namespace {

void score_key(const double* key, int channels, const double* query, std::size_t stride, std::size_t n,
               double* scores) {
  std::size_t v = 0;
  for (; v + 4 <= n; v += 4) {
    float64x2_t a0 = vdupq_n_f64(0.0);
    float64x2_t a1 = vdupq_n_f64(0.0);
    for (int c = 0; c < channels; ++c) {
      const float64x2_t k = vdupq_n_f64(key[c]);
      const double* row = query + static_cast<std::size_t>(c) * stride + v;
      a0 = vaddq_f64(a0, vmulq_f64(k, vld1q_f64(row)));
      a1 = vaddq_f64(a1, vmulq_f64(k, vld1q_f64(row + 2)));
    }
    vst1q_f64(scores + v, a0);
    vst1q_f64(scores + v + 2, a1);
  }
  for (; v < n; ++v) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s = s + key[c] * query[static_cast<std::size_t>(c) * stride + v];
    scores[v] = s;
  }
}

void voxel_dot(const double* a, const double* b, int channels, std::size_t stride, std::size_t n,
               double* out) {
  std::size_t v = 0;
  for (; v + 2 <= n; v += 2) {
    float64x2_t s = vdupq_n_f64(0.0);
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * stride + v;
      s = vaddq_f64(s, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    vst1q_f64(out + v, s);
  }
  for (; v < n; ++v) {
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
  std::size_t v = 1;
  if (n >= 2) {
    float64x2_t maxv = vld1q_f64(values);
    float64x2_t idxv = {0.0, 1.0};
    float64x2_t cur = idxv;
    const float64x2_t two = vdupq_n_f64(2.0);
    for (v = 2; v + 2 <= n; v += 2) {
      cur = vaddq_f64(cur, two);
      const float64x2_t x = vld1q_f64(values + v);
      const uint64x2_t gt = vcgtq_f64(x, maxv);
      maxv = vbslq_f64(gt, x, maxv);
      idxv = vbslq_f64(gt, cur, idxv);
    }
    const double m0 = vgetq_lane_f64(maxv, 0), m1 = vgetq_lane_f64(maxv, 1);
    const auto i0 = static_cast<std::size_t>(vgetq_lane_f64(idxv, 0));
    const auto i1 = static_cast<std::size_t>(vgetq_lane_f64(idxv, 1));
    best = (m1 > m0 || (m1 == m0 && i1 < i0)) ? i1 : i0;
  }
  for (; v < n; ++v)
    if (values[v] > values[best]) best = v;
  return best;
}

}  // namespace

namespace detail {
const KernelTable kNeonTable{Isa::Neon, &score_key, &voxel_dot, &argmax_first};
}

}  // namespace embreg::simd
