#include <immintrin.h>

#include "embreg/simd/kernels.hpp"

namespace embreg::simd {
namespace {

// Four voxels per register, four registers per iteration.
void score_key(const double* key, int channels, const double* query, std::size_t stride, std::size_t n,
               double* scores) {
  std::size_t v = 0;
  for (; v + 16 <= n; v += 16) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    for (int c = 0; c < channels; ++c) {
      const __m256d k = _mm256_set1_pd(key[c]);
      const double* row = query + static_cast<std::size_t>(c) * stride + v;
      a0 = _mm256_add_pd(a0, _mm256_mul_pd(k, _mm256_loadu_pd(row)));
      a1 = _mm256_add_pd(a1, _mm256_mul_pd(k, _mm256_loadu_pd(row + 4)));
      a2 = _mm256_add_pd(a2, _mm256_mul_pd(k, _mm256_loadu_pd(row + 8)));
      a3 = _mm256_add_pd(a3, _mm256_mul_pd(k, _mm256_loadu_pd(row + 12)));
    }
    _mm256_storeu_pd(scores + v, a0);
    _mm256_storeu_pd(scores + v + 4, a1);
    _mm256_storeu_pd(scores + v + 8, a2);
    _mm256_storeu_pd(scores + v + 12, a3);
  }
  for (; v + 4 <= n; v += 4) {
    __m256d a0 = _mm256_setzero_pd();
    for (int c = 0; c < channels; ++c) {
      const __m256d k = _mm256_set1_pd(key[c]);
      a0 = _mm256_add_pd(a0, _mm256_mul_pd(k, _mm256_loadu_pd(query + static_cast<std::size_t>(c) * stride + v)));
    }
    _mm256_storeu_pd(scores + v, a0);
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
  for (; v + 8 <= n; v += 8) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * stride + v;
      s0 = _mm256_add_pd(s0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
      s1 = _mm256_add_pd(s1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
    }
    _mm256_storeu_pd(out + v, s0);
    _mm256_storeu_pd(out + v + 4, s1);
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
  std::size_t v = 0;
  if (n >= 4) {
    // Per-lane running max with the index of its first occurrence.
    __m256d maxv = _mm256_loadu_pd(values);
    __m256d idxv = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    __m256d cur = idxv;
    const __m256d four = _mm256_set1_pd(4.0);
    for (v = 4; v + 4 <= n; v += 4) {
      cur = _mm256_add_pd(cur, four);
      const __m256d x = _mm256_loadu_pd(values + v);
      const __m256d gt = _mm256_cmp_pd(x, maxv, _CMP_GT_OQ);
      maxv = _mm256_blendv_pd(maxv, x, gt);
      idxv = _mm256_blendv_pd(idxv, cur, gt);
    }
    alignas(32) double m[4];
    alignas(32) double ix[4];
    _mm256_store_pd(m, maxv);
    _mm256_store_pd(ix, idxv);
    best = static_cast<std::size_t>(ix[0]);
    double bestv = m[0];
    for (int l = 1; l < 4; ++l) {
      const auto li = static_cast<std::size_t>(ix[l]);
      if (m[l] > bestv || (m[l] == bestv && li < best)) {
        bestv = m[l];
        best = li;
      }
    }
  } else {
    v = 1;
  }
  for (; v < n; ++v)
    if (values[v] > values[best]) best = v;
  return best;
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{Isa::Avx2, &score_key, &voxel_dot, &argmax_first};
}

}  // namespace embreg::simd
