#pragma once

// Data-parallel inner loops with a scalar reference and vector variants
// selected at runtime.
//
// All variants accumulate each output in the same order (channel 0 first,
// unfused multiply then add), so their results are bit-identical to the
// scalar reference. Argmax ties resolve to the lowest index in every variant.

#include <cstddef>
#include <optional>
#include <string_view>

namespace embreg::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // scores[v] = sum_c key[c] * query[c * stride + v], for v in [0, n).
  void (*score_key)(const double* key, int channels, const double* query, std::size_t stride,
                    std::size_t n, double* scores);
  // out[v] = sum_c a[c * stride + v] * b[c * stride + v], for v in [0, n).
  void (*voxel_dot)(const double* a, const double* b, int channels, std::size_t stride, std::size_t n,
                    double* out);
  // Index of the first maximum of values[0, n); n must be > 0.
  std::size_t (*argmax_first)(const double* values, std::size_t n);
};

bool available(Isa isa);
Isa detect_best();

// Table for a specific ISA; throws std::invalid_argument if unavailable here.
const KernelTable& table_for(Isa isa);

// The table used by the library. Defaults to detect_best(); the EMBREG_ISA
// environment variable (scalar|avx2|neon) or force() override it.
const KernelTable& active();
void force(std::optional<Isa> isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(EMBREG_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(EMBREG_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace embreg::simd
