#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "embreg/simd/kernels.hpp"

namespace embreg::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(EMBREG_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(EMBREG_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_best() {
  if (available(Isa::Avx2)) return Isa::Avx2;
  if (available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable& table_for(Isa isa) {
  if (!available(isa)) throw std::invalid_argument("ISA not available: " + std::string(to_string(isa)));
  switch (isa) {
#if defined(EMBREG_HAVE_AVX2)
    case Isa::Avx2: return detail::kAvx2Table;
#endif
#if defined(EMBREG_HAVE_NEON)
    case Isa::Neon: return detail::kNeonTable;
#endif
    default: return detail::kScalarTable;
  }
}

namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("EMBREG_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
      if (want == to_string(isa) && available(isa)) return &table_for(isa);
  }
  return &table_for(detect_best());
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(); }

void force(std::optional<Isa> isa) { current().store(isa ? &table_for(*isa) : initial_table()); }

}  // namespace embreg::simd
