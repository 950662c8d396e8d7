#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"

#include "embreg/match.hpp"
#include "embreg/simd/kernels.hpp"
#include "oracles.hpp"

using namespace embreg;
namespace simd = embreg::simd;

namespace {

std::vector<simd::Isa> vector_isas() {
  std::vector<simd::Isa> out;
  for (simd::Isa isa : {simd::Isa::Avx2, simd::Isa::Neon})
    if (simd::available(isa)) out.push_back(isa);
  return out;
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = oracle::uniform(rng, -1, 1);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct ForcedIsa {
  explicit ForcedIsa(simd::Isa isa) { simd::force(isa); }
  ~ForcedIsa() { simd::force(std::nullopt); }
};

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("scalar table is always available") {
  CHECK(simd::available(simd::Isa::Scalar));
  CHECK(simd::table_for(simd::Isa::Scalar).isa == simd::Isa::Scalar);
  CHECK(simd::available(simd::detect_best()));
}

TEST_CASE("score_key matches the scalar reference bit for bit") {
  std::mt19937_64 rng(21);
  const auto& ref = simd::table_for(simd::Isa::Scalar);
  for (simd::Isa isa : vector_isas()) {
    const auto& k = simd::table_for(isa);
    for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 64u, 1001u}) {
      for (int channels : {1, 2, 5, 16, 33}) {
        const std::vector<double> key = random_values(static_cast<std::size_t>(channels), rng);
        const std::vector<double> query = random_values(n * static_cast<std::size_t>(channels), rng);
        std::vector<double> a(n), b(n);
        ref.score_key(key.data(), channels, query.data(), n, n, a.data());
        k.score_key(key.data(), channels, query.data(), n, n, b.data());
        CHECK(same_bits(a, b));
      }
    }
  }
}

TEST_CASE("voxel_dot matches the scalar reference bit for bit") {
  std::mt19937_64 rng(23);
  const auto& ref = simd::table_for(simd::Isa::Scalar);
  for (simd::Isa isa : vector_isas()) {
    const auto& k = simd::table_for(isa);
    for (std::size_t n : {1u, 2u, 5u, 9u, 130u}) {
      for (int channels : {1, 3, 16}) {
        const std::vector<double> x = random_values(n * static_cast<std::size_t>(channels), rng);
        const std::vector<double> y = random_values(n * static_cast<std::size_t>(channels), rng);
        std::vector<double> a(n), b(n);
        ref.voxel_dot(x.data(), y.data(), channels, n, n, a.data());
        k.voxel_dot(x.data(), y.data(), channels, n, n, b.data());
        CHECK(same_bits(a, b));
      }
    }
  }
}

TEST_CASE("argmax_first agrees and keeps the first of ties") {
  std::mt19937_64 rng(25);
  const auto& ref = simd::table_for(simd::Isa::Scalar);
  std::vector<simd::Isa> isas = vector_isas();
  isas.push_back(simd::Isa::Scalar);
  for (simd::Isa isa : isas) {
    const auto& k = simd::table_for(isa);
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 31u, 2048u}) {
      std::vector<double> v = random_values(n, rng);
      CHECK(k.argmax_first(v.data(), n) == ref.argmax_first(v.data(), n));
      std::vector<double> flat(n, 0.25);
      CHECK(k.argmax_first(flat.data(), n) == 0);
      if (n > 3) {
        v[1] = 5.0;
        v[n - 1] = 5.0;
        CHECK(k.argmax_first(v.data(), n) == 1);
      }
    }
  }
}

TEST_CASE("scalar reference against straight loops") {
  std::mt19937_64 rng(27);
  const auto& ref = simd::table_for(simd::Isa::Scalar);
  const std::size_t n = 13;
  const int channels = 4;
  const std::vector<double> key = random_values(channels, rng);
  const std::vector<double> query = random_values(n * channels, rng);
  std::vector<double> scores(n);
  ref.score_key(key.data(), channels, query.data(), n, n, scores.data());
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s += key[static_cast<std::size_t>(c)] * query[static_cast<std::size_t>(c) * n + v];
    CHECK(scores[v] == doctest::Approx(s).epsilon(1e-15));
  }
}

TEST_CASE("matching results do not depend on the selected ISA") {
  std::mt19937_64 rng(29);
  const GridShape g(7, 6, 9);
  const FeatureMap a = oracle::random_features(g, 12, rng);
  const FeatureMap b = oracle::random_features(g, 12, rng);
  MatchSet ref;
  {
    ForcedIsa scalar(simd::Isa::Scalar);
    ref = sscc(a, b, 2, 3);
  }
  for (simd::Isa isa : vector_isas()) {
    ForcedIsa forced(isa);
    const MatchSet m = sscc(a, b, 2, 3);
    REQUIRE(m.size() == ref.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(m.pairs[i].moving == ref.pairs[i].moving);
      CHECK(m.pairs[i].fixed == ref.pairs[i].fixed);
      CHECK(m.pairs[i].score == ref.pairs[i].score);
    }
  }
}

TEST_CASE("unknown ISA request throws") {
  for (simd::Isa isa : {simd::Isa::Avx2, simd::Isa::Neon})
    if (!simd::available(isa)) CHECK_THROWS_AS(simd::table_for(isa), std::invalid_argument);
}

}
