#include <algorithm>

#include "doctest.h"
#include "oracles.hpp"

#include "embreg/affine.hpp"

using namespace embreg;

namespace {

MatchSet through(const AffineTransform& a, const std::vector<Vec3>& points) {
  MatchSet m;
  for (const Vec3& p : points) m.pairs.push_back({p, a.apply(p), 1.0});
  return m;
}

std::vector<Vec3> cube_corners(double side) {
  std::vector<Vec3> out;
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) out.push_back({side * z, side * y, side * x});
  return out;
}

double max_entry_error(const AffineTransform& a, const AffineTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("affine") {

TEST_CASE("construction validates the matrix") {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(3, 0) = 1.0;
  CHECK_THROWS_AS(AffineTransform{m}, Error);
  Eigen::Matrix4d singular = Eigen::Matrix4d::Identity();
  singular(1, 1) = 0.0;
  CHECK_THROWS_AS(AffineTransform{singular}, Error);
}

TEST_CASE("apply") {
  const Vec3 p{1.5, -2, 3};
  CHECK(AffineTransform::identity().apply(p) == p);
  CHECK(AffineTransform::translation({1, 2, 3}).apply({0, 0, 0}) == Vec3{1, 2, 3});
}

TEST_CASE("inverse round trip") {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 20; ++i) {
    const AffineTransform a = oracle::random_affine(rng);
    const AffineTransform inv = invert_affine(a);
    const Vec3 p{oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10)};
    const Vec3 q = inv.apply(a.apply(p));
    for (int k = 0; k < 3; ++k) CHECK(q[k] == doctest::Approx(p[k]).epsilon(1e-9));
    CHECK(((a.matrix() * inv.matrix()) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(invert_affine(AffineTransform::identity()).is_identity());
  CHECK(invert_affine(AffineTransform::translation({1, -2, 3})).apply({0, 0, 0}) == Vec3{-1, 2, -3});
}

TEST_CASE("row-major round trip") {
  std::mt19937_64 rng(53);
  const AffineTransform a = oracle::random_affine(rng);
  CHECK(AffineTransform::from_row_major(a.row_major()).matrix() == a.matrix());
}

TEST_CASE("identity pairs fit the identity") {
  const AffineTransform a = fit_affine(through(AffineTransform::identity(), cube_corners(1.0)));
  CHECK(max_entry_error(a, AffineTransform::identity()) < 1e-12);
}

TEST_CASE("translation from cube corners") {
  const AffineTransform t = AffineTransform::translation({1, 2, 3});
  CHECK(max_entry_error(fit_affine(through(t, cube_corners(1.0))), t) < 1e-9);
}

TEST_CASE("too few or coplanar pairs are degenerate") {
  std::vector<Vec3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK_THROWS_AS(fit_affine(through(AffineTransform::identity(), three)), Error);
  std::vector<Vec3> plane{{0, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 1}, {0, 2, 3}};
  try {
    fit_affine(through(AffineTransform::identity(), plane));
    FAIL("expected DegenerateMatches");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateMatches);
  }
}

TEST_CASE("noise-free fits are exact and order independent") {
  std::mt19937_64 rng(55);
  for (int i = 0; i < 10; ++i) {
    const AffineTransform truth = oracle::random_affine(rng);
    std::vector<Vec3> pts;
    for (int k = 0; k < 30; ++k)
      pts.push_back({oracle::uniform(rng, 0, 20), oracle::uniform(rng, 0, 20), oracle::uniform(rng, 0, 20)});
    const MatchSet m = through(truth, pts);
    const AffineTransform fit = fit_affine(m);
    CHECK(max_entry_error(fit, truth) < 1e-9);
    CHECK(affine_residual(fit, m) < 1e-16 * 400 * m.size());

    MatchSet shuffled = m;
    std::shuffle(shuffled.pairs.begin(), shuffled.pairs.end(), rng);
    CHECK(max_entry_error(fit_affine(shuffled), fit) < 1e-12);
  }
}

TEST_CASE("noisy fit is a local least-squares optimum") {
  std::mt19937_64 rng(57);
  const AffineTransform truth = oracle::random_affine(rng);
  std::normal_distribution<double> noise(0.0, 0.5);
  MatchSet m;
  for (int k = 0; k < 50; ++k) {
    const Vec3 p{oracle::uniform(rng, 0, 20), oracle::uniform(rng, 0, 20), oracle::uniform(rng, 0, 20)};
    Vec3 q = truth.apply(p);
    for (int a = 0; a < 3; ++a) q[a] += noise(rng);
    m.pairs.push_back({p, q, 1.0});
  }
  const AffineTransform fit = fit_affine(m);
  const double best = affine_residual(fit, m);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      for (double d : {1e-3, -1e-3}) {
        Eigen::Matrix4d p = fit.matrix();
        p(r, c) += d;
        CHECK(affine_residual(AffineTransform(p), m) >= best);
      }
}

TEST_CASE("rescale_affine maps feature-grid fits to image coordinates") {
  std::mt19937_64 rng(59);
  const AffineTransform feat = oracle::random_affine(rng, 0.2, 2.0);
  for (int s : {1, 2, 4}) {
    const AffineTransform img = rescale_affine(feat, s);
    const double shift = 0.5 * (s - 1);
    for (int k = 0; k < 10; ++k) {
      const Vec3 p{oracle::uniform(rng, 0, 8), oracle::uniform(rng, 0, 8), oracle::uniform(rng, 0, 8)};
      const Vec3 q = feat.apply(p);
      const Vec3 pi{s * p[0] + shift, s * p[1] + shift, s * p[2] + shift};
      const Vec3 got = img.apply(pi);
      for (int a = 0; a < 3; ++a) CHECK(got[a] == doctest::Approx(s * q[a] + shift).epsilon(1e-12));
    }
  }
}

}
