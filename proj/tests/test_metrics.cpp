#include "doctest.h"
#include "oracles.hpp"

#include "embreg/metrics.hpp"

using namespace embreg;

namespace {

LabelVolume cube(const GridShape& g, Index3 lo, int side, std::uint16_t label, LabelVolume base) {
  for (int z = lo[0]; z < lo[0] + side; ++z)
    for (int y = lo[1]; y < lo[1] + side; ++y)
      for (int x = lo[2]; x < lo[2] + side; ++x) base.at(z, y, x) = label;
  (void)g;
  return base;
}

LabelVolume random_labels(std::mt19937_64& rng, const GridShape& g, int count) {
  LabelVolume l(g);
  for (auto& v : l.labels) v = static_cast<std::uint16_t>(rng() % static_cast<std::uint64_t>(count + 1));
  return l;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("dice identities") {
  std::mt19937_64 rng(131);
  const GridShape g(6, 6, 6);
  const LabelVolume l = random_labels(rng, g, 3);
  const DiceResult same = dice(l, l);
  CHECK(same.per_label.size() == 3);
  for (const auto& [k, v] : same.per_label) CHECK(v == 1.0);
  CHECK(same.mean == 1.0);

  const LabelVolume a = cube(g, {0, 0, 0}, 2, 1, LabelVolume(g));
  const LabelVolume b = cube(g, {3, 3, 3}, 2, 1, LabelVolume(g));
  CHECK(dice(a, b).per_label.at(1) == 0.0);

  const LabelVolume c = cube(g, {0, 0, 1}, 2, 1, LabelVolume(g));
  CHECK(dice(a, c).per_label.at(1) == 0.5);

  CHECK(dice(LabelVolume(g), LabelVolume(g)).mean == 1.0);
  CHECK(dice(LabelVolume(g), LabelVolume(g)).per_label.empty());
}

TEST_CASE("dice counting oracle, symmetry and relabeling") {
  std::mt19937_64 rng(133);
  const GridShape g(7, 5, 6);
  const LabelVolume a = random_labels(rng, g, 4), b = random_labels(rng, g, 4);
  const DiceResult r = dice(a, b);
  double sum = 0.0;
  for (std::uint16_t k = 1; k <= 4; ++k) {
    double inter = 0, na = 0, nb = 0;
    for (std::size_t v = 0; v < a.labels.size(); ++v) {
      inter += a.labels[v] == k && b.labels[v] == k;
      na += a.labels[v] == k;
      nb += b.labels[v] == k;
    }
    CHECK(r.per_label.at(k) == doctest::Approx(2 * inter / (na + nb)).epsilon(1e-15));
    sum += r.per_label.at(k);
  }
  CHECK(std::abs(r.mean - sum / 4) < 1e-12);

  const DiceResult s = dice(b, a);
  for (const auto& [k, v] : r.per_label) CHECK(s.per_label.at(k) == v);

  const std::uint16_t perm[] = {0, 3, 4, 1, 2};
  LabelVolume pa = a, pb = b;
  for (auto& v : pa.labels) v = perm[v];
  for (auto& v : pb.labels) v = perm[v];
  const DiceResult p = dice(pa, pb);
  for (std::uint16_t k = 1; k <= 4; ++k) CHECK(p.per_label.at(perm[k]) == r.per_label.at(k));
  CHECK(std::abs(p.mean - r.mean) < 1e-12);
}

TEST_CASE("dice: labels only in one volume score zero") {
  const GridShape g(4, 4, 4);
  LabelVolume a = cube(g, {0, 0, 0}, 2, 1, LabelVolume(g));
  const LabelVolume b = cube(g, {2, 2, 2}, 2, 2, a);
  const DiceResult r = dice(a, b);
  CHECK(r.per_label.at(1) == 1.0);
  CHECK(r.per_label.at(2) == 0.0);
  CHECK(r.mean == 0.5);
  CHECK_THROWS_AS(dice(a, LabelVolume(GridShape(4, 4, 5))), Error);
}

TEST_CASE("ncc identities") {
  std::mt19937_64 rng(135);
  const GridShape g(4, 5, 3);
  const ScalarVolume v = oracle::random_volume(g, rng);
  CHECK(ncc(v, v) == doctest::Approx(1.0).epsilon(1e-14));
  ScalarVolume n(g);
  for (std::size_t i = 0; i < v.values.size(); ++i) n.values[i] = 3.0 - v.values[i];
  CHECK(ncc(v, n) == doctest::Approx(-1.0).epsilon(1e-14));

  ScalarVolume h(GridShape(2, 2, 2)), k(GridShape(2, 2, 2));
  h.values = {1, 2, 3, 4, 5, 6, 7, 9};
  k.values = {2, 1, 4, 3, 6, 8, 7, 5};
  CHECK(ncc(h, k) == doctest::Approx(oracle::pearson(h.values, k.values)).epsilon(1e-14));

  const ScalarVolume w = oracle::random_volume(g, rng);
  ScalarVolume scaled(g);
  for (std::size_t i = 0; i < v.values.size(); ++i) scaled.values[i] = 2.5 * v.values[i] - 7.0;
  CHECK(std::abs(ncc(scaled, w) - ncc(v, w)) < 1e-12);
  CHECK_THROWS_AS(ncc(v, ScalarVolume(g, 2.0)), Error);
}

TEST_CASE("lncc identities and windowed oracle") {
  std::mt19937_64 rng(137);
  const GridShape g(5, 5, 5);
  const ScalarVolume a = oracle::random_volume(g, rng), b = oracle::random_volume(g, rng);
  CHECK(lncc(a, a, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lncc(ScalarVolume(g, 1.0), ScalarVolume(g, 2.0), 3) == 0.0);
  CHECK(std::abs(lncc(a, b, 3) - oracle::lncc(a, b, 3)) < 1e-10);
  CHECK(std::abs(lncc(a, b, 9) - ncc(a, b)) < 1e-10);
  CHECK_THROWS_AS(lncc(a, b, 2), Error);
}

TEST_CASE("similarity gradients match central differences") {
  std::mt19937_64 rng(139);
  const GridShape g(4, 4, 4);
  const ScalarVolume a = oracle::random_volume(g, rng), b = oracle::random_volume(g, rng);
  const std::vector<double> gn = ncc_gradient(a, b), gl = lncc_gradient(a, b, 3);
  for (std::size_t i = 0; i < a.values.size(); i += 5) {
    ScalarVolume p = a, m = a;
    p.values[i] += 1e-6;
    m.values[i] -= 1e-6;
    CHECK(oracle::relative_error(gn[i], (ncc(p, b) - ncc(m, b)) / 2e-6, 1e-6) < 1e-5);
    CHECK(oracle::relative_error(gl[i], (lncc(p, b, 3) - lncc(m, b, 3)) / 2e-6, 1e-6) < 1e-5);
  }
}

TEST_CASE("landmark error") {
  std::mt19937_64 rng(141);
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({oracle::uniform(rng, 0, 9), oracle::uniform(rng, 0, 9), 1});
  const std::array<double, 3> unit{1, 1, 1};
  CHECK(landmark_error(pts, pts, [](const Vec3& x) { return x; }, unit) == 0.0);

  const Vec3 t{1, -2, 0.5};
  std::vector<Vec3> shifted;
  for (const Vec3& p : pts) shifted.push_back(p + t);
  CHECK(landmark_error(shifted, pts, [&](const Vec3& x) { return x + t; }, unit) == 0.0);

  const AffineTransform a = oracle::random_affine(rng);
  const std::array<double, 3> sp{2.0, 0.5, 1.5};
  std::vector<Vec3> other;
  for (int i = 0; i < 10; ++i) other.push_back({oracle::uniform(rng, 0, 9), oracle::uniform(rng, 0, 9), 4});
  double expect = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = a.apply(pts[i]) - other[i];
    expect += std::sqrt(std::pow(sp[0] * d[0], 2) + std::pow(sp[1] * d[1], 2) + std::pow(sp[2] * d[2], 2));
  }
  CHECK(landmark_error(other, pts, [&](const Vec3& x) { return a.apply(x); }, sp) ==
        doctest::Approx(expect / 10).epsilon(1e-12));
  CHECK_THROWS_AS(landmark_error(other, std::span<const Vec3>(pts).first(3), [](const Vec3& x) { return x; }, unit),
                  Error);
}

TEST_CASE("report json round trip") {
  RegistrationReport r;
  r.per_label_dice = {{1, 0.5}, {3, 0.75}};
  r.mean_dice = 0.625;
  r.folding_fraction = 0.01;
  r.mean_landmark_error = 1.25;
  r.initial_mean_dice = 0.3;
  r.stage_timings = {{"affine", 0.1}, {"coarse", 0.2}};
  StageReport s;
  s.name = "affine";
  s.seconds = 0.1;
  s.mean_dice = 0.5;
  s.extras = {{"matches", 12}};
  r.stages.push_back(s);
  const RegistrationReport back = report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  CHECK(back.per_label_dice == r.per_label_dice);
  CHECK(!back.initial_landmark_error);
  CHECK(back.stages.size() == 1);
  CHECK(back.stages[0].extras.at("matches") == 12);
  CHECK(!format_table(r).empty());
}

}
