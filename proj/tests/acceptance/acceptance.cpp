// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "vol1_oracle.hpp"

#include "embreg/coarse.hpp"
#include "embreg/instance.hpp"
#include "embreg/metrics.hpp"
#include "embreg/parallel.hpp"
#include "embreg/pipeline.hpp"
#include "embreg/synth.hpp"
#include "embreg/transform.hpp"
#include "embreg/vol1.hpp"

using namespace embreg;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail << " first failure: " << what << ";";
      ok = false;
    }
  }
};

int failures = 0;

template <class F>
void criterion(int id, const char* name, double budget_seconds, F&& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  o.require(secs < budget_seconds, "runtime over budget");
  if (!o.ok) ++failures;
  std::printf("%s %d %s (%.2fs / %.0fs)%s\n", o.ok ? "PASS" : "FAIL", id, name, secs, budget_seconds,
              o.detail.str().c_str());
  std::fflush(stdout);
}

MatchSet random_matches(std::mt19937_64& rng, int n, const GridShape& g, double jitter) {
  MatchSet m;
  for (int i = 0; i < n; ++i) {
    const Vec3 f{oracle::uniform(rng, 0, g.dims[0] - 1), oracle::uniform(rng, 0, g.dims[1] - 1),
                 oracle::uniform(rng, 0, g.dims[2] - 1)};
    Vec3 mv = f;
    for (int a = 0; a < 3; ++a) mv[a] += oracle::uniform(rng, -jitter, jitter);
    m.pairs.push_back({mv, f, 1.0});
  }
  return m;
}

double max_entry_error(const AffineTransform& a, const AffineTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

void gradients(Outcome& o) {
  double worst_coarse = 0.0, worst_instance = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const GridShape g(8, 8, 8);
    CoarseDisplacementField u(g, 4);
    u.lattice = oracle::random_field<DisplacementField>(u.lattice.shape, rng, 0.4);
    const AffineTransform a = oracle::random_affine(rng, 0.1, 1.0);
    const MatchSet m = random_matches(rng, 30, g, 1.5);
    const std::vector<Vec3> grad = coarse_gradient(u, m, a, 0.5);
    for (std::size_t i = 0; i < u.lattice.vectors.size(); ++i)
      for (int k = 0; k < 3; ++k) {
        CoarseDisplacementField p = u, q = u;
        p.lattice.vectors[i][k] += 1e-5;
        q.lattice.vectors[i][k] -= 1e-5;
        const double fd = (oracle::coarse_objective(p, m, a, 0.5) - oracle::coarse_objective(q, m, a, 0.5)) / 2e-5;
        worst_coarse = std::max(worst_coarse, oracle::relative_error(grad[i][k], fd, 1e-6));
      }

    const GridShape h(6, 6, 6);
    const FeatureMap mf = oracle::random_features(h, 6, rng), ff = oracle::random_features(h, 6, rng);
    const ScalarVolume mi = oracle::random_volume(h, rng), fi = oracle::random_volume(h, rng);
    InstanceObjectiveConfig c;
    c.intensity = static_cast<IntensityTerm>(seed % 3);
    c.lncc_window = 3;
    c.lambda_reg = 0.2;
    c.svf_steps = 4;
    const InstanceProblem prob{mf, ff, &mi, &fi};
    std::vector<Vec3> ig;
    auto check = [&](const auto& field) {
      for (int s = 0; s < 30; ++s) {
        const std::size_t i = rng() % field.vectors.size();
        const int k = static_cast<int>(rng() % 3);
        auto p = field, q = field;
        p.vectors[i][k] += 1e-6;
        q.vectors[i][k] -= 1e-6;
        const double fd = (instance_objective(p, prob, c) - instance_objective(q, prob, c)) / 2e-6;
        worst_instance = std::max(worst_instance, oracle::relative_error(ig[i][k], fd, 1e-6));
      }
    };
    if (seed % 2 == 0) {
      const DisplacementField d = oracle::random_field<DisplacementField>(h, rng, 1.2);
      instance_objective_gradient(d, prob, c, ig);
      check(d);
    } else {
      c.parameterization = Parameterization::Svf;
      const VelocityField v = oracle::random_field<VelocityField>(h, rng, 0.6);
      instance_objective_gradient(v, prob, c, ig);
      check(v);
    }
  }
  o.detail << " coarse max rel err " << worst_coarse << ", instance max rel err " << worst_instance << ";";
  o.require(worst_coarse < 1e-5, "coarse gradient");
  o.require(worst_instance < 1e-4, "instance gradient");
}

void affine_recovery(Outcome& o) {
  std::mt19937_64 rng(2000);
  double worst_clean = 0.0, worst_noisy = 0.0;
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int i = 0; i < 20; ++i) {
    const AffineTransform truth = oracle::random_affine(rng, 0.2, 5.0);
    MatchSet clean, noisy;
    for (int k = 0; k < 200; ++k) {
      const Vec3 p{oracle::uniform(rng, -16, 16), oracle::uniform(rng, -16, 16), oracle::uniform(rng, -16, 16)};
      const Vec3 q = truth.apply(p);
      clean.pairs.push_back({p, q, 1.0});
      Vec3 qn = q;
      for (int a = 0; a < 3; ++a) qn[a] += noise(rng);
      noisy.pairs.push_back({p, qn, 1.0});
    }
    worst_clean = std::max(worst_clean, max_entry_error(fit_affine(clean), truth));
    worst_noisy = std::max(worst_noisy, max_entry_error(fit_affine(noisy), truth));
  }
  o.detail << " noise-free max err " << worst_clean << ", noisy max err " << worst_noisy << ";";
  o.require(worst_clean < 1e-8, "noise-free refit");
  o.require(worst_noisy < 0.05, "noisy refit");
}

void sscc_fixed_point(Outcome& o) {
  SynthSpec s;
  s.shape = GridShape(24, 24, 24);
  s.channels = 16;
  s.feature_sigma = 2.0;
  const Atlas atlas = make_atlas(s);
  const FeatureMap& f = atlas.features;
  const MatchSet m = filter_matches(sscc(f, f, 2, 5), 0.7);
  const std::size_t keys = select_points(s.shape, 2).points.size();
  std::size_t identity = 0, cycle = 0;
  for (const Match& p : m.pairs) {
    identity += p.moving == p.fixed;
    const std::size_t xm = s.shape.linear(static_cast<int>(p.moving[0]), static_cast<int>(p.moving[1]),
                                          static_cast<int>(p.moving[2]));
    const std::size_t xf = s.shape.linear(static_cast<int>(p.fixed[0]), static_cast<int>(p.fixed[1]),
                                          static_cast<int>(p.fixed[2]));
    cycle += oracle::argmax_dot(f.vector_at(xm), f) == xf && oracle::argmax_dot(f.vector_at(xf), f) == xm;
  }
  const double frac = static_cast<double>(identity) / static_cast<double>(keys);
  o.detail << " identity " << identity << "/" << keys << ", cycle-consistent " << cycle << "/" << m.size() << ";";
  o.require(frac >= 0.99, "identity fraction");
  o.require(cycle == m.size(), "cycle predicate");
}

void regularizer_effect(Outcome& o) {
  int strict = 0;
  bool never_worse = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec s;
    s.shape = GridShape(24, 24, 24);
    s.seed = seed;
    const DisplacementField truth = integrate_svf(random_smooth_warp(s));
    std::mt19937_64 rng(3000 + seed);
    MatchSet m;
    for (int z = 1; z < 24; z += 2)
      for (int y = 1; y < 24; y += 2)
        for (int x = 1; x < 24; x += 2) {
          const Vec3 f{double(z), double(y), double(x)};
          Vec3 mv = f + truth.at(z, y, x);
          if (oracle::uniform(rng, 0, 1) < 0.05)
            for (int a = 0; a < 3; ++a) mv[a] += oracle::uniform(rng, -8, 8);
          m.pairs.push_back({mv, f, 1.0});
        }
    double fold[2];
    for (int k = 0; k < 2; ++k) {
      OptimizerConfig c;
      c.reg_weight = k;
      c.iterations = 300;
      const CoarseDisplacementField u = optimize_coarse(m, AffineTransform::identity(), s.shape, 4, c);
      fold[k] = folding_fraction(jacobian_determinant(upsample_coarse(u, s.shape)));
    }
    o.detail << " seed " << seed << ": " << fold[0] << " -> " << fold[1] << ";";
    never_worse = never_worse && fold[1] <= fold[0];
    strict += fold[1] < fold[0];
  }
  o.require(never_worse, "lambda=1 folds more than lambda=0");
  o.require(strict >= 4, "strict reduction on fewer than 4 seeds");
}

void diffeomorphism(Outcome& o) {
  bool svf_clean = true, raw_folds = false;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthSpec s;
    s.shape = GridShape(24, 24, 24);
    s.seed = seed;
    s.warp_amplitude = 1.0;
    s.warp_sigma = 4.0;
    const VelocityField v = random_smooth_warp(s);
    const double f = folding_fraction(jacobian_determinant(integrate_svf(v, 7)));
    svf_clean = svf_clean && f == 0.0;
    DisplacementField raw(s.shape);
    for (std::size_t i = 0; i < raw.vectors.size(); ++i) raw.vectors[i] = 3.0 * v.vectors[i];
    const double r = folding_fraction(jacobian_determinant(raw));
    raw_folds = raw_folds || r > 0.0;
    o.detail << " " << f << "/" << r;
  }
  o.detail << ";";
  o.require(svf_clean, "integrated svf folds");
  o.require(raw_folds, "raw displacement never folds");
}

void end_to_end(Outcome& o) {
  const int sizes[] = {24, 26, 28, 30, 32};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec s;
    const int n = sizes[seed - 1];
    s.shape = GridShape(n, n, n);
    s.seed = seed;
    s.warp_amplitude = 2.0;
    const Atlas atlas = make_atlas(s);
    const SyntheticPair p = make_pair(atlas, random_smooth_warp(s), random_affine(s.shape, seed, 10.0, 3.0));
    const RegistrationReport r = run_pipeline(PipelineConfig{}, p.moving, p.fixed).report;
    const double e0 = *r.initial_landmark_error, e1 = *r.mean_landmark_error;
    o.detail << " seed " << seed << " lm " << e0 << "->" << e1 << " dice " << *r.initial_mean_dice << "->" << r.mean_dice;
    o.require(e1 <= 0.5 * e0, "landmark error reduction");
    o.require(r.mean_dice > *r.initial_mean_dice, "dice increase");
    o.require(r.stages.size() == 3, "three stages");
    for (std::size_t k = 1; k < r.stages.size(); ++k)
      o.require(*r.stages[k].landmark_error <= *r.stages[k - 1].landmark_error, "stage monotonicity");
    o.detail << ";";
  }
}

void metric_identities(Outcome& o) {
  std::mt19937_64 rng(4000);
  const GridShape g(6, 6, 6);
  LabelVolume l(g);
  for (auto& v : l.labels) v = static_cast<std::uint16_t>(rng() % 4);
  for (const auto& [k, v] : dice(l, l).per_label) o.require(v == 1.0, "dice identical");
  LabelVolume a(g), b(g), c(g);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) a.at(z, y, x) = 1, b.at(z + 3, y + 3, x + 3) = 1, c.at(z, y, x + 1) = 1;
  o.require(dice(a, b).per_label.at(1) == 0.0, "dice disjoint");
  o.require(dice(a, c).per_label.at(1) == 0.5, "dice overlap");
  const DiceResult dr = dice(l, c);
  double sum = 0.0;
  for (const auto& [k, v] : dr.per_label) sum += v;
  o.require(std::abs(dr.mean - sum / static_cast<double>(dr.per_label.size())) < 1e-12, "dice mean");

  const ScalarVolume v = oracle::random_volume(g, rng);
  ScalarVolume neg(g);
  for (std::size_t i = 0; i < v.values.size(); ++i) neg.values[i] = 4.0 - v.values[i];
  o.require(std::abs(ncc(v, v) - 1.0) < 1e-12, "ncc self");
  o.require(std::abs(ncc(v, neg) + 1.0) < 1e-12, "ncc negated");
  ScalarVolume h(GridShape(2, 2, 2)), k(GridShape(2, 2, 2));
  h.values = {1, 2, 3, 4, 5, 6, 7, 9};
  k.values = {2, 1, 4, 3, 6, 8, 7, 5};
  o.require(std::abs(ncc(h, k) - oracle::pearson(h.values, k.values)) < 1e-12, "ncc hand pair");

  const GridShape f5(5, 5, 5);
  const ScalarVolume p = oracle::random_volume(f5, rng), q = oracle::random_volume(f5, rng);
  o.require(std::abs(lncc(p, p, 3) - 1.0) < 1e-12, "lncc self");
  o.require(lncc(ScalarVolume(f5, 1.0), ScalarVolume(f5, 3.0), 3) == 0.0, "lncc constant");
  o.require(std::abs(lncc(p, q, 3) - oracle::lncc(p, q, 3)) < 1e-10, "lncc oracle");

  for (double d : jacobian_determinant(DisplacementField(g)).values) o.require(d == 1.0, "jacobian identity");
  DisplacementField scale(g), slab(GridShape(8, 5, 5));
  for (std::size_t i = 0; i < scale.vectors.size(); ++i) scale.vectors[i] = 0.3 * to_vec(g.unravel(i));
  const ScalarVolume js = jacobian_determinant(scale);
  for (int z = 1; z < 5; ++z)
    for (int y = 1; y < 5; ++y)
      for (int x = 1; x < 5; ++x) o.require(std::abs(js.at(z, y, x) - 1.3 * 1.3 * 1.3) < 1e-10, "jacobian scaling");
  for (std::size_t i = 0; i < slab.vectors.size(); ++i) {
    const Index3 idx = slab.shape.unravel(i);
    if (idx[0] >= 3 && idx[0] <= 5) slab.vectors[i][0] = -2.0 * idx[0];
  }
  const ScalarVolume jslab = jacobian_determinant(slab), ref = oracle::jacobian(PointMap::from_displacement(slab));
  for (std::size_t i = 0; i < jslab.values.size(); ++i)
    o.require(std::abs(jslab.values[i] - ref.values[i]) < 1e-12, "jacobian stencil");
  o.require(jslab.at(4, 2, 2) < 0.0, "slab folds");

  const GridShape g3(3, 3, 3);
  o.require(folding_fraction(ScalarVolume(g3, 1.0)) == 0.0, "folding identity");
  o.require(folding_fraction(ScalarVolume(g3, -1.0)) == 1.0, "folding negative");
  ScalarVolume hv(g3, 1.0);
  hv.values[0] = 0.0, hv.values[4] = -2.0, hv.values[20] = -0.1;
  o.require(folding_fraction(hv) == 3.0 / 27.0, "folding count");

  std::vector<Vec3> pts, shifted;
  for (int i = 0; i < 10; ++i) pts.push_back({oracle::uniform(rng, 0, 9), oracle::uniform(rng, 0, 9), 2});
  const Vec3 t{1, -1, 2};
  for (const Vec3& x : pts) shifted.push_back(x + t);
  o.require(landmark_error(pts, pts, [](const Vec3& x) { return x; }, {1, 1, 1}) == 0.0, "landmark identity");
  o.require(landmark_error(shifted, pts, [&](const Vec3& x) { return x + t; }, {1, 1, 1}) == 0.0,
            "landmark translation");
  const AffineTransform af = oracle::random_affine(rng);
  double manual = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) manual += norm(af.apply(pts[i]) - shifted[i]);
  o.require(std::abs(landmark_error(shifted, pts, [&](const Vec3& x) { return af.apply(x); }, {1, 1, 1}) -
                     manual / 10.0) < 1e-12,
            "landmark pointwise");
}

void format_round_trip(Outcome& o) {
  std::mt19937_64 rng(5000);
  const auto dir = std::filesystem::temp_directory_path() / "embreg_acceptance_vol1";
  std::filesystem::create_directories(dir);
  int identical = 0;
  for (int i = 0; i < 100; ++i) {
    const Vol1 c = oracle::random_container(rng);
    const std::vector<std::byte> ref = oracle::reference_encode(c);
    write_vol1(dir / "c.vol1", c);
    const Vol1 back = read_vol1(dir / "c.vol1");
    identical += encode_vol1(back) == ref && encode_vol1(c) == ref && back.values == c.values;
  }
  std::filesystem::remove_all(dir);
  o.detail << " identical " << identical << "/100;";
  o.require(identical == 100, "round trip");

  Vol1 c = oracle::random_container(rng);
  const std::vector<std::byte> good = encode_vol1(c);
  auto kind = [](std::vector<std::byte> b) {
    try {
      decode_vol1(b);
    } catch (const Error& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  std::vector<std::byte> bad = good;
  bad[0] = std::byte{'X'};
  o.require(kind(bad) == static_cast<int>(ErrorKind::NotVol1), "bad magic");
  bad = good;
  bad.pop_back();
  o.require(kind(bad) == static_cast<int>(ErrorKind::CorruptContainer), "short payload");
  bad = good;
  bad[4] = std::byte{7};
  o.require(kind(bad) == static_cast<int>(ErrorKind::CorruptContainer), "bad dtype");
  bad = good;
  bad[12] = std::byte{0xff};
  o.require(kind(bad) == static_cast<int>(ErrorKind::CorruptContainer), "inconsistent dims");
}

}  // namespace

int main() {
  set_thread_count(1);
  criterion(1, "gradient correctness", 30, gradients);
  criterion(2, "affine recovery", 5, affine_recovery);
  criterion(3, "sscc fixed point", 60, sscc_fixed_point);
  criterion(4, "regularizer effect", 60, regularizer_effect);
  criterion(5, "diffeomorphism property", 60, diffeomorphism);
  criterion(6, "end-to-end synthetic registration", 300, end_to_end);
  criterion(7, "metric identities", 30, metric_identities);
  criterion(8, "format round trip", 30, format_round_trip);
  return failures == 0 ? 0 : 1;
}
