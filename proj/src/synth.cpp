#include "embreg/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace embreg {

namespace {

constexpr std::uint64_t kStreamIntensity = 1000;
constexpr std::uint64_t kStreamLabels = 2000;
constexpr std::uint64_t kStreamWarp = 3000;
constexpr std::uint64_t kStreamAffine = 4000;

std::mt19937_64 engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + stream);
}

double draw(std::mt19937_64& e) { return std::ldexp(static_cast<double>(e() >> 11), -52) - 1.0; }

}  // namespace

void validate(const SynthSpec& spec) {
  validate(spec.shape);
  if (!(spec.feature_sigma > 0.0) || !(spec.warp_sigma > 0.0))
    fail(ErrorKind::InvalidConfig, "smoothing widths must be positive");
  if (spec.warp_amplitude < 0.0) fail(ErrorKind::InvalidConfig, "warp amplitude must be >= 0");
  if (spec.channels < 4) fail(ErrorKind::InvalidConfig, "synthetic features need at least 4 channels");
  if (spec.label_count < 1 || spec.label_count > 65535) fail(ErrorKind::InvalidConfig, "label count out of range");
}

ScalarVolume uniform_noise(const GridShape& shape, std::uint64_t seed, std::uint64_t stream) {
  ScalarVolume out(shape);
  auto e = engine(seed, stream);
  for (double& v : out.values) v = draw(e);
  return out;
}

ScalarVolume triangular_smooth(const ScalarVolume& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = radius + 1 - std::abs(k);
    total += kernel[static_cast<std::size_t>(k + radius)];
  }
  for (double& w : kernel) w /= total;

  const GridShape& g = in.shape;
  ScalarVolume cur = in;
  ScalarVolume next(g);
  for (int axis = 0; axis < 3; ++axis) {
    const auto ax = static_cast<std::size_t>(axis);
    for (std::size_t v = 0; v < cur.values.size(); ++v) {
      const Index3 idx = g.unravel(v);
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        Index3 j = idx;
        j[ax] = std::clamp(idx[ax] + k, 0, g.dims[ax] - 1);
        s += kernel[static_cast<std::size_t>(k + radius)] * cur.values[g.linear(j)];
      }
      next.values[v] = s;
    }
    std::swap(cur, next);
  }
  return cur;
}

Atlas make_atlas(const SynthSpec& spec) {
  validate(spec);
  const GridShape& g = spec.shape;
  Atlas atlas;
  atlas.features = FeatureMap(g, spec.channels);
  for (int c = 0; c < spec.channels; ++c) {
    const ScalarVolume smooth =
        triangular_smooth(uniform_noise(g, spec.seed, static_cast<std::uint64_t>(c)), spec.feature_sigma);
    std::copy(smooth.values.begin(), smooth.values.end(), atlas.features.channel(c).begin());
  }
  atlas.features.normalize();

  // Concentric ellipsoids around a jittered centre; label l is the innermost
  // ellipsoid containing the voxel.
  auto e = engine(spec.seed, kStreamLabels);
  Vec3 centre;
  std::array<double, 3> half{};
  for (int a = 0; a < 3; ++a) {
    const auto ax = static_cast<std::size_t>(a);
    const double extent = static_cast<double>(g.dims[ax] - 1);
    centre[a] = 0.5 * extent + 0.08 * extent * draw(e);
    half[ax] = 0.5 * extent * (1.0 + 0.1 * draw(e));
  }
  atlas.labels = LabelVolume(g);
  const int levels = spec.label_count;
  for (std::size_t v = 0; v < atlas.labels.labels.size(); ++v) {
    const Vec3 p = to_vec(g.unravel(v));
    for (int l = levels; l >= 1; --l) {
      const double f = 0.85 - 0.6 * static_cast<double>(l - 1) / static_cast<double>(levels);
      double r2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double d = (p[a] - centre[a]) / (f * half[static_cast<std::size_t>(a)]);
        r2 += d * d;
      }
      if (r2 <= 1.0) {
        atlas.labels.labels[v] = static_cast<std::uint16_t>(l);
        break;
      }
    }
  }

  atlas.intensity = triangular_smooth(uniform_noise(g, spec.seed, kStreamIntensity), spec.feature_sigma);
  for (std::size_t v = 0; v < atlas.intensity.values.size(); ++v)
    atlas.intensity.values[v] =
        0.2 * atlas.intensity.values[v] + static_cast<double>(atlas.labels.labels[v]) / static_cast<double>(levels);
  return atlas;
}

VelocityField random_smooth_warp(const SynthSpec& spec) {
  validate(spec);
  VelocityField v(spec.shape);
  if (spec.warp_amplitude == 0.0) return v;
  double peak = 0.0;
  for (int a = 0; a < 3; ++a) {
    const ScalarVolume comp = triangular_smooth(
        uniform_noise(spec.shape, spec.seed, kStreamWarp + static_cast<std::uint64_t>(a)), spec.warp_sigma);
    for (std::size_t i = 0; i < comp.values.size(); ++i) {
      v.vectors[i][a] = comp.values[i];
      peak = std::max(peak, std::abs(comp.values[i]));
    }
  }
  if (peak == 0.0) return v;
  const double scale = spec.warp_amplitude / peak;
  for (Vec3& x : v.vectors) x = scale * x;
  return v;
}

AffineTransform random_affine(const GridShape& shape, std::uint64_t seed, double max_degrees,
                              double max_translation) {
  auto e = engine(seed, kStreamAffine);
  const double rad = max_degrees * std::numbers::pi / 180.0;
  const Eigen::Matrix3d rot = (Eigen::AngleAxisd(rad * draw(e), Eigen::Vector3d::UnitX()) *
                               Eigen::AngleAxisd(rad * draw(e), Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(rad * draw(e), Eigen::Vector3d::UnitZ()))
                                  .toRotationMatrix();
  Eigen::Vector3d t(draw(e), draw(e), draw(e));
  if (t.norm() > 1.0) t.normalize();
  t *= max_translation;
  Eigen::Vector3d c;
  for (int a = 0; a < 3; ++a) c(a) = 0.5 * static_cast<double>(shape.dims[static_cast<std::size_t>(a)] - 1);

  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rot;
  m.topRightCorner<3, 1>() = c + t - rot * c;
  return AffineTransform(m);
}

SyntheticPair make_pair(const Atlas& atlas, const VelocityField& v, const AffineTransform& a, int landmark_step,
                        int svf_steps) {
  const GridShape& g = atlas.features.shape();
  if (!v.shape.same_dims(g) || !atlas.labels.shape.same_dims(g) || !atlas.intensity.shape.same_dims(g))
    fail(ErrorKind::ShapeMismatch, "atlas volumes and warp must share one grid");
  if (landmark_step < 1) fail(ErrorKind::InvalidStep, "landmark step must be >= 1");

  const DisplacementField forward = integrate_svf(v, svf_steps);
  VelocityField negated(v.shape);
  for (std::size_t i = 0; i < v.vectors.size(); ++i) negated.vectors[i] = -v.vectors[i];
  DisplacementField backward = integrate_svf(negated, svf_steps);

  // moving(y) = atlas(psi(A y))
  PointMap to_atlas;
  to_atlas.shape = g;
  to_atlas.points.resize(g.voxel_count());
  for (std::size_t i = 0; i < to_atlas.points.size(); ++i) {
    const Vec3 ay = a.apply(to_vec(g.unravel(i)));
    to_atlas.points[i] = ay + trilinear_sample(forward, ay);
  }

  SyntheticPair pair;
  pair.fixed.intensity = atlas.intensity;
  pair.fixed.features = atlas.features;
  pair.fixed.labels = atlas.labels;
  pair.moving.intensity = warp_scalar(atlas.intensity, to_atlas);
  pair.moving.features = warp_features(atlas.features, to_atlas);
  pair.moving.labels = warp_labels(atlas.labels, to_atlas);
  pair.ground_truth = CompositeTransform(a, DisplacementField(g), std::move(backward));

  for (int z = 2; z < g.dims[0] - 2; z += landmark_step)
    for (int y = 2; y < g.dims[1] - 2; y += landmark_step)
      for (int x = 2; x < g.dims[2] - 2; x += landmark_step) {
        const Vec3 p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
        pair.fixed.landmarks.push_back(p);
        pair.moving.landmarks.push_back(pair.ground_truth.map_point(p));
      }
  return pair;
}

}  // namespace embreg
