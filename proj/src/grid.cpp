#include "embreg/grid.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "embreg/parallel.hpp"

namespace embreg {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads.store(std::max(n, 1)); }
int thread_count() { return g_threads.load(); }

GridShape::GridShape(int d, int h, int w, std::array<double, 3> sp) : dims{d, h, w}, spacing(sp) {
  validate(*this);
}

Index3 GridShape::unravel(std::size_t v) const {
  const auto w = static_cast<std::size_t>(dims[2]);
  const auto h = static_cast<std::size_t>(dims[1]);
  return {static_cast<int>(v / (w * h)), static_cast<int>((v / w) % h), static_cast<int>(v % w)};
}

bool GridShape::contains(const Index3& i) const {
  for (int a = 0; a < 3; ++a)
    if (i[a] < 0 || i[a] >= dims[a]) return false;
  return true;
}

void validate(const GridShape& shape) {
  for (int a = 0; a < 3; ++a) {
    if (shape.dims[a] < 1) {
      std::ostringstream os;
      os << "grid dimension " << a << " is " << shape.dims[a];
      fail(ErrorKind::ShapeMismatch, os.str());
    }
    if (!(shape.spacing[a] > 0.0) || !std::isfinite(shape.spacing[a]))
      fail(ErrorKind::ShapeMismatch, "grid spacing must be positive");
  }
}

FeatureMap::FeatureMap(const GridShape& shape, int channels)
    : shape_(shape), channels_(channels), data_(static_cast<std::size_t>(channels) * shape.voxel_count(), 0.0) {
  if (channels < 1) fail(ErrorKind::DimensionMismatch, "feature map needs at least one channel");
}

std::vector<double> FeatureMap::vector_at(std::size_t voxel) const {
  std::vector<double> v(static_cast<std::size_t>(channels_));
  for (int c = 0; c < channels_; ++c) v[static_cast<std::size_t>(c)] = at(c, voxel);
  return v;
}

void FeatureMap::set_vector(std::size_t voxel, std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(channels_))
    fail(ErrorKind::DimensionMismatch, "vector length differs from channel count");
  for (int c = 0; c < channels_; ++c) at(c, voxel) = v[static_cast<std::size_t>(c)];
}

double FeatureMap::squared_norm_at(std::size_t voxel) const {
  double s = 0.0;
  for (int c = 0; c < channels_; ++c) s += at(c, voxel) * at(c, voxel);
  return s;
}

bool FeatureMap::masked(std::size_t voxel) const { return squared_norm_at(voxel) < kMaskNorm * kMaskNorm; }

void FeatureMap::normalize() {
  const std::size_t n = voxel_count();
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const double len = std::sqrt(squared_norm_at(v));
      const double scale = len < kMaskNorm ? 0.0 : 1.0 / len;
      for (int c = 0; c < channels_; ++c) at(c, v) *= scale;
    }
  });
}

PointMap PointMap::identity(const GridShape& shape) {
  PointMap m;
  m.shape = shape;
  m.points.resize(shape.voxel_count());
  for (std::size_t v = 0; v < m.points.size(); ++v) m.points[v] = to_vec(shape.unravel(v));
  return m;
}

TrilinearStencil make_stencil(const GridShape& shape, const Vec3& p) {
  std::array<int, 3> lo{}, hi{};
  std::array<double, 3> t{}, slope{};
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(p[a])) fail(ErrorKind::InvalidCoordinate, "non-finite sample coordinate");
    const int n = shape.dims[a];
    const double top = static_cast<double>(n - 1);
    const double q = std::clamp(p[a], 0.0, top);
    if (n == 1) {
      lo[a] = hi[a] = 0;
      t[a] = 0.0;
      slope[a] = 0.0;
      continue;
    }
    int i0 = static_cast<int>(std::floor(q));
    if (i0 >= n - 1) i0 = n - 2;
    lo[a] = i0;
    hi[a] = i0 + 1;
    t[a] = q - i0;
    slope[a] = (p[a] >= 0.0 && p[a] <= top) ? 1.0 : 0.0;
  }

  TrilinearStencil s;
  for (int k = 0; k < 8; ++k) {
    const int bz = (k >> 2) & 1, by = (k >> 1) & 1, bx = k & 1;
    const std::array<int, 3> bit{bz, by, bx};
    const auto kk = static_cast<std::size_t>(k);
    s.offsets[kk] = shape.linear(bz ? hi[0] : lo[0], by ? hi[1] : lo[1], bx ? hi[2] : lo[2]);
    std::array<double, 3> f{};
    std::array<double, 3> df{};
    for (int a = 0; a < 3; ++a) {
      f[a] = bit[a] ? t[a] : 1.0 - t[a];
      df[a] = bit[a] ? slope[a] : -slope[a];
    }
    s.weights[kk] = f[0] * f[1] * f[2];
    s.dweights[0][kk] = df[0] * f[1] * f[2];
    s.dweights[1][kk] = f[0] * df[1] * f[2];
    s.dweights[2][kk] = f[0] * f[1] * df[2];
  }
  return s;
}

double trilinear_sample(const ScalarVolume& volume, const Vec3& p) {
  const TrilinearStencil s = make_stencil(volume.shape, p);
  double r = 0.0;
  for (std::size_t k = 0; k < 8; ++k) r += s.weights[k] * volume.values[s.offsets[k]];
  return r;
}

void trilinear_sample(const FeatureMap& features, const Vec3& p, std::span<double> out) {
  if (out.size() != static_cast<std::size_t>(features.channels()))
    fail(ErrorKind::DimensionMismatch, "output span length differs from channel count");
  const TrilinearStencil s = make_stencil(features.shape(), p);
  for (int c = 0; c < features.channels(); ++c) {
    const auto ch = features.channel(c);
    double r = 0.0;
    for (std::size_t k = 0; k < 8; ++k) r += s.weights[k] * ch[s.offsets[k]];
    out[static_cast<std::size_t>(c)] = r;
  }
}

namespace {
void check_map(const PointMap& map) {
  validate(map.shape);
  if (map.points.size() != map.shape.voxel_count())
    fail(ErrorKind::ShapeMismatch, "map point count differs from its grid voxel count");
}
}  // namespace

ScalarVolume warp_scalar(const ScalarVolume& volume, const PointMap& map) {
  check_map(map);
  if (volume.values.size() != volume.shape.voxel_count())
    fail(ErrorKind::ShapeMismatch, "volume value count differs from its grid");
  ScalarVolume out(map.shape);
  parallel_for(out.values.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) out.values[v] = trilinear_sample(volume, map.points[v]);
  });
  return out;
}

FeatureMap warp_features(const FeatureMap& features, const PointMap& map) {
  check_map(map);
  FeatureMap out(map.shape, features.channels());
  const int channels = features.channels();
  parallel_for(map.points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const TrilinearStencil s = make_stencil(features.shape(), map.points[v]);
      double len2 = 0.0;
      for (int c = 0; c < channels; ++c) {
        const auto ch = features.channel(c);
        double r = 0.0;
        for (std::size_t k = 0; k < 8; ++k) r += s.weights[k] * ch[s.offsets[k]];
        out.at(c, v) = r;
        len2 += r * r;
      }
      // on-voxel samples copy the stored (already normalized) vector as is
      if (std::find(s.weights.begin(), s.weights.end(), 1.0) != s.weights.end()) continue;
      const double len = std::sqrt(len2);
      const double scale = len < kMaskNorm ? 0.0 : 1.0 / len;
      for (int c = 0; c < channels; ++c) out.at(c, v) *= scale;
    }
  });
  return out;
}

LabelVolume warp_labels(const LabelVolume& labels, const PointMap& map) {
  check_map(map);
  LabelVolume out(map.shape);
  for (std::size_t v = 0; v < map.points.size(); ++v) {
    Index3 idx{};
    for (int a = 0; a < 3; ++a) {
      const double p = map.points[v][a];
      if (!std::isfinite(p)) fail(ErrorKind::InvalidCoordinate, "non-finite sample coordinate");
      idx[a] = std::clamp(static_cast<int>(std::lround(p)), 0, labels.shape.dims[a] - 1);
    }
    out.labels[v] = labels.labels[labels.shape.linear(idx)];
  }
  return out;
}

}  // namespace embreg
