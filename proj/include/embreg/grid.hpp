#pragma once

// Voxel grids, trilinear sampling and warping.
//
// Every coordinate in this library is a continuous voxel coordinate ordered
// (z, y, x), i.e. (depth, height, width), with voxel (0,0,0) at the origin.
// Physical spacing is carried as metadata only.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "embreg/error.hpp"

namespace embreg {

struct Vec3 {
  std::array<double, 3> c{0.0, 0.0, 0.0};

  constexpr Vec3() = default;
  constexpr Vec3(double z, double y, double x) : c{z, y, x} {}

  constexpr double& operator[](int a) { return c[static_cast<std::size_t>(a)]; }
  constexpr double operator[](int a) const { return c[static_cast<std::size_t>(a)]; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) {
    for (int i = 0; i < 3; ++i) a[i] += b[i];
    return a;
  }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) {
    for (int i = 0; i < 3; ++i) a[i] -= b[i];
    return a;
  }
  friend constexpr Vec3 operator-(Vec3 a) {
    for (int i = 0; i < 3; ++i) a[i] = -a[i];
    return a;
  }
  friend constexpr Vec3 operator*(double s, Vec3 a) {
    for (int i = 0; i < 3; ++i) a[i] *= s;
    return a;
  }
  constexpr Vec3& operator+=(const Vec3& b) {
    for (int i = 0; i < 3; ++i) c[static_cast<std::size_t>(i)] += b[i];
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& b) {
    for (int i = 0; i < 3; ++i) c[static_cast<std::size_t>(i)] -= b[i];
    return *this;
  }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double max_abs(const Vec3& a) {
  return std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])});
}

using Index3 = std::array<int, 3>;

inline Vec3 to_vec(const Index3& i) {
  return {static_cast<double>(i[0]), static_cast<double>(i[1]), static_cast<double>(i[2])};
}

struct GridShape {
  Index3 dims{1, 1, 1};                    // D, H, W
  std::array<double, 3> spacing{1.0, 1.0, 1.0};

  GridShape() = default;
  GridShape(int d, int h, int w, std::array<double, 3> sp = {1.0, 1.0, 1.0});

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t linear(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(x);
  }
  std::size_t linear(const Index3& i) const { return linear(i[0], i[1], i[2]); }
  Index3 unravel(std::size_t v) const;
  bool contains(const Index3& i) const;

  // Same voxel lattice; spacing is ignored.
  bool same_dims(const GridShape& o) const { return dims == o.dims; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

void validate(const GridShape& shape);

struct ScalarVolume {
  GridShape shape;
  std::vector<double> values;

  ScalarVolume() = default;
  explicit ScalarVolume(const GridShape& s, double fill = 0.0)
      : shape(s), values(s.voxel_count(), fill) {}

  double& at(int z, int y, int x) { return values[shape.linear(z, y, x)]; }
  double at(int z, int y, int x) const { return values[shape.linear(z, y, x)]; }
};

struct LabelVolume {
  GridShape shape;
  std::vector<std::uint16_t> labels;  // 0 = background

  LabelVolume() = default;
  explicit LabelVolume(const GridShape& s, std::uint16_t fill = 0)
      : shape(s), labels(s.voxel_count(), fill) {}

  std::uint16_t& at(int z, int y, int x) { return labels[shape.linear(z, y, x)]; }
  std::uint16_t at(int z, int y, int x) const { return labels[shape.linear(z, y, x)]; }
};

// Dense per-voxel feature vectors stored channel-major (channel, z, y, x),
// matching the VOL1 payload order. Vectors are unit-norm or exactly zero
// ("masked").
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(const GridShape& shape, int channels);

  const GridShape& shape() const { return shape_; }
  int channels() const { return channels_; }
  std::size_t voxel_count() const { return shape_.voxel_count(); }

  std::span<double> channel(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * voxel_count(), voxel_count()};
  }
  std::span<const double> channel(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * voxel_count(), voxel_count()};
  }
  double& at(int c, std::size_t voxel) { return data_[static_cast<std::size_t>(c) * voxel_count() + voxel]; }
  double at(int c, std::size_t voxel) const {
    return data_[static_cast<std::size_t>(c) * voxel_count() + voxel];
  }

  std::vector<double> vector_at(std::size_t voxel) const;
  void set_vector(std::size_t voxel, std::span<const double> v);
  double squared_norm_at(std::size_t voxel) const;
  bool masked(std::size_t voxel) const;

  // L2-normalizes every voxel; vectors with norm below 1e-8 become zero.
  void normalize();

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

 private:
  GridShape shape_;
  int channels_ = 0;
  std::vector<double> data_;
};

inline constexpr double kMaskNorm = 1e-8;

template <class Tag>
struct VectorField {
  GridShape shape;
  std::vector<Vec3> vectors;

  VectorField() = default;
  explicit VectorField(const GridShape& s, Vec3 fill = {}) : shape(s), vectors(s.voxel_count(), fill) {}

  Vec3& at(int z, int y, int x) { return vectors[shape.linear(z, y, x)]; }
  const Vec3& at(int z, int y, int x) const { return vectors[shape.linear(z, y, x)]; }
};

struct DisplacementTag;
struct VelocityTag;

// Pullback displacement: phi^-1(x) = x + u(x), voxel units.
using DisplacementField = VectorField<DisplacementTag>;
// Stationary velocity, voxel units per unit time.
using VelocityField = VectorField<VelocityTag>;

// A materialized map from a target grid into source coordinates: for each
// target voxel x, points[x] is the source-grid position to sample.
struct PointMap {
  GridShape shape;
  std::vector<Vec3> points;

  static PointMap identity(const GridShape& shape);
  template <class Tag>
  static PointMap from_displacement(const VectorField<Tag>& u) {
    PointMap m;
    m.shape = u.shape;
    m.points.resize(u.vectors.size());
    for (std::size_t v = 0; v < u.vectors.size(); ++v) m.points[v] = to_vec(u.shape.unravel(v)) + u.vectors[v];
    return m;
  }
};

// Corner offsets and weights of the 8-neighbour trilinear blend at a point.
// Coordinates outside the grid are clamped (border replication); the
// derivative along a clamped axis is zero.
struct TrilinearStencil {
  std::array<std::size_t, 8> offsets{};
  std::array<double, 8> weights{};
  std::array<std::array<double, 8>, 3> dweights{};  // d weight / d point[axis]
};

TrilinearStencil make_stencil(const GridShape& shape, const Vec3& p);

double trilinear_sample(const ScalarVolume& volume, const Vec3& p);
void trilinear_sample(const FeatureMap& features, const Vec3& p, std::span<double> out);

template <class Tag>
Vec3 trilinear_sample(const VectorField<Tag>& field, const Vec3& p) {
  const TrilinearStencil s = make_stencil(field.shape, p);
  Vec3 r;
  for (int k = 0; k < 8; ++k) r += s.weights[static_cast<std::size_t>(k)] * field.vectors[s.offsets[static_cast<std::size_t>(k)]];
  return r;
}

// out[x] = volume(map(x)) on the map's grid.
ScalarVolume warp_scalar(const ScalarVolume& volume, const PointMap& map);
// Channel-wise warp followed by per-voxel re-normalization.
FeatureMap warp_features(const FeatureMap& features, const PointMap& map);
// Nearest-neighbour warp for categorical labels.
LabelVolume warp_labels(const LabelVolume& labels, const PointMap& map);

}  // namespace embreg
