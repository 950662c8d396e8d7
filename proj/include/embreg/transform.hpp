#pragma once

#include <vector>

#include "embreg/affine.hpp"
#include "embreg/grid.hpp"

namespace embreg {

inline constexpr int kDefaultSvfSteps = 7;

// Scaling and squaring: u0 = v / 2^steps, then `steps` times
// u <- u + u o (id + u), sampled trilinearly with border clamping.
DisplacementField integrate_svf(const VelocityField& v, int steps = kDefaultSvfSteps);

// Every intermediate displacement u_0 .. u_steps, kept for backpropagation.
std::vector<DisplacementField> integrate_svf_trace(const VelocityField& v, int steps);

// Given dL/du_steps, returns dL/dv through the squaring chain recorded in
// `trace` (as produced by integrate_svf_trace).
VelocityField svf_backprop(const std::vector<DisplacementField>& trace, const std::vector<Vec3>& grad_final);

// phi^-1 = phi_a^-1 o phi_c^-1 o phi_i^-1 on the fixed grid:
//   y1 = x + dense(x); y2 = y1 + coarse(y1); out = A^-1 y2.
class CompositeTransform {
 public:
  CompositeTransform() = default;
  CompositeTransform(AffineTransform affine, DisplacementField coarse, DisplacementField dense);

  // Identity stages on `fixed`.
  static CompositeTransform identity(const GridShape& fixed);

  const AffineTransform& affine() const { return affine_; }
  const DisplacementField& coarse() const { return coarse_; }
  const DisplacementField& dense() const { return dense_; }
  const GridShape& shape() const { return dense_.shape; }

  // Lazy evaluation at any fixed-grid point.
  Vec3 map_point(const Vec3& x) const;

 private:
  AffineTransform affine_;
  AffineTransform affine_inverse_;
  DisplacementField coarse_;
  DisplacementField dense_;
};

// Materialized composite map on the fixed grid.
PointMap compose(const CompositeTransform& t);

// Determinant of d map / dx per voxel: central differences inside, one-sided
// at faces. Axes of extent 1 contribute an identity column.
ScalarVolume jacobian_determinant(const PointMap& map);

template <class Tag>
ScalarVolume jacobian_determinant(const VectorField<Tag>& u) {
  return jacobian_determinant(PointMap::from_displacement(u));
}

// Fraction of voxels with determinant <= 0.
double folding_fraction(const ScalarVolume& jacobian);

}  // namespace embreg
