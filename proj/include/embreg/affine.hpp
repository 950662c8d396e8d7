#pragma once

#include <array>

#include <Eigen/Core>

#include "embreg/grid.hpp"
#include "embreg/match.hpp"

namespace embreg {

// 4x4 homogeneous affine acting on (z, y, x, 1). The last row is always
// (0, 0, 0, 1) and the linear block is invertible.
class AffineTransform {
 public:
  AffineTransform() : m_(Eigen::Matrix4d::Identity()) {}
  explicit AffineTransform(const Eigen::Matrix4d& m);

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(const Vec3& t);
  static AffineTransform from_row_major(const std::array<double, 16>& values);

  const Eigen::Matrix4d& matrix() const { return m_; }
  std::array<double, 16> row_major() const;

  Vec3 apply(const Vec3& p) const;
  bool is_identity(double tol = 0.0) const;

 private:
  Eigen::Matrix4d m_;
};

// Least-squares A minimizing sum ||A x~_m - x~_f||^2 over the 12 free
// entries. Needs >= 4 pairs whose moving points span 3D (condition number of
// the homogeneous design matrix <= 1e12).
AffineTransform fit_affine(const MatchSet& matches);

inline Vec3 apply_affine(const AffineTransform& a, const Vec3& p) { return a.apply(p); }

AffineTransform invert_affine(const AffineTransform& a);

// Sum of squared residuals of `a` on the matches.
double affine_residual(const AffineTransform& a, const MatchSet& matches);

// Re-expresses an affine fitted on a feature lattice with `scale` image
// voxels per feature voxel in image-voxel coordinates. Feature voxel i is
// centred on image coordinate scale * i + (scale - 1) / 2.
AffineTransform rescale_affine(const AffineTransform& feature_affine, int scale);

}  // namespace embreg
