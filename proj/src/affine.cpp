#include "embreg/affine.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace embreg {

namespace {
constexpr double kMaxCondition = 1e12;
constexpr double kMinDeterminant = 1e-12;

void check_valid(const Eigen::Matrix4d& m) {
  if (!m.allFinite()) fail(ErrorKind::SingularAffine, "affine matrix has non-finite entries");
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
    fail(ErrorKind::SingularAffine, "affine last row must be (0, 0, 0, 1)");
  if (std::abs(m.topLeftCorner<3, 3>().determinant()) <= kMinDeterminant)
    fail(ErrorKind::SingularAffine, "affine linear block is singular");
}
}  // namespace

AffineTransform::AffineTransform(const Eigen::Matrix4d& m) : m_(m) { check_valid(m_); }

AffineTransform AffineTransform::translation(const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int a = 0; a < 3; ++a) m(a, 3) = t[a];
  return AffineTransform(m);
}

AffineTransform AffineTransform::from_row_major(const std::array<double, 16>& values) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = values[static_cast<std::size_t>(r * 4 + c)];
  return AffineTransform(m);
}

std::array<double, 16> AffineTransform::row_major() const {
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(r * 4 + c)] = m_(r, c);
  return out;
}

Vec3 AffineTransform::apply(const Vec3& p) const {
  Vec3 out;
  for (int r = 0; r < 3; ++r) out[r] = m_(r, 0) * p[0] + m_(r, 1) * p[1] + m_(r, 2) * p[2] + m_(r, 3);
  return out;
}

bool AffineTransform::is_identity(double tol) const {
  return (m_ - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

AffineTransform fit_affine(const MatchSet& matches) {
  const auto n = static_cast<Eigen::Index>(matches.size());
  if (n < 4) fail(ErrorKind::DegenerateMatches, "affine fit needs at least 4 pairs, got " + std::to_string(n));

  Eigen::MatrixX4d design(n, 4);
  Eigen::MatrixX3d target(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Match& m = matches.pairs[static_cast<std::size_t>(i)];
    for (int a = 0; a < 3; ++a) {
      design(i, a) = m.moving[a];
      target(i, a) = m.fixed[a];
    }
    design(i, 3) = 1.0;
  }

  const Eigen::JacobiSVD<Eigen::MatrixX4d> svd(design);
  const auto& sv = svd.singularValues();
  if (!(sv(3) > 0.0) || sv(0) / sv(3) > kMaxCondition)
    fail(ErrorKind::DegenerateMatches, "moving points are coplanar or degenerate");
  // Householder QR on the N x 4 design with one right-hand side per output
  // row of A.
  const Eigen::ColPivHouseholderQR<Eigen::MatrixX4d> qr(design);
  const Eigen::Matrix<double, 4, 3> rows = qr.solve(target);

  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a.topRows<3>() = rows.transpose();
  if (std::abs(a.topLeftCorner<3, 3>().determinant()) <= kMinDeterminant)
    fail(ErrorKind::DegenerateMatches, "fitted affine is singular");
  return AffineTransform(a);
}

AffineTransform invert_affine(const AffineTransform& a) {
  const Eigen::Matrix3d lin = a.matrix().topLeftCorner<3, 3>();
  if (std::abs(lin.determinant()) <= kMinDeterminant) fail(ErrorKind::SingularAffine, "cannot invert singular affine");
  const Eigen::Matrix3d inv = lin.inverse();
  Eigen::Matrix4d out = Eigen::Matrix4d::Identity();
  out.topLeftCorner<3, 3>() = inv;
  out.topRightCorner<3, 1>() = -inv * a.matrix().topRightCorner<3, 1>();
  return AffineTransform(out);
}

double affine_residual(const AffineTransform& a, const MatchSet& matches) {
  double sum = 0.0;
  for (const Match& m : matches.pairs) {
    const Vec3 r = a.apply(m.moving) - m.fixed;
    sum += dot(r, r);
  }
  return sum;
}

AffineTransform rescale_affine(const AffineTransform& feature_affine, int scale) {
  if (scale < 1) fail(ErrorKind::InvalidConfig, "feature scale must be >= 1");
  if (scale == 1) return feature_affine;
  Eigen::Matrix4d to_image = Eigen::Matrix4d::Identity();
  const double s = static_cast<double>(scale);
  to_image.topLeftCorner<3, 3>() *= s;
  to_image.topRightCorner<3, 1>().setConstant((s - 1.0) / 2.0);
  Eigen::Matrix4d result = to_image * feature_affine.matrix() * to_image.inverse();
  result.row(3) << 0.0, 0.0, 0.0, 1.0;
  return AffineTransform(result);
}

}  // namespace embreg
