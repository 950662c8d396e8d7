#include "embreg/transform.hpp"

#include <cmath>

#include "embreg/parallel.hpp"

namespace embreg {

namespace {

DisplacementField square(const DisplacementField& u) {
  DisplacementField out(u.shape);
  parallel_for(u.vectors.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const Vec3 p = to_vec(u.shape.unravel(v)) + u.vectors[v];
      out.vectors[v] = u.vectors[v] + trilinear_sample(u, p);
    }
  });
  return out;
}

DisplacementField scaled_start(const VelocityField& v, int steps) {
  if (steps < 0) fail(ErrorKind::InvalidStep, "scaling-and-squaring steps must be >= 0");
  validate(v.shape);
  if (v.vectors.size() != v.shape.voxel_count()) fail(ErrorKind::ShapeMismatch, "velocity size differs from its shape");
  const double scale = std::ldexp(1.0, -steps);
  DisplacementField u(v.shape);
  for (std::size_t i = 0; i < u.vectors.size(); ++i) u.vectors[i] = scale * v.vectors[i];
  return u;
}

}  // namespace

DisplacementField integrate_svf(const VelocityField& v, int steps) {
  DisplacementField u = scaled_start(v, steps);
  for (int s = 0; s < steps; ++s) u = square(u);
  return u;
}

std::vector<DisplacementField> integrate_svf_trace(const VelocityField& v, int steps) {
  std::vector<DisplacementField> trace;
  trace.reserve(static_cast<std::size_t>(steps) + 1);
  trace.push_back(scaled_start(v, steps));
  for (int s = 0; s < steps; ++s) trace.push_back(square(trace.back()));
  return trace;
}

VelocityField svf_backprop(const std::vector<DisplacementField>& trace, const std::vector<Vec3>& grad_final) {
  if (trace.empty()) fail(ErrorKind::InvalidStep, "empty integration trace");
  const GridShape& shape = trace.front().shape;
  if (grad_final.size() != shape.voxel_count()) fail(ErrorKind::ShapeMismatch, "gradient size differs from field");

  std::vector<Vec3> g = grad_final;
  for (std::size_t k = trace.size() - 1; k-- > 0;) {
    const DisplacementField& u = trace[k];
    std::vector<Vec3> prev = g;  // identity term of u + u o (id + u)
    for (std::size_t v = 0; v < g.size(); ++v) {
      const Vec3 p = to_vec(shape.unravel(v)) + u.vectors[v];
      const TrilinearStencil s = make_stencil(shape, p);
      for (std::size_t j = 0; j < 8; ++j) prev[s.offsets[j]] += s.weights[j] * g[v];
      for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        for (std::size_t j = 0; j < 8; ++j) d += s.dweights[static_cast<std::size_t>(a)][j] * dot(g[v], u.vectors[s.offsets[j]]);
        prev[v][a] += d;
      }
    }
    g = std::move(prev);
  }

  const double scale = std::ldexp(1.0, -static_cast<int>(trace.size() - 1));
  VelocityField out(shape);
  for (std::size_t v = 0; v < g.size(); ++v) out.vectors[v] = scale * g[v];
  return out;
}

CompositeTransform::CompositeTransform(AffineTransform affine, DisplacementField coarse, DisplacementField dense)
    : affine_(std::move(affine)),
      affine_inverse_(invert_affine(affine_)),
      coarse_(std::move(coarse)),
      dense_(std::move(dense)) {
  validate(dense_.shape);
  if (!coarse_.shape.same_dims(dense_.shape))
    fail(ErrorKind::ShapeMismatch, "coarse and dense stages must share the fixed grid");
  if (coarse_.vectors.size() != coarse_.shape.voxel_count() || dense_.vectors.size() != dense_.shape.voxel_count())
    fail(ErrorKind::ShapeMismatch, "stage field size differs from its shape");
}

CompositeTransform CompositeTransform::identity(const GridShape& fixed) {
  return {AffineTransform::identity(), DisplacementField(fixed), DisplacementField(fixed)};
}

Vec3 CompositeTransform::map_point(const Vec3& x) const {
  const Vec3 y1 = x + trilinear_sample(dense_, x);
  const Vec3 y2 = y1 + trilinear_sample(coarse_, y1);
  return affine_inverse_.apply(y2);
}

PointMap compose(const CompositeTransform& t) {
  PointMap m;
  m.shape = t.shape();
  m.points.resize(m.shape.voxel_count());
  parallel_for(m.points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) m.points[v] = t.map_point(to_vec(m.shape.unravel(v)));
  });
  return m;
}

ScalarVolume jacobian_determinant(const PointMap& map) {
  validate(map.shape);
  if (map.points.size() != map.shape.voxel_count()) fail(ErrorKind::ShapeMismatch, "map size differs from its grid");
  const GridShape& g = map.shape;
  ScalarVolume out(g);
  for (int z = 0; z < g.dims[0]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[2]; ++x) {
        const Index3 idx{z, y, x};
        double j[3][3];
        for (int a = 0; a < 3; ++a) {
          const int n = g.dims[static_cast<std::size_t>(a)];
          const int i = idx[static_cast<std::size_t>(a)];
          if (n == 1) {
            for (int r = 0; r < 3; ++r) j[r][a] = r == a ? 1.0 : 0.0;
            continue;
          }
          Index3 lo = idx, hi = idx;
          double h = 2.0;
          if (i == 0) {
            hi[static_cast<std::size_t>(a)] = 1;
            h = 1.0;
          } else if (i == n - 1) {
            lo[static_cast<std::size_t>(a)] = n - 2;
            h = 1.0;
          } else {
            lo[static_cast<std::size_t>(a)] = i - 1;
            hi[static_cast<std::size_t>(a)] = i + 1;
          }
          const Vec3 d = map.points[g.linear(hi)] - map.points[g.linear(lo)];
          for (int r = 0; r < 3; ++r) j[r][a] = d[r] / h;
        }
        out.at(z, y, x) = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                          j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                          j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
      }
  return out;
}

double folding_fraction(const ScalarVolume& jacobian) {
  if (jacobian.values.empty()) return 0.0;
  std::size_t folded = 0;
  for (double d : jacobian.values)
    if (d <= 0.0) ++folded;
  return static_cast<double>(folded) / static_cast<double>(jacobian.values.size());
}

}  // namespace embreg
