#include "embreg/coarse.hpp"

namespace embreg {

namespace {

int cells(int dim, int stride) { return (dim + stride - 1) / stride; }

void check_inputs(const CoarseDisplacementField& u, const MatchSet& matches) {
  if (matches.empty()) fail(ErrorKind::EmptyMatchSet, "coarse objective needs at least one match");
  if (u.stride < 1) fail(ErrorKind::InvalidStep, "coarse stride must be >= 1");
  if (u.lattice.vectors.size() != u.lattice.shape.voxel_count())
    fail(ErrorKind::ShapeMismatch, "coarse lattice size differs from its shape");
}

Vec3 lattice_coordinate(const Vec3& p, int stride) { return (1.0 / static_cast<double>(stride)) * p; }

}  // namespace

CoarseDisplacementField::CoarseDisplacementField(const GridShape& grid, int s) : stride(s) {
  if (s < 1) fail(ErrorKind::InvalidStep, "coarse stride must be >= 1");
  validate(grid);
  lattice = DisplacementField(GridShape(cells(grid.dims[0], s), cells(grid.dims[1], s), cells(grid.dims[2], s),
                                        {grid.spacing[0] * s, grid.spacing[1] * s, grid.spacing[2] * s}));
}

CoarseTerms coarse_terms(const CoarseDisplacementField& u, const MatchSet& matches, const AffineTransform& a) {
  check_inputs(u, matches);
  const AffineTransform inv = invert_affine(a);
  CoarseTerms t;
  for (const Match& m : matches.pairs) {
    const Vec3 y = inv.apply(m.fixed);
    const Vec3 r = m.moving - (y + trilinear_sample(u.lattice, lattice_coordinate(y, u.stride)));
    t.data += dot(r, r);
  }
  t.data /= static_cast<double>(matches.size());

  const GridShape& g = u.lattice.shape;
  for (int z = 0; z < g.dims[0]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[2]; ++x) {
        const Vec3& here = u.lattice.at(z, y, x);
        if (z + 1 < g.dims[0]) {
          const Vec3 d = u.lattice.at(z + 1, y, x) - here;
          t.regularizer += dot(d, d);
        }
        if (y + 1 < g.dims[1]) {
          const Vec3 d = u.lattice.at(z, y + 1, x) - here;
          t.regularizer += dot(d, d);
        }
        if (x + 1 < g.dims[2]) {
          const Vec3 d = u.lattice.at(z, y, x + 1) - here;
          t.regularizer += dot(d, d);
        }
      }
  t.regularizer /= static_cast<double>(g.voxel_count());
  return t;
}

double coarse_objective(const CoarseDisplacementField& u, const MatchSet& matches, const AffineTransform& a,
                        double reg_weight) {
  const CoarseTerms t = coarse_terms(u, matches, a);
  return t.data + reg_weight * t.regularizer;
}

std::vector<Vec3> coarse_gradient(const CoarseDisplacementField& u, const MatchSet& matches,
                                  const AffineTransform& a, double reg_weight) {
  check_inputs(u, matches);
  const AffineTransform inv = invert_affine(a);
  const GridShape& g = u.lattice.shape;
  std::vector<Vec3> grad(g.voxel_count());

  const double data_scale = -2.0 / static_cast<double>(matches.size());
  for (const Match& m : matches.pairs) {
    const Vec3 y = inv.apply(m.fixed);
    const TrilinearStencil s = make_stencil(g, lattice_coordinate(y, u.stride));
    Vec3 uy;
    for (std::size_t k = 0; k < 8; ++k) uy += s.weights[k] * u.lattice.vectors[s.offsets[k]];
    const Vec3 r = m.moving - (y + uy);
    for (std::size_t k = 0; k < 8; ++k) grad[s.offsets[k]] += (data_scale * s.weights[k]) * r;
  }

  if (reg_weight != 0.0) {
    const double reg_scale = 2.0 * reg_weight / static_cast<double>(g.voxel_count());
    const std::array<std::size_t, 3> step{static_cast<std::size_t>(g.dims[1]) * static_cast<std::size_t>(g.dims[2]),
                                          static_cast<std::size_t>(g.dims[2]), 1};
    for (int z = 0; z < g.dims[0]; ++z)
      for (int y = 0; y < g.dims[1]; ++y)
        for (int x = 0; x < g.dims[2]; ++x) {
          const std::size_t here = g.linear(z, y, x);
          const Index3 idx{z, y, x};
          for (int axis = 0; axis < 3; ++axis) {
            if (idx[static_cast<std::size_t>(axis)] + 1 >= g.dims[static_cast<std::size_t>(axis)]) continue;
            const std::size_t next = here + step[static_cast<std::size_t>(axis)];
            const Vec3 d = u.lattice.vectors[next] - u.lattice.vectors[here];
            grad[next] += reg_scale * d;
            grad[here] -= reg_scale * d;
          }
        }
  }
  return grad;
}

CoarseResult optimize_coarse_traced(const MatchSet& matches, const AffineTransform& a, const GridShape& grid,
                                    int stride, const OptimizerConfig& config) {
  if (config.reg_weight < 0.0) fail(ErrorKind::InvalidConfig, "coarse regularizer weight must be >= 0");
  CoarseResult result;
  result.field = CoarseDisplacementField(grid, stride);
  if (matches.empty()) fail(ErrorKind::EmptyMatchSet, "coarse optimization needs at least one match");

  CoarseDisplacementField work = result.field;
  const std::size_t nodes = work.lattice.vectors.size();
  auto load = [&](std::span<const double> x) {
    for (std::size_t i = 0; i < nodes; ++i)
      for (int c = 0; c < 3; ++c) work.lattice.vectors[i][c] = x[3 * i + static_cast<std::size_t>(c)];
  };
  const ObjectiveFn objective = [&](std::span<const double> x, std::span<double> grad) {
    load(x);
    const double value = coarse_objective(work, matches, a, config.reg_weight);
    const std::vector<Vec3> g = coarse_gradient(work, matches, a, config.reg_weight);
    for (std::size_t i = 0; i < nodes; ++i)
      for (int c = 0; c < 3; ++c) grad[3 * i + static_cast<std::size_t>(c)] = g[i][c];
    return value;
  };

  DescentConfig dc;
  dc.step_size = config.step_size;
  dc.iterations = config.iterations;
  dc.convergence_tol = config.convergence_tol;
  result.trace = minimize(objective, std::vector<double>(3 * nodes, 0.0), dc);
  load(result.trace.x);
  result.field = work;
  return result;
}

DisplacementField upsample_coarse(const CoarseDisplacementField& u, const GridShape& target) {
  validate(target);
  for (int a = 0; a < 3; ++a) {
    const int need = cells(target.dims[a], u.stride);
    if (std::abs(need - u.lattice.shape.dims[a]) > 1)
      fail(ErrorKind::ShapeMismatch, "target grid incompatible with coarse lattice");
  }
  DisplacementField out(target);
  for (std::size_t v = 0; v < out.vectors.size(); ++v)
    out.vectors[v] = trilinear_sample(u.lattice, lattice_coordinate(to_vec(target.unravel(v)), u.stride));
  return out;
}

DisplacementField coarse_to_fixed_frame(const CoarseDisplacementField& u, const AffineTransform& a,
                                        const GridShape& target) {
  DisplacementField out = upsample_coarse(u, target);
  const AffineTransform inv = invert_affine(a);
  const Eigen::Matrix4d& m = a.matrix();
  for (std::size_t v = 0; v < out.vectors.size(); ++v) {
    const Vec3 y = inv.apply(to_vec(target.unravel(v)));
    const Vec3 d = trilinear_sample(u.lattice, lattice_coordinate(y, u.stride));
    for (int r = 0; r < 3; ++r) out.vectors[v][r] = m(r, 0) * d[0] + m(r, 1) * d[1] + m(r, 2) * d[2];
  }
  return out;
}

}  // namespace embreg
