#pragma once

// Strided coarse displacement optimization over matched keypoints.
//
//   E(u) = 1/|X| sum_{(xm, xf)} ||xm - (y + u(y))||^2
//        + lambda * 1/|nodes| sum_nodes ||grad u||_F^2,      y = A^-1 xf
//
// u lives on a lattice with one node every `stride` voxels; u(y) is the
// trilinear blend of the lattice at y / stride. grad u is the forward
// difference between neighbouring nodes (zero past the last node).

#include <vector>

#include "embreg/affine.hpp"
#include "embreg/descent.hpp"
#include "embreg/grid.hpp"
#include "embreg/match.hpp"

namespace embreg {

struct CoarseDisplacementField {
  int stride = 4;
  DisplacementField lattice;  // node j sits at voxel coordinate stride * j

  CoarseDisplacementField() = default;
  // Lattice of ceil(dims / stride) nodes per axis, zero-initialized.
  CoarseDisplacementField(const GridShape& grid, int stride);
};

struct OptimizerConfig {
  double step_size = 0.5;
  int iterations = 200;
  double reg_weight = 1.0;
  double convergence_tol = 1e-6;
};

double coarse_objective(const CoarseDisplacementField& u, const MatchSet& matches, const AffineTransform& a,
                        double reg_weight);

// Data term and regularizer separately, unweighted.
struct CoarseTerms {
  double data = 0.0;
  double regularizer = 0.0;
};
CoarseTerms coarse_terms(const CoarseDisplacementField& u, const MatchSet& matches, const AffineTransform& a);

// d objective / d lattice, one Vec3 per node.
std::vector<Vec3> coarse_gradient(const CoarseDisplacementField& u, const MatchSet& matches,
                                  const AffineTransform& a, double reg_weight);

struct CoarseResult {
  CoarseDisplacementField field;
  DescentResult trace;
};

CoarseResult optimize_coarse_traced(const MatchSet& matches, const AffineTransform& a, const GridShape& grid,
                                    int stride, const OptimizerConfig& config);

inline CoarseDisplacementField optimize_coarse(const MatchSet& matches, const AffineTransform& a,
                                               const GridShape& grid, int stride, const OptimizerConfig& config) {
  return optimize_coarse_traced(matches, a, grid, stride, config).field;
}

// Dense displacement on `target` by trilinear interpolation of the lattice.
DisplacementField upsample_coarse(const CoarseDisplacementField& u, const GridShape& target);

// The coarse stage as a displacement c on the fixed grid for the composite
// x -> A^-1 (x + c(x)): the objective fits x_m ~ y + u(y) with y = A^-1 x_f,
// so c(x) = L u(A^-1 x) with L the linear block of A.
DisplacementField coarse_to_fixed_frame(const CoarseDisplacementField& u, const AffineTransform& a,
                                        const GridShape& target);

}  // namespace embreg
