#pragma once

// Dense instance optimization in feature space:
//
//   L(u) = lambda_sim * (L_feat + L_int) + lambda_reg * L_reg
//
// L_feat is the mean over unmasked fixed voxels of 1 - <S_m(x + u(x)), S_f(x)>
// with the warped feature re-normalized to unit length, L_int is 1 - NCC or
// 1 - LNCC of the warped moving intensity (optional), and L_reg is the mean
// squared forward-difference gradient of the optimized field. In SVF mode the
// optimized field is a velocity whose scaling-and-squaring exponential
// supplies u.

#include <vector>

#include "embreg/descent.hpp"
#include "embreg/grid.hpp"
#include "embreg/transform.hpp"

namespace embreg {

enum class IntensityTerm { None, Ncc, Lncc };
enum class Parameterization { Displacement, Svf };

struct InstanceObjectiveConfig {
  double lambda_sim = 1.0;
  double lambda_reg = 1.0;
  IntensityTerm intensity = IntensityTerm::None;
  int lncc_window = 9;
  Parameterization parameterization = Parameterization::Displacement;
  int svf_steps = kDefaultSvfSteps;
  double step_size = 1.0;
  int iterations = 100;
  double convergence_tol = 1e-6;
};

void validate(const InstanceObjectiveConfig& config);

// Inputs of one instance problem. The fields live on the fixed grid; moving
// volumes are sampled in their own voxel coordinates.
struct InstanceProblem {
  const FeatureMap& moving_features;
  const FeatureMap& fixed_features;
  const ScalarVolume* moving_intensity = nullptr;
  const ScalarVolume* fixed_intensity = nullptr;
};

// Mean of 1 - similarity over voxels unmasked on both sides.
double sam_loss(const FeatureMap& warped, const FeatureMap& fixed);

template <class Tag>
double reg_loss(const VectorField<Tag>& field);
template <class Tag>
std::vector<Vec3> reg_gradient(const VectorField<Tag>& field);

double instance_objective(const DisplacementField& u, const InstanceProblem& problem,
                          const InstanceObjectiveConfig& config);
double instance_objective(const VelocityField& v, const InstanceProblem& problem,
                          const InstanceObjectiveConfig& config);

// Objective value plus its analytic gradient with respect to the field.
double instance_objective_gradient(const DisplacementField& u, const InstanceProblem& problem,
                                   const InstanceObjectiveConfig& config, std::vector<Vec3>& grad);
double instance_objective_gradient(const VelocityField& v, const InstanceProblem& problem,
                                   const InstanceObjectiveConfig& config, std::vector<Vec3>& grad);

struct InstanceResult {
  DisplacementField displacement;  // always the pullback displacement
  VelocityField velocity;          // SVF mode only
  DescentResult trace;
};

// Gradient descent from `init`. In SVF mode `init` seeds the velocity.
InstanceResult optimize_instance(const InstanceProblem& problem, const DisplacementField& init,
                                 const InstanceObjectiveConfig& config);

}  // namespace embreg
