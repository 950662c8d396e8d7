#pragma once

// Seeded synthetic atlases and ground-truth deformations.
//
// Random numbers come from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Stream k of seed s is seeded with the 64-bit wrapping value
// s * 0x9E3779B97F4A7C15 + k, and each draw r maps to the double
// (r >> 11) * 2^-52 - 1 in [-1, 1). Smoothing uses a separable triangular
// kernel w(k) = R + 1 - |k| for |k| <= R, R = ceil(sigma), normalized to sum
// one, with border replication.

#include <cstdint>

#include "embreg/affine.hpp"
#include "embreg/bundle.hpp"
#include "embreg/grid.hpp"
#include "embreg/transform.hpp"

namespace embreg {

struct SynthSpec {
  GridShape shape{24, 24, 24};
  int channels = 16;
  double feature_sigma = 2.0;
  double warp_amplitude = 2.0;
  double warp_sigma = 4.0;
  int label_count = 4;
  std::uint64_t seed = 1;
};

void validate(const SynthSpec& spec);

// Seeded white noise in [-1, 1), one value per voxel.
ScalarVolume uniform_noise(const GridShape& shape, std::uint64_t seed, std::uint64_t stream);
ScalarVolume triangular_smooth(const ScalarVolume& in, double sigma);

struct Atlas {
  FeatureMap features;
  LabelVolume labels;
  ScalarVolume intensity;
};

Atlas make_atlas(const SynthSpec& spec);

// Smoothed noise per component scaled so that max |v| = warp_amplitude.
VelocityField random_smooth_warp(const SynthSpec& spec);

// Rotation up to max_degrees about each axis and translation of norm up to
// max_translation, both about the grid centre.
AffineTransform random_affine(const GridShape& shape, std::uint64_t seed, double max_degrees,
                              double max_translation);

struct SyntheticPair {
  Bundle moving;
  Bundle fixed;
  CompositeTransform ground_truth;  // fixed -> moving coordinates
};

// fixed = atlas; moving(y) = atlas(psi(A y)) with psi = exp(v). The ground
// truth registration map is A^-1 o exp(-v). Landmarks are the fixed lattice
// points every `landmark_step` voxels (two voxels away from the faces) and
// their ground-truth images.
SyntheticPair make_pair(const Atlas& atlas, const VelocityField& v, const AffineTransform& a,
                        int landmark_step = 4, int svf_steps = kDefaultSvfSteps);

}  // namespace embreg
