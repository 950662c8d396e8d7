#pragma once

#include "embreg/grid.hpp"

namespace embreg {

// Global + local feature concatenation. The global map is linearly resized
// onto the local grid (corner-aligned), each half is L2-normalized per voxel,
// the halves are concatenated (global channels first) and the result is
// re-normalized to unit length.
FeatureMap assemble_features(const FeatureMap& global, const FeatureMap& local);

// Linear resize with corners aligned: target voxel i samples the source at
// i * (n_src - 1) / (n_dst - 1) per axis. Vectors are re-normalized.
FeatureMap resize_features(const FeatureMap& features, const GridShape& target);

// Features on a lattice with `scale` image voxels per feature voxel, sampled
// onto the image grid. Feature voxel i is centred on image coordinate
// scale * i + (scale - 1) / 2.
FeatureMap features_to_image_grid(const FeatureMap& features, int scale, const GridShape& image);

}  // namespace embreg
