#include "embreg/features.hpp"

#include <cmath>

namespace embreg {

FeatureMap resize_features(const FeatureMap& features, const GridShape& target) {
  validate(target);
  const GridShape& src = features.shape();
  std::array<double, 3> ratio{};
  for (std::size_t a = 0; a < 3; ++a)
    ratio[a] = target.dims[a] > 1 ? static_cast<double>(src.dims[a] - 1) / static_cast<double>(target.dims[a] - 1) : 0.0;
  PointMap map;
  map.shape = target;
  map.points.resize(target.voxel_count());
  for (std::size_t v = 0; v < map.points.size(); ++v) {
    const Index3 i = target.unravel(v);
    for (int a = 0; a < 3; ++a) map.points[v][a] = i[static_cast<std::size_t>(a)] * ratio[static_cast<std::size_t>(a)];
  }
  return warp_features(features, map);
}

FeatureMap assemble_features(const FeatureMap& global, const FeatureMap& local) {
  validate(local.shape());
  FeatureMap g = global.shape().same_dims(local.shape()) ? global : resize_features(global, local.shape());
  if (!g.shape().same_dims(local.shape())) fail(ErrorKind::ShapeMismatch, "resized global map does not match local grid");
  FeatureMap l = local;
  g.normalize();
  l.normalize();

  FeatureMap out(local.shape(), g.channels() + l.channels());
  std::copy(g.data().begin(), g.data().end(), out.data().begin());
  std::copy(l.data().begin(), l.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(g.data().size()));
  out.normalize();
  return out;
}

FeatureMap features_to_image_grid(const FeatureMap& features, int scale, const GridShape& image) {
  if (scale < 1) fail(ErrorKind::InvalidConfig, "feature scale must be >= 1");
  if (scale == 1) {
    if (!features.shape().same_dims(image)) fail(ErrorKind::ShapeMismatch, "feature grid differs from image grid");
    return features;
  }
  const double shift = 0.5 * (scale - 1);
  PointMap map;
  map.shape = image;
  map.points.resize(image.voxel_count());
  for (std::size_t v = 0; v < map.points.size(); ++v) {
    const Index3 i = image.unravel(v);
    for (int a = 0; a < 3; ++a) map.points[v][a] = (i[static_cast<std::size_t>(a)] - shift) / scale;
  }
  return warp_features(features, map);
}

}  // namespace embreg
