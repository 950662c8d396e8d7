#pragma once

#include <optional>
#include <vector>

#include "embreg/grid.hpp"

namespace embreg {

// Everything the pipeline knows about one image.
struct Bundle {
  ScalarVolume intensity;
  FeatureMap features;
  std::optional<LabelVolume> labels;
  std::vector<Vec3> landmarks;  // paired by index with the other bundle's
};

}  // namespace embreg
