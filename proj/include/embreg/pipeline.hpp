#pragma once

// Staged registration: sscc -> filter -> fit_affine -> optimize_coarse ->
// upsample -> warp -> optimize_instance -> compose -> metrics.

#include <filesystem>

#include "json.hpp"

#include "embreg/bundle.hpp"
#include "embreg/coarse.hpp"
#include "embreg/config.hpp"
#include "embreg/match.hpp"
#include "embreg/metrics.hpp"
#include "embreg/transform.hpp"

namespace embreg {

struct PipelineResult {
  CompositeTransform transform;
  RegistrationReport report;
  MatchSet matches;  // filtered, image-grid coordinates
  CoarseDisplacementField coarse;
};

PipelineResult run_pipeline(const PipelineConfig& config, const Bundle& moving, const Bundle& fixed);

// Matching on the feature grids; returns filtered pairs in feature-grid
// coordinates.
MatchSet match_features(const PipelineConfig& config, const FeatureMap& moving, const FeatureMap& fixed);

// Feature-grid pair converted to image-grid coordinates.
MatchSet matches_to_image_grid(const MatchSet& matches, int scale);

// Dice, landmark error and folding of `transform` applied to the pair.
struct Evaluation {
  std::optional<DiceResult> dice;
  std::optional<double> landmark_error;
  double folding_fraction = 0.0;
};
Evaluation evaluate(const CompositeTransform& transform, const Bundle& moving, const Bundle& fixed);

// JSON manifest {"affine": [16 numbers], "coarse": file, "dense": file}; the
// fields are written as VOL1 files next to the manifest.
void save_transform(const std::filesystem::path& manifest, const CompositeTransform& transform);
CompositeTransform load_transform(const std::filesystem::path& manifest);

// Bundle manifest {"intensity": file, "features": file, "labels": file
// (optional), "landmarks": [[z, y, x], ...]} with VOL1 files written next to
// it, named <stem>.<part>.vol1.
void save_bundle(const std::filesystem::path& manifest, const Bundle& bundle);
Bundle load_bundle(const std::filesystem::path& manifest);

nlohmann::json affine_to_json(const AffineTransform& a);
AffineTransform affine_from_json(const nlohmann::json& j);

}  // namespace embreg
