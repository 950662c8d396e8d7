#pragma once

// Flat `key = value` configuration. Lines starting with '#' and blank lines
// are ignored; later assignments win. Known keys:
//
//   match.step  match.iterations  match.epsilon  feature.scale
//   affine.enabled
//   coarse.enabled  coarse.stride  coarse.lambda  coarse.step
//   coarse.iterations  coarse.tol
//   instance.enabled  instance.recipe (head | chest | abdomen)
//   instance.lambda_sim  instance.lambda_reg
//   instance.intensity (none | ncc | lncc)  instance.lncc_window
//   instance.parameterization (displacement | svf)  instance.svf_steps
//   instance.step  instance.iterations  instance.tol
//   threads

#include <string>
#include <string_view>
#include <vector>

#include "embreg/coarse.hpp"
#include "embreg/instance.hpp"

namespace embreg {

struct PipelineConfig {
  int match_step = 2;
  int match_iterations = 5;
  double epsilon = 0.7;
  int feature_scale = 1;  // image voxels per feature voxel

  bool affine_enabled = true;

  bool coarse_enabled = true;
  int coarse_stride = 4;
  OptimizerConfig coarse;

  bool instance_enabled = true;
  InstanceObjectiveConfig instance;

  int threads = 1;
};

void validate(const PipelineConfig& config);

// Applies one `key=value` assignment.
void apply_setting(PipelineConfig& config, std::string_view assignment);
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

PipelineConfig parse_config(std::string_view text, const PipelineConfig& base = {});
PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Canonical text form; parse_config(to_text(c)) == c.
std::string to_text(const PipelineConfig& config);

}  // namespace embreg
