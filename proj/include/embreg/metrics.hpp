#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "embreg/grid.hpp"

namespace embreg {

struct DiceResult {
  std::map<int, double> per_label;  // labels present in either volume, 0 excluded
  double mean = 1.0;                // 1.0 when neither volume has a foreground label
};

// 2|W & F| / (|W| + |F|) per label; a label present in only one volume scores 0.
DiceResult dice(const LabelVolume& warped, const LabelVolume& fixed);

// Pearson correlation over all voxels. Throws DegenerateIntensity when either
// volume has (numerically) zero variance.
double ncc(const ScalarVolume& a, const ScalarVolume& b);
// d ncc(a, b) / d a, per voxel.
std::vector<double> ncc_gradient(const ScalarVolume& a, const ScalarVolume& b);

// Mean over voxels of the correlation within a window x window x window
// neighbourhood (truncated at the borders). Degenerate windows count as 0.
double lncc(const ScalarVolume& a, const ScalarVolume& b, int window);
// d lncc(a, b) / d a, per voxel.
std::vector<double> lncc_gradient(const ScalarVolume& a, const ScalarVolume& b, int window);

// Mean over pairs of ||map(fixed_i) - moving_i||, with the difference scaled
// per axis by `spacing` (length units).
double landmark_error(std::span<const Vec3> moving, std::span<const Vec3> fixed,
                      const std::function<Vec3(const Vec3&)>& map, const std::array<double, 3>& spacing);

struct StageReport {
  std::string name;
  double seconds = 0.0;
  std::optional<double> mean_dice;
  std::optional<double> landmark_error;
  std::optional<double> folding_fraction;
  std::map<std::string, double> extras;
};

struct RegistrationReport {
  std::map<int, double> per_label_dice;
  double mean_dice = 0.0;
  double folding_fraction = 0.0;
  std::optional<double> mean_landmark_error;
  std::optional<double> initial_mean_dice;
  std::optional<double> initial_landmark_error;
  std::map<std::string, double> stage_timings;
  std::vector<StageReport> stages;
};

nlohmann::json to_json(const RegistrationReport& report);
RegistrationReport report_from_json(const nlohmann::json& j);

// Fixed-width text table for terminals.
std::string format_table(const RegistrationReport& report);

}  // namespace embreg
