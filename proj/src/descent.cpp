#include "embreg/descent.hpp"

#include <algorithm>
#include <cmath>

#include "embreg/error.hpp"

namespace embreg {

namespace {
double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}
}  // namespace

DescentResult minimize(const ObjectiveFn& f, std::vector<double> x0, const DescentConfig& config) {
  if (!(config.step_size > 0.0)) fail(ErrorKind::InvalidConfig, "step size must be positive");
  if (config.iterations < 1) fail(ErrorKind::InvalidConfig, "iteration count must be >= 1");

  DescentResult r;
  r.x = std::move(x0);
  const std::size_t n = r.x.size();
  std::vector<double> g(n), trial(n), trial_g(n);

  double value = f(r.x, g);
  if (!std::isfinite(value)) fail(ErrorKind::NumericalDivergence, "initial objective is not finite");
  r.history.push_back(value);

  double step = config.step_size;
  for (int it = 0; it < config.iterations; ++it) {
    if (inf_norm(g) < config.convergence_tol) {
      r.converged = true;
      break;
    }
    bool accepted = false;
    bool any_finite = false;
    double t = step;
    double trial_value = 0.0;
    for (int h = 0; h <= config.max_halvings; ++h, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = r.x[i] - t * g[i];
      trial_value = f(trial, trial_g);
      if (!std::isfinite(trial_value)) continue;
      any_finite = true;
      if (trial_value <= value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_finite) fail(ErrorKind::NumericalDivergence, "objective became non-finite");
      r.converged = true;
      break;
    }

    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = trial[i] - r.x[i];
      const double y = trial_g[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    step = (sy > 0.0 && ss > 0.0) ? ss / sy : 2.0 * t;
    if (!std::isfinite(step) || step <= 0.0) step = config.step_size;

    std::swap(r.x, trial);
    std::swap(g, trial_g);
    value = trial_value;
    r.history.push_back(value);
    ++r.iterations;
  }
  return r;
}

}  // namespace embreg
