#pragma once

#include <functional>
#include <span>
#include <vector>

namespace embreg {

struct DescentConfig {
  double step_size = 0.5;
  int iterations = 200;
  double convergence_tol = 1e-6;
  int max_halvings = 30;
};

struct DescentResult {
  std::vector<double> x;
  std::vector<double> history;  // accepted objective values, starting with f(x0)
  int iterations = 0;
  bool converged = false;
};

// Returns f(x) and writes df/dx into grad (same length as x).
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

// Monotone gradient descent. Each iteration tries x - t * g starting from the
// current step t and halves t (up to max_halvings times) until the objective
// does not increase. After an accepted move the next trial step is the
// Barzilai-Borwein length s.s / s.y when s.y > 0. Stops after `iterations`
// moves, when ||g||_inf < convergence_tol, or when no halving descends.
// Throws NumericalDivergence if f(x0) is non-finite or no finite trial exists.
DescentResult minimize(const ObjectiveFn& f, std::vector<double> x0, const DescentConfig& config);

}  // namespace embreg
