#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "adacate/common.hpp"

namespace adacate {

// Candidate lambda values: grid_size log-spaced points on
// [epsilon*lambda_max, lambda_max] plus {lambda_max_plus}, where the two
// endpoints are the min and max over evaluation points of
// weight_v / bias_v^2. The range spans "shrink nowhere" to "discard the OS
// estimator at every point"; partial-discard values in between are excluded
// on purpose, so the decision to combine is unified across v.
struct LambdaGrid {
  std::vector<double> values;
  double lambda_max = 0.0;
  double lambda_max_plus = 0.0;
  double epsilon = 1e-3;
  int grid_size = 25;
  bool degenerate = false;              // no usable ratio: grid is {0}
  bool negative_ratio_warning = false;  // negative ratios folded to |r|
};

// per_point entries are (weight, bias_estimate) pairs; the ratio formed per
// point is weight / bias^2. Negative ratios fall back to absolute values
// with a warning; points with zero bias carry no information about the
// penalty scale and are ignored.
inline LambdaGrid build_lambda_grid(
    std::span<const std::pair<double, double>> per_point, double epsilon = 1e-3,
    int grid_size = 25) {
  if (grid_size < 1) throw Error("lambda grid size must be >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw Error("lambda grid epsilon must lie in (0,1]");
  LambdaGrid grid;
  grid.epsilon = epsilon;
  grid.grid_size = grid_size;

  std::vector<double> ratios;
  for (const auto& [weight, bias] : per_point) {
    if (bias == 0.0) continue;
    ratios.push_back(weight / (bias * bias));
  }
  if (ratios.empty()) {
    grid.degenerate = true;
    grid.values = {0.0};
    return grid;
  }
  for (double& r : ratios) {
    if (r < 0.0) {
      r = std::abs(r);
      grid.negative_ratio_warning = true;
    }
  }
  grid.lambda_max = *std::min_element(ratios.begin(), ratios.end());
  grid.lambda_max_plus = *std::max_element(ratios.begin(), ratios.end());
  if (grid.lambda_max <= 0.0) {
    // zero ratios cannot anchor a log-scale grid
    grid.degenerate = true;
    grid.values = {0.0};
    if (grid.lambda_max_plus > 0.0) grid.values.push_back(grid.lambda_max_plus);
    return grid;
  }

  const double lo = std::log10(epsilon * grid.lambda_max);
  const double hi = std::log10(grid.lambda_max);
  for (int i = 0; i < grid_size; ++i) {
    const double t = grid_size == 1
                         ? 1.0
                         : static_cast<double>(i) / (grid_size - 1);
    grid.values.push_back(std::pow(10.0, lo + t * (hi - lo)));
  }
  if (grid.lambda_max_plus > grid.lambda_max) {
    // one-ulp guard so the top value discards every point despite the
    // ratio/penalty product rounding differently than the division
    grid.lambda_max_plus *= 1.0 + 1e-12;
    grid.values.push_back(grid.lambda_max_plus);
  }
  return grid;
}

struct TuningResult {
  double selected_lambda = 0.0;
  std::vector<std::pair<double, double>> risk_curve;  // (lambda, risk)
  int selected_index = -1;
  std::size_t dropped_points = 0;
};

// Evaluates risk_fn over the grid and returns the argmin; ties break toward
// the smallest lambda (least shrinkage).
template <typename RiskFn>
TuningResult select_lambda(const LambdaGrid& grid, RiskFn&& risk_fn) {
  if (grid.values.empty()) throw Error("empty lambda grid");
  TuningResult result;
  result.risk_curve.reserve(grid.values.size());
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    const double lambda = grid.values[i];
    const double risk = risk_fn(lambda);
    result.risk_curve.emplace_back(lambda, risk);
    if (result.selected_index < 0 ||
        risk < result.risk_curve[static_cast<std::size_t>(result.selected_index)].second) {
      result.selected_index = static_cast<int>(i);
      result.selected_lambda = lambda;
    }
  }
  return result;
}

}  // namespace adacate
