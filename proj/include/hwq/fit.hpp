#pragma once

#include <span>
#include <vector>

namespace hwq {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y ≈ intercept + slope·x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

// Mean and standard error treating the inputs as independent batch means.
MeanSE batch_mean_se(std::span<const double> batches);

}  // namespace hwq
