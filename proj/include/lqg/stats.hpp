#pragma once

// Small statistics helpers shared by the Monte Carlo pipelines.

#include <functional>
#include <span>
#include <vector>

namespace lqg {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;   ///< standard error of the mean (0 for n < 2)
  double sd = 0.0;   ///< sample standard deviation (n - 1 denominator)
  std::size_t n = 0;
};

/// Mean, sample standard deviation and standard error, summed in index order.
MeanSe mean_se(std::span<const double> values);

/// Delete-one jackknife standard error of `statistic` over `values`.
double jackknife_se(std::span<const double> values,
                    const std::function<double(std::span<const double>)>& statistic);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  bool weighted = false;  ///< false when the fit fell back to ordinary least squares
  std::size_t points = 0;
};

/// Least squares y = intercept + slope * x. With standard errors supplied and
/// all strictly positive, points are weighted by 1/se^2 and the parameter SEs
/// come from the weight matrix; otherwise ordinary least squares is used and
/// the SEs come from the residual scatter (0 for an exact fit or two points).
/// Throws InsufficientData with fewer than two points.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> se = {});

}  // namespace lqg
