#include "lqg/stats.hpp"

#include <algorithm>
#include <cmath>

#include "lqg/common.hpp"

namespace lqg {

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  out.se = out.sd / std::sqrt(static_cast<double>(values.size()));
  return out;
}

double jackknife_se(std::span<const double> values,
                    const std::function<double(std::span<const double>)>& statistic) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  std::vector<double> leave_out(n);
  std::vector<double> buffer(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(i), buffer.begin());
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(i) + 1, values.end(),
              buffer.begin() + static_cast<std::ptrdiff_t>(i));
    leave_out[i] = statistic(buffer);
  }
  double mean = 0.0;
  for (double v : leave_out) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : leave_out) ss += (v - mean) * (v - mean);
  return std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> se) {
  const std::size_t n = x.size();
  if (y.size() != n || (!se.empty() && se.size() != n)) throw DomainError("linear_fit: length mismatch");
  if (n < 2) throw InsufficientData("linear_fit: need at least two points");

  LinearFit fit;
  fit.points = n;
  fit.weighted = !se.empty() && std::all_of(se.begin(), se.end(), [](double s) { return s > 0.0; });

  std::vector<double> w(n, 1.0);
  if (fit.weighted) {
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (se[i] * se[i]);
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xbar = sx / sw;
  const double ybar = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw InsufficientData("linear_fit: all x values coincide");
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;

  if (fit.weighted) {
    fit.slope_se = std::sqrt(1.0 / sxx);
    fit.intercept_se = std::sqrt(1.0 / sw + xbar * xbar / sxx);
  } else if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    const double s2 = rss / static_cast<double>(n - 2);
    fit.slope_se = std::sqrt(s2 / sxx);
    fit.intercept_se = std::sqrt(s2 * (1.0 / static_cast<double>(n) + xbar * xbar / sxx));
  }
  return fit;
}

}  // namespace lqg
