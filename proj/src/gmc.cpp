#include "lqg/gmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "lqg/stats.hpp"
#include "lqg/csv.hpp"

namespace lqg {

MassGrid density_grid(const FieldStack& stack, double gamma) {
  if (!(gamma >= 0.0) || gamma >= 2.0) throw DomainError("gamma must lie in [0, 2)");
  const int n = stack.grid_size();
  MassGrid out;
  out.n = n;
  out.gamma = gamma;
  out.field = stack.shared_full_field();
  out.variance = stack.shared_full_variance();
  out.cell_mass = ScalarGrid(n);
  const double h2 = 1.0 / (static_cast<double>(n) * n);
  const auto& f = out.field->values();
  const auto& var = out.variance->values();
  auto& m = out.cell_mass.values();
  if (gamma == 0.0) {
    std::fill(m.begin(), m.end(), h2);
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = h2 * std::exp(gamma * f[i] - 0.5 * gamma * gamma * var[i]);
  }
  return out;
}

MassGrid lebesgue_grid(int n) {
  if (n < 1) throw DomainError("grid size must be positive");
  MassGrid out;
  out.n = n;
  out.cell_mass = ScalarGrid(n, 1.0 / (static_cast<double>(n) * n));
  out.field = std::make_shared<ScalarGrid>(n);
  out.variance = std::make_shared<ScalarGrid>(n);
  return out;
}

namespace {

// Index range [lo, hi] of cell centers (k + 1/2)/n inside [a, b].
std::pair<int, int> center_range(double a, double b, int n) {
  const int lo = std::max(0, static_cast<int>(std::ceil(a * n - 0.5)));
  const int hi = std::min(n - 1, static_cast<int>(std::floor(b * n - 0.5)));
  return {lo, hi};
}

}  // namespace

ExactSum region_sum_exact(const MassGrid& mass, const RegionQuery& q) {
  ExactSum sum;
  const int n = mass.n;
  if (q.shape == RegionQuery::Shape::box) {
    if (q.side < 0.0) throw DomainError("box side must be non-negative");
    const auto [x0, x1] = center_range(q.corner.x, q.corner.x + q.side, n);
    const auto [y0, y1] = center_range(q.corner.y, q.corner.y + q.side, n);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) sum.add(mass.cell_mass(ix, iy));
    return sum;
  }
  if (q.radius < 0.0) throw DomainError("ball radius must be non-negative");
  const double r = q.radius;
  const auto [y0, y1] = center_range(q.center.y - r, q.center.y + r, n);
  for (int iy = y0; iy <= y1; ++iy) {
    const double dy = (iy + 0.5) / n - q.center.y;
    const double rest = r * r - dy * dy;
    if (rest < 0.0) continue;
    const double w = std::sqrt(rest);
    auto [x0, x1] = center_range(q.center.x - w, q.center.x + w, n);
    // The sqrt above can be off by an ulp; settle the row ends with the exact test.
    auto inside = [&](int ix) {
      const double dx = (ix + 0.5) / n - q.center.x;
      return dx * dx + dy * dy <= r * r;
    };
    while (x0 > 0 && inside(x0 - 1)) --x0;
    while (x0 <= x1 && !inside(x0)) ++x0;
    while (x1 < n - 1 && inside(x1 + 1)) ++x1;
    while (x1 >= x0 && !inside(x1)) --x1;
    for (int ix = x0; ix <= x1; ++ix) sum.add(mass.cell_mass(ix, iy));
  }
  return sum;
}

double measure_region(const MassGrid& mass, const RegionQuery& q) { return region_sum_exact(mass, q).value(); }

GridIndex box_anchor(const DyadicBox& box, int n) {
  const int cells = 1 << box.level;
  if (box.level < 0 || cells > n) throw DomainError("dyadic box finer than the mesh");
  if (box.ix < 0 || box.iy < 0 || box.ix >= cells || box.iy >= cells) throw DomainError("dyadic box outside [0,1]^2");
  if (cells == n) return {box.ix, box.iy};
  const int half = n / (2 * cells);
  return {(2 * box.ix + 1) * half, (2 * box.iy + 1) * half};
}

double approx_lqg_value(double side, double value, double variance, double gamma) {
  return side * side * std::exp(gamma * value - 0.5 * gamma * gamma * variance);
}

double approx_lqg_box(const FieldStack& stack, double gamma, const DyadicBox& box) {
  if (box.level > stack.octaves())
    throw DomainError("dyadic box level " + std::to_string(box.level) + " exceeds the octave count " +
                      std::to_string(stack.octaves()));
  const GridIndex g = box_anchor(box, stack.grid_size());
  if (gamma == 0.0) return box.side() * box.side();
  const ScaleValue sv = field_at_scale(stack, box.level, g);
  return approx_lqg_value(box.side(), sv.value, sv.variance, gamma);
}

MomentResult moment_estimate(const StackParams& base, double gamma, double p, int replicas,
                             const RegionQuery& region, int threads) {
  if (replicas < 100) throw DomainError("moment_estimate needs at least 100 replicas");
  if (!(gamma >= 0.0) || gamma >= 2.0) throw DomainError("gamma must lie in [0, 2)");
  std::vector<double> values(static_cast<std::size_t>(replicas));
  parallel_for(values.size(), threads, [&](std::size_t i) {
    double m;
    if (gamma == 0.0) {
      m = measure_region(lebesgue_grid(base.grid_size), region);
    } else {
      StackParams sp = base;
      sp.seed = derive_seed(base.seed, i, StreamRole::field);
      m = measure_region(density_grid(sample_stack(sp), gamma), region);
    }
    values[i] = std::pow(m, p);
  });
  MomentResult out;
  out.gamma = gamma;
  out.p = p;
  out.replicas = replicas;
  out.mean = mean_se(values).mean;
  out.se = jackknife_se(values, [](std::span<const double> v) { return mean_se(v).mean; });
  out.regime_boundary = gamma == 0.0 ? std::numeric_limits<double>::infinity() : 4.0 / (gamma * gamma);
  out.finite_regime = p < out.regime_boundary;
  return out;
}

void write_moment_csv(std::ostream& out, const std::vector<MomentResult>& rows) {
  out << "gamma,p,replicas,mean,se,finite_regime_flag\n";
  for (const auto& r : rows) {
    out << csv_num(r.gamma) << ',' << csv_num(r.p) << ',' << r.replicas << ',' << csv_num(r.mean) << ','
        << csv_num(r.se) << ',' << (r.finite_regime ? 1 : 0) << '\n';
  }
}

}  // namespace lqg
