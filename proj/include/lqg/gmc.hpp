#pragma once

// Gaussian multiplicative chaos on the mesh: cell masses, region measures,
// the center-evaluated approximate LQG of dyadic boxes, and moment estimates.

#include <iosfwd>
#include <memory>
#include <vector>

#include "lqg/common.hpp"
#include "lqg/field.hpp"

namespace lqg {

/// cell_mass(v) = h^2 exp(gamma f(v) - gamma^2/2 Var f(v)) with f the
/// full-depth field at the center of mesh cell v.
struct MassGrid {
  int n = 0;
  double gamma = 0.0;
  ScalarGrid cell_mass;
  std::shared_ptr<const ScalarGrid> field;     ///< full-depth field
  std::shared_ptr<const ScalarGrid> variance;  ///< its exact variance

  double mesh() const noexcept { return 1.0 / n; }
};

/// Throws DomainError unless 0 <= gamma < 2.
MassGrid density_grid(const FieldStack& stack, double gamma);

/// Lebesgue cell masses h^2 (the gamma = 0 grid without a field).
MassGrid lebesgue_grid(int n);

struct RegionQuery {
  enum class Shape { box, ball };
  Shape shape = Shape::box;
  Point corner;        ///< box: lower-left corner
  double side = 1.0;   ///< box: side length
  Point center;        ///< ball: center
  double radius = 0.0; ///< ball: radius

  static RegionQuery box(Point corner, double side) { return {Shape::box, corner, side, {}, 0.0}; }
  static RegionQuery ball(Point center, double radius) { return {Shape::ball, {}, 0.0, center, radius}; }
  static RegionQuery unit_square() { return box({0.0, 0.0}, 1.0); }
};

/// Exact sum of cell_mass over cells whose centers lie in the closed region.
ExactSum region_sum_exact(const MassGrid& mass, const RegionQuery& q);
/// region_sum_exact rounded to the nearest double. A region missing the
/// square entirely measures 0; DomainError only for a negative size.
double measure_region(const MassGrid& mass, const RegionQuery& q);

/// Dyadic box [ix 2^-level, (ix+1) 2^-level] x [iy 2^-level, (iy+1) 2^-level].
struct DyadicBox {
  int level = 0;
  int ix = 0;
  int iy = 0;

  double side() const { return std::ldexp(1.0, -level); }
  Point center() const { return {(ix + 0.5) * side(), (iy + 0.5) * side()}; }
};

/// Grid point standing in for the center of a dyadic box. Field values live at
/// mesh-cell centers, so for boxes larger than a mesh cell this is the cell
/// whose lower-left corner is the box center. DomainError if level > log2 N.
GridIndex box_anchor(const DyadicBox& box, int n);

/// s^2 exp(gamma value - gamma^2/2 variance) for a box of side s.
double approx_lqg_value(double side, double value, double variance, double gamma);

/// Approximate LQG of a dyadic box of side 2^-i: the field at scale 2^-i
/// (octaves 0..i-1) evaluated at the box anchor. Needs i <= J.
double approx_lqg_box(const FieldStack& stack, double gamma, const DyadicBox& box);

struct MomentResult {
  double gamma = 0.0;
  double p = 0.0;
  int replicas = 0;
  double mean = 0.0;  ///< Monte Carlo mean of M(region)^p
  double se = 0.0;    ///< jackknife standard error
  double regime_boundary = 0.0;  ///< 4 / gamma^2 (infinite for gamma = 0)
  bool finite_regime = true;     ///< p < 4 / gamma^2
};

/// E[M(region)^p] over `replicas` independent stacks with parameters `base`
/// (replica i uses seed derive_seed(base.seed, i, field)).
MomentResult moment_estimate(const StackParams& base, double gamma, double p, int replicas,
                             const RegionQuery& region, int threads);

/// Columns: gamma,p,replicas,mean,se,finite_regime_flag
void write_moment_csv(std::ostream& out, const std::vector<MomentResult>& rows);

}  // namespace lqg
