#pragma once

// Liouville Brownian motion: standard Brownian motion on [0,1]^2 killed on
// exit, its Liouville clock (the PCAF), the inverse time change, and Monte
// Carlo estimates of the Liouville heat kernel.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lqg/common.hpp"
#include "lqg/field.hpp"
#include "lqg/stats.hpp"

namespace lqg {

struct Trajectory {
  double dt = 0.0;
  std::vector<Point> positions;        ///< X_0 = u, X_1, ... while alive
  std::optional<std::size_t> killed_at;  ///< step whose position left the square
  std::vector<double> pcaf;            ///< F at each step; empty until accumulated
};

/// Euler path with N(0, dt) increments per coordinate up to time `horizon`,
/// truncated before the first step outside [0,1]^2. Deterministic in seed.
Trajectory sample_sbm(Point u, double dt, double horizon, std::uint64_t seed);

/// exp(gamma f - gamma^2/2 Var f) per mesh cell: the clock rate.
ScalarGrid clock_weights(const ScalarGrid& field, const ScalarGrid& variance, double gamma);

/// pcaf[k] = dt * sum_{j<k} w(X_j), w read at the mesh cell containing X_j.
void pcaf_accumulate(Trajectory& traj, const ScalarGrid& weights);

struct LbmPosition {
  Point position;
  std::size_t step = 0;  ///< k with pcaf[k] <= t < pcaf[k+1]
};

/// Y_t = X_{F^-1(t)}, linear within the step; empty when t >= final pcaf.
std::optional<LbmPosition> lbm_at(const Trajectory& traj, double t);

enum class HeatMode { annealed, quenched };
std::string_view to_string(HeatMode m);
HeatMode heat_mode_from_string(std::string_view s);

struct HeatConfig {
  double gamma = 0.0;
  Point u{0.425, 0.5};
  Point v{0.575, 0.5};
  double r = 1.0 / 64;
  std::vector<double> times{0.005, 0.01, 0.02, 0.05};
  int replicas = 1000;
  double dt = 1e-5;
  double horizon = 0.0;  ///< SBM time limit; <= 0 selects 10 * max(times)
  StackParams field;     ///< engine, N, J, slices; seed is ignored
  std::uint64_t seed = 0;
  HeatMode mode = HeatMode::annealed;
  int paths_per_field = 1;  ///< annealed: consecutive replicas sharing one field
  std::uint64_t quenched_field = 0;  ///< quenched: index of the fixed field
  int threads = 1;
};

struct HeatKernelEstimate {
  double t = 0.0;
  double r = 0.0;
  double q_hat = 0.0;
  double q_se = 0.0;
  double p_hat = 0.0;
  double p_se = 0.0;
  int replicas = 0;
  long long hits = 0;
  bool below_resolution = false;  ///< no hits; q_upper is the one-sided 95% bound
  double q_upper = 0.0;
};

/// Fraction of replicas with |Y_t - v| <= r for every t in config.times, and
/// the density estimate mean(hit / M(B_r(v))) with M on the replica's field.
/// Replica i draws its path from derive_seed(seed, i, path) and its field
/// from derive_seed(seed, f, field) with f = i / paths_per_field (annealed)
/// or f = quenched_field. Quenched runs on field f > 0 take their paths from
/// indices f * replicas + i so that different fields see fresh paths.
/// Standard errors treat replicas sharing a field as one cluster.
std::vector<HeatKernelEstimate> hitting_probabilities(const HeatConfig& config);

HeatKernelEstimate hitting_probability(const HeatConfig& config, double t);

struct DtCheck {
  std::vector<double> times;
  std::vector<double> shift_over_se;  ///< |q(dt) - q(dt/2)| / combined SE
  bool passed = true;                 ///< every shift below one SE
};

/// Reruns the configuration with dt/2 and compares hitting probabilities.
DtCheck dt_convergence_check(const HeatConfig& config);

enum class HeatCorrection { none, diffusive };

struct HeatFit {
  LinearFit fit;
  std::size_t usable = 0;
  HeatCorrection correction = HeatCorrection::diffusive;
};

/// Slope of log(-log(c(t) p_hat)) against log(1/t), weighted by 1/SE^2, with
/// c(t) = 1 (none) or 2 pi t (diffusive: divides out the on-diagonal decay of
/// a two-dimensional heat kernel). Points with no hits or c p_hat >= 1 are
/// skipped; fewer than four usable points throw InsufficientData.
HeatFit heat_exponent_fit(std::span<const HeatKernelEstimate> estimates,
                          HeatCorrection correction = HeatCorrection::diffusive);

/// Columns: gamma,t,r,replicas,q_hat,q_se,p_hat,mode,seed_base
void write_heat_csv(std::ostream& out, double gamma, HeatMode mode, std::uint64_t seed_base,
                    const std::vector<HeatKernelEstimate>& rows);

}  // namespace lqg
