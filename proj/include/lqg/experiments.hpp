#pragma once

// Replica sweeps producing exponent estimates and the statistical checks.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "lqg/distance.hpp"
#include "lqg/field.hpp"
#include "lqg/lbm.hpp"
#include "lqg/stats.hpp"

namespace lqg {

/// D: ball cover; Dprime: dyadic partition (counted in cells, hops + 1);
/// D2: doubled balls; Dcirc: circle-average balls.
enum class DistanceKind { D, Dprime, D2, Dcirc };

std::string_view to_string(DistanceKind k);
DistanceKind distance_kind_from_string(std::string_view s);

/// 4[(1 + gamma^2/4) - sqrt(1 + gamma^4/16)] / gamma^2, and 1 at gamma = 0.
double kpz_bound(double gamma);

/// chi / (2 - chi)
double heat_target(double chi);

struct ChiConfig {
  double gamma = 0.0;
  std::vector<double> deltas{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  int replicas = 1;
  std::vector<DistanceKind> kinds{DistanceKind::D};
  Point u{0.25, 0.5};
  Point v{0.75, 0.5};
  StackParams field{Engine::tilde_h, 512, 8, 0, 4};  ///< seed ignored
  std::uint64_t seed = 0;
  int depth_cap = -1;  ///< partition cap; < 0 selects the default
  int threads = 1;
};

/// Per replica, per delta, per kind: the distance (empty if disconnected).
struct ChiSamples {
  ChiConfig config;
  // values[kind][delta index][replica]
  std::map<DistanceKind, std::vector<std::vector<std::optional<int>>>> values;
  // Partitions that hit the depth cap, per delta (D' only).
  std::vector<int> capped;
};

struct DeltaSummary {
  double delta = 0.0;
  double mean_log = 0.0;
  double se = 0.0;
  double sd = 0.0;
  int n = 0;
  int dropped = 0;
};

struct ChiEstimate {
  DistanceKind kind = DistanceKind::D;
  double gamma = 0.0;
  Engine engine = Engine::tilde_h;
  int grid_size = 0;
  int replicas = 0;
  std::vector<DeltaSummary> per_delta;
  LinearFit fit;          ///< mean log D against log(1/delta)
  double chi = 0.0;       ///< fit slope
  double chi_se = 0.0;
  double bound = 0.0;     ///< kpz_bound(gamma)
  bool within_bound = false;  ///< chi <= bound + 0.05
};

/// Samples every configured distance kind on the same replicas. Replica i uses
/// the field seed derive_seed(seed, i, field).
ChiSamples sample_distances(const ChiConfig& config);

/// Throws ExperimentFailure if more than 10% of the replicas are disconnected
/// at some delta, InsufficientData with fewer than two deltas.
ChiEstimate estimate_chi(const ChiSamples& samples, DistanceKind kind);

/// sample_distances followed by estimate_chi for every kind.
std::map<DistanceKind, ChiEstimate> chi_estimate(const ChiConfig& config);

struct SubadditivityRow {
  double delta = 0.0;
  double delta_tilde = 0.0;
  double defect = 0.0;  ///< chi_{delta delta~} minus the log-weighted mean of chi_delta, chi_delta~
  double se = 0.0;
  int n = 0;
};

/// chi_d = E log D_d / log(1/d). The defect is computed per replica (paired)
/// and averaged. Each product delta * delta_tilde must be sampled as well.
std::vector<SubadditivityRow> subadditivity_check(const ChiSamples& samples, DistanceKind kind,
                                                  const std::vector<std::pair<double, double>>& pairs);

struct ConcentrationRow {
  double delta = 0.0;
  double sd_log = 0.0;
  double ratio = 0.0;  ///< sd_log / log(1/delta)
  int n = 0;
};

std::vector<ConcentrationRow> concentration_check(const ChiSamples& samples, DistanceKind kind);

struct ConsistencyResult {
  double chi = 0.0;
  double heat_slope = 0.0;
  double target = 0.0;    ///< chi / (2 - chi)
  double residual = 0.0;  ///< heat_slope - target
};

ConsistencyResult heat_distance_consistency(double chi, double heat_slope);

struct HeatSlope {
  HeatMode mode = HeatMode::annealed;
  std::vector<double> slopes;  ///< one per field (quenched) or a single fit (annealed)
  int unusable = 0;            ///< quenched fields with too few resolved times
  double slope = 0.0;
  double se = 0.0;
};

/// Annealed: one fit over all replicas. Quenched: an independent fit on each
/// of `fields` fixed fields (indices 0, 1, ...), averaged; the fields are the
/// chi replicas of the same seed, and the SE is that of the mean. Fields with
/// fewer than four resolved times are counted in `unusable` and skipped; more
/// than half unusable throws ExperimentFailure.
HeatSlope heat_slope(const HeatConfig& config, int fields = 1,
                     HeatCorrection correction = HeatCorrection::diffusive);

struct ConsistencyRun {
  ChiEstimate chi;
  HeatSlope heat;
  ConsistencyResult result;
};

/// Both pipelines at the same gamma, grid and seed; the distance kind is D.
ConsistencyRun run_consistency(const ChiConfig& chi, const HeatConfig& heat, int fields);

struct BoundaryConfig {
  double gamma = 0.0;
  std::vector<double> deltas{0.03125, 0.015625, 0.0078125, 0.00390625};
  int replicas = 1;
  Point u{0.5, 0.5};
  double lambda = 0.05;  ///< side of the square around u
  StackParams field{Engine::tilde_h, 512, 8, 0, 4};
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Least ball count from u to the boundary of the square of side lambda
/// centered at u, per delta; the slope is the point-to-boundary exponent.
ChiEstimate point_to_boundary(const BoundaryConfig& config);

/// Columns: delta,mean_logD,se,n
void write_chi_report_csv(std::ostream& out, const ChiEstimate& est);

}  // namespace lqg
