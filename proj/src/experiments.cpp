#include "lqg/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "lqg/csv.hpp"
#include "lqg/gmc.hpp"
#include "lqg/partition.hpp"

namespace lqg {

std::string_view to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::D: return "D";
    case DistanceKind::Dprime: return "Dprime";
    case DistanceKind::D2: return "D2";
    case DistanceKind::Dcirc: return "Dcirc";
  }
  return "?";
}

DistanceKind distance_kind_from_string(std::string_view s) {
  if (s == "D") return DistanceKind::D;
  if (s == "Dprime" || s == "D'") return DistanceKind::Dprime;
  if (s == "D2") return DistanceKind::D2;
  if (s == "Dcirc") return DistanceKind::Dcirc;
  throw DomainError("unknown distance kind '" + std::string(s) + "' (expected D, Dprime, D2 or Dcirc)");
}

double kpz_bound(double gamma) {
  if (gamma == 0.0) return 1.0;
  const double g2 = gamma * gamma;
  return 4.0 * ((1.0 + g2 / 4.0) - std::sqrt(1.0 + g2 * g2 / 16.0)) / g2;
}

double heat_target(double chi) { return chi / (2.0 - chi); }

namespace {

BallVariant variant_of(DistanceKind k) {
  switch (k) {
    case DistanceKind::D2: return BallVariant::doubled;
    case DistanceKind::Dcirc: return BallVariant::circle_avg;
    default: return BallVariant::standard;
  }
}

void check_deltas(const std::vector<double>& deltas) {
  if (deltas.empty()) throw DomainError("no deltas given");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw DomainError("delta must lie in (0, 1), got " + std::to_string(d));
}

using Table = std::vector<std::vector<std::optional<int>>>;  // [delta][replica]

DeltaSummary summarize(double delta, const std::vector<std::optional<int>>& column) {
  std::vector<double> logs;
  logs.reserve(column.size());
  for (const auto& v : column)
    if (v) logs.push_back(std::log(static_cast<double>(*v)));
  DeltaSummary s;
  s.delta = delta;
  s.n = static_cast<int>(logs.size());
  s.dropped = static_cast<int>(column.size()) - s.n;
  const MeanSe m = mean_se(logs);
  s.mean_log = m.mean;
  s.se = m.se;
  s.sd = m.sd;
  return s;
}

ChiEstimate fit_table(const Table& table, const std::vector<double>& deltas, int replicas) {
  ChiEstimate est;
  est.replicas = replicas;
  std::vector<double> x, y, se;
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    const DeltaSummary s = summarize(deltas[d], table[d]);
    if (10 * s.dropped > replicas)
      throw ExperimentFailure(std::to_string(s.dropped) + " of " + std::to_string(replicas) +
                              " replicas disconnected at delta " + csv_num(deltas[d]));
    est.per_delta.push_back(s);
    x.push_back(std::log(1.0 / deltas[d]));
    y.push_back(s.mean_log);
    se.push_back(s.se);
  }
  if (x.size() < 2) throw InsufficientData("an exponent fit needs at least two deltas");
  est.fit = linear_fit(x, y, se);
  est.chi = est.fit.slope;
  est.chi_se = est.fit.slope_se;
  return est;
}

std::size_t delta_index(const std::vector<double>& deltas, double d) {
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (std::abs(deltas[i] - d) <= 1e-12 * d) return i;
  throw DomainError("delta " + csv_num(d) + " was not sampled");
}

StackParams replica_params(const StackParams& base, std::uint64_t seed, std::size_t i) {
  StackParams sp = base;
  sp.seed = derive_seed(seed, i, StreamRole::field);
  return sp;
}

}  // namespace

ChiSamples sample_distances(const ChiConfig& cfg) {
  check_deltas(cfg.deltas);
  if (cfg.replicas < 1) throw DomainError("replicas must be positive");
  if (!(cfg.gamma >= 0.0) || cfg.gamma >= 2.0) throw DomainError("gamma must lie in [0, 2)");
  if (cfg.kinds.empty()) throw DomainError("no distance kinds requested");

  const std::size_t nd = cfg.deltas.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replicas);
  const bool need_balls =
      std::any_of(cfg.kinds.begin(), cfg.kinds.end(), [](DistanceKind k) { return k != DistanceKind::Dprime; });

  ChiSamples out;
  out.config = cfg;
  for (DistanceKind k : cfg.kinds) out.values[k] = Table(nd, std::vector<std::optional<int>>(reps));
  std::vector<std::vector<char>> capped(nd, std::vector<char>(reps, 0));

  // At gamma = 0 every replica sees Lebesgue measure, so one is enough.
  const std::size_t distinct = cfg.gamma == 0.0 ? 1 : reps;
  const int inner = distinct < static_cast<std::size_t>(std::max(cfg.threads, 1)) ? cfg.threads : 1;

  parallel_for(distinct, distinct == 1 ? 1 : cfg.threads, [&](std::size_t i) {
    const FieldStack stack = sample_stack(replica_params(cfg.field, cfg.seed, i));
    MassGrid mass;
    if (need_balls) mass = cfg.gamma == 0.0 ? lebesgue_grid(stack.grid_size()) : density_grid(stack, cfg.gamma);
    for (std::size_t d = 0; d < nd; ++d) {
      const double delta = cfg.deltas[d];
      for (DistanceKind k : cfg.kinds) {
        std::optional<int> value;
        if (k == DistanceKind::Dprime) {
          const CellPartition part = build_partition(stack, cfg.gamma, delta, cfg.depth_cap);
          capped[d][i] = part.depth_cap_hit ? 1 : 0;
          value = approx_graph_distance(part, cfg.u, cfg.v) + 1;
        } else {
          const RadiusField rf = radius_field(mass, delta, variant_of(k), inner);
          const BallHopResult res = ball_hop_distance(rf, cfg.u, cfg.v);
          if (res.connected) value = res.distance;
        }
        out.values[k][d][i] = value;
      }
    }
  });

  if (distinct == 1 && reps > 1) {
    for (auto& [k, table] : out.values)
      for (auto& column : table) std::fill(column.begin() + 1, column.end(), column[0]);
    for (auto& column : capped) std::fill(column.begin() + 1, column.end(), column[0]);
  }
  out.capped.assign(nd, 0);
  for (std::size_t d = 0; d < nd; ++d)
    out.capped[d] = static_cast<int>(std::count(capped[d].begin(), capped[d].end(), 1));
  return out;
}

ChiEstimate estimate_chi(const ChiSamples& samples, DistanceKind kind) {
  const auto it = samples.values.find(kind);
  if (it == samples.values.end())
    throw DomainError("distance kind " + std::string(to_string(kind)) + " was not sampled");
  const ChiConfig& cfg = samples.config;
  ChiEstimate est = fit_table(it->second, cfg.deltas, cfg.replicas);
  est.kind = kind;
  est.gamma = cfg.gamma;
  est.engine = cfg.field.engine;
  est.grid_size = cfg.field.grid_size;
  est.bound = kpz_bound(cfg.gamma);
  est.within_bound = est.chi <= est.bound + 0.05;
  return est;
}

std::map<DistanceKind, ChiEstimate> chi_estimate(const ChiConfig& config) {
  const ChiSamples samples = sample_distances(config);
  std::map<DistanceKind, ChiEstimate> out;
  for (DistanceKind k : config.kinds) out[k] = estimate_chi(samples, k);
  return out;
}

std::vector<SubadditivityRow> subadditivity_check(const ChiSamples& samples, DistanceKind kind,
                                                  const std::vector<std::pair<double, double>>& pairs) {
  const auto it = samples.values.find(kind);
  if (it == samples.values.end())
    throw DomainError("distance kind " + std::string(to_string(kind)) + " was not sampled");
  const auto& deltas = samples.config.deltas;
  const Table& table = it->second;
  std::vector<SubadditivityRow> rows;
  for (const auto& [a, b] : pairs) {
    const std::size_t ia = delta_index(deltas, a);
    const std::size_t ib = delta_index(deltas, b);
    const std::size_t iab = delta_index(deltas, a * b);
    const double la = std::log(1.0 / a);
    const double lb = std::log(1.0 / b);
    std::vector<double> defects;
    for (std::size_t r = 0; r < table[ia].size(); ++r) {
      const auto& da = table[ia][r];
      const auto& db = table[ib][r];
      const auto& dab = table[iab][r];
      if (!da || !db || !dab) continue;
      // chi_ab - (la chi_a + lb chi_b) / (la + lb), with chi_x = log D_x / l_x
      const double chi_ab = std::log(static_cast<double>(*dab)) / (la + lb);
      const double avg = (std::log(static_cast<double>(*da)) + std::log(static_cast<double>(*db))) / (la + lb);
      defects.push_back(chi_ab - avg);
    }
    if (defects.empty()) throw InsufficientData("no replica connected at all three deltas");
    const MeanSe m = mean_se(defects);
    rows.push_back({a, b, m.mean, m.se, static_cast<int>(m.n)});
  }
  return rows;
}

std::vector<ConcentrationRow> concentration_check(const ChiSamples& samples, DistanceKind kind) {
  const auto it = samples.values.find(kind);
  if (it == samples.values.end())
    throw DomainError("distance kind " + std::string(to_string(kind)) + " was not sampled");
  std::vector<ConcentrationRow> rows;
  const auto& deltas = samples.config.deltas;
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    const DeltaSummary s = summarize(deltas[d], it->second[d]);
    rows.push_back({deltas[d], s.sd, s.sd / std::log(1.0 / deltas[d]), s.n});
  }
  return rows;
}

ConsistencyResult heat_distance_consistency(double chi, double heat_slope) {
  if (!(chi < 2.0)) throw DomainError("chi must be below 2");
  ConsistencyResult r;
  r.chi = chi;
  r.heat_slope = heat_slope;
  r.target = heat_target(chi);
  r.residual = heat_slope - r.target;
  return r;
}

HeatSlope heat_slope(const HeatConfig& cfg, int fields, HeatCorrection correction) {
  HeatSlope out;
  out.mode = cfg.mode;
  if (cfg.mode == HeatMode::annealed) {
    const HeatFit fit = heat_exponent_fit(hitting_probabilities(cfg), correction);
    out.slopes = {fit.fit.slope};
    out.slope = fit.fit.slope;
    out.se = fit.fit.slope_se;
    return out;
  }
  if (fields < 1) throw DomainError("fields must be positive");
  for (int f = 0; f < fields; ++f) {
    HeatConfig c = cfg;
    c.quenched_field = static_cast<std::uint64_t>(f);
    try {
      out.slopes.push_back(heat_exponent_fit(hitting_probabilities(c), correction).fit.slope);
    } catch (const InsufficientData&) {
      ++out.unusable;
    }
  }
  // some fields put the kernel peak before the first time or kill every path
  // late, so a minority of unresolved fields is expected
  if (2 * out.unusable > fields)
    throw ExperimentFailure(std::to_string(out.unusable) + " of " + std::to_string(fields) +
                            " fields left too few resolved times");
  if (out.slopes.empty()) throw InsufficientData("no field produced a heat exponent fit");
  const MeanSe m = mean_se(out.slopes);
  out.slope = m.mean;
  out.se = m.se;
  return out;
}

ConsistencyRun run_consistency(const ChiConfig& chi, const HeatConfig& heat, int fields) {
  const StackParams& a = chi.field;
  const StackParams& b = heat.field;
  if (chi.gamma != heat.gamma || chi.seed != heat.seed || a.engine != b.engine || a.grid_size != b.grid_size ||
      a.octaves != b.octaves || a.slices_per_octave != b.slices_per_octave)
    throw DomainError("consistency needs matching gamma, field parameters and seed");
  ConsistencyRun run;
  ChiConfig c = chi;
  c.kinds = {DistanceKind::D};
  run.chi = estimate_chi(sample_distances(c), DistanceKind::D);
  run.heat = heat_slope(heat, fields);
  run.result = heat_distance_consistency(run.chi.chi, run.heat.slope);
  return run;
}

ChiEstimate point_to_boundary(const BoundaryConfig& cfg) {
  check_deltas(cfg.deltas);
  if (cfg.replicas < 1) throw DomainError("replicas must be positive");
  if (!(cfg.gamma >= 0.0) || cfg.gamma >= 2.0) throw DomainError("gamma must lie in [0, 2)");
  if (!(cfg.lambda > 0.0)) throw DomainError("lambda must be positive");

  const std::size_t nd = cfg.deltas.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replicas);
  Table table(nd, std::vector<std::optional<int>>(reps));
  const std::size_t distinct = cfg.gamma == 0.0 ? 1 : reps;
  const int inner = distinct < static_cast<std::size_t>(std::max(cfg.threads, 1)) ? cfg.threads : 1;

  parallel_for(distinct, distinct == 1 ? 1 : cfg.threads, [&](std::size_t i) {
    MassGrid mass = cfg.gamma == 0.0
                        ? lebesgue_grid(cfg.field.grid_size)
                        : density_grid(sample_stack(replica_params(cfg.field, cfg.seed, i)), cfg.gamma);
    for (std::size_t d = 0; d < nd; ++d) {
      const RadiusField rf = radius_field(mass, cfg.deltas[d], BallVariant::standard, inner);
      const BallHopResult res = point_to_boundary_distance(rf, cfg.u, cfg.lambda);
      if (res.connected) table[d][i] = res.distance;
    }
  });
  if (distinct == 1)
    for (auto& column : table) std::fill(column.begin() + 1, column.end(), column[0]);

  ChiEstimate est = fit_table(table, cfg.deltas, cfg.replicas);
  est.kind = DistanceKind::D;
  est.gamma = cfg.gamma;
  est.engine = cfg.field.engine;
  est.grid_size = cfg.field.grid_size;
  est.bound = kpz_bound(cfg.gamma);
  est.within_bound = est.chi <= est.bound + 0.05;
  return est;
}

void write_chi_report_csv(std::ostream& out, const ChiEstimate& est) {
  out << "delta,mean_logD,se,n\n";
  for (const auto& s : est.per_delta)
    out << csv_num(s.delta) << ',' << csv_num(s.mean_log) << ',' << csv_num(s.se) << ',' << s.n << '\n';
}

}  // namespace lqg
