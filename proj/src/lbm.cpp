#include "lqg/lbm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "lqg/csv.hpp"
#include "lqg/gmc.hpp"

namespace lqg {

namespace {

bool inside_square(Point p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

std::size_t step_count(double horizon, double dt) {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

}  // namespace

Trajectory sample_sbm(Point u, double dt, double horizon, std::uint64_t seed) {
  if (!(u.x > 0.0 && u.x < 1.0 && u.y > 0.0 && u.y < 1.0)) throw DomainError("sample_sbm: start outside (0,1)^2");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw DomainError("sample_sbm: dt must be positive and horizon non-negative");
  Trajectory traj;
  traj.dt = dt;
  const std::size_t steps = step_count(horizon, dt);
  traj.positions.reserve(steps + 1);
  traj.positions.push_back(u);
  Philox rng(seed);
  const double sd = std::sqrt(dt);
  Point x = u;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double dx = sd * rng.normal();
    const double dy = sd * rng.normal();
    x = {x.x + dx, x.y + dy};
    if (!inside_square(x)) {
      traj.killed_at = k;
      break;
    }
    traj.positions.push_back(x);
  }
  return traj;
}

ScalarGrid clock_weights(const ScalarGrid& field, const ScalarGrid& variance, double gamma) {
  ScalarGrid w(field.size(), 1.0);
  if (gamma == 0.0) return w;
  for (std::size_t i = 0; i < w.values().size(); ++i)
    w.values()[i] = std::exp(gamma * field.values()[i] - 0.5 * gamma * gamma * variance.values()[i]);
  return w;
}

void pcaf_accumulate(Trajectory& traj, const ScalarGrid& weights) {
  traj.pcaf.assign(traj.positions.size(), 0.0);
  double sum = 0.0;
  for (std::size_t k = 1; k < traj.positions.size(); ++k) {
    sum += weights(weights.cell_of(traj.positions[k - 1]));
    traj.pcaf[k] = traj.dt * sum;
  }
}

std::optional<LbmPosition> lbm_at(const Trajectory& traj, double t) {
  if (traj.pcaf.size() != traj.positions.size()) throw DomainError("lbm_at: pcaf not accumulated");
  if (t < 0.0) throw DomainError("lbm_at: negative time");
  if (traj.pcaf.empty() || t >= traj.pcaf.back()) return std::nullopt;
  const auto it = std::upper_bound(traj.pcaf.begin(), traj.pcaf.end(), t);
  const auto k = static_cast<std::size_t>(it - traj.pcaf.begin()) - 1;
  const double f0 = traj.pcaf[k];
  const double f1 = traj.pcaf[k + 1];
  const double frac = (t - f0) / (f1 - f0);
  const Point a = traj.positions[k];
  const Point b = traj.positions[k + 1];
  return LbmPosition{{a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y)}, k};
}

std::string_view to_string(HeatMode m) { return m == HeatMode::annealed ? "annealed" : "quenched"; }

HeatMode heat_mode_from_string(std::string_view s) {
  if (s == "annealed") return HeatMode::annealed;
  if (s == "quenched") return HeatMode::quenched;
  throw DomainError("unknown heat mode '" + std::string(s) + "' (expected annealed or quenched)");
}

namespace {

struct Environment {
  ScalarGrid weights;  // empty for gamma = 0
  double ball_mass = 0.0;
};

Environment make_environment(const HeatConfig& cfg, std::size_t field_index) {
  Environment env;
  if (cfg.gamma == 0.0) {
    env.ball_mass = measure_region(lebesgue_grid(cfg.field.grid_size), RegionQuery::ball(cfg.v, cfg.r));
    return env;
  }
  StackParams sp = cfg.field;
  sp.seed = derive_seed(cfg.seed, field_index, StreamRole::field);
  const FieldStack stack = sample_stack(sp);
  env.weights = clock_weights(stack.full_field(), stack.full_variance(), cfg.gamma);
  env.ball_mass = measure_region(density_grid(stack, cfg.gamma), RegionQuery::ball(cfg.v, cfg.r));
  return env;
}

// One path, streamed: the same draws and arithmetic as sample_sbm,
// pcaf_accumulate and lbm_at, without storing the trajectory.
void run_path(const HeatConfig& cfg, const Environment& env, std::uint64_t seed, std::size_t max_steps,
              std::uint8_t* hits) {
  const auto& times = cfg.times;
  Philox rng(seed);
  const double sd = std::sqrt(cfg.dt);
  const double r2 = cfg.r * cfg.r;
  const bool weighted = cfg.gamma != 0.0;
  Point x = cfg.u;
  double sum = 0.0;
  double clock = 0.0;
  std::size_t ti = 0;
  for (std::size_t k = 1; k <= max_steps && ti < times.size(); ++k) {
    const double w = weighted ? env.weights(env.weights.cell_of(x)) : 1.0;
    const Point nx{x.x + sd * rng.normal(), x.y + sd * rng.normal()};
    if (!inside_square(nx)) return;
    sum += w;
    const double next_clock = cfg.dt * sum;
    while (ti < times.size() && times[ti] < next_clock) {
      const double frac = (times[ti] - clock) / (next_clock - clock);
      const double yx = x.x + frac * (nx.x - x.x) - cfg.v.x;
      const double yy = x.y + frac * (nx.y - x.y) - cfg.v.y;
      hits[ti] = (yx * yx + yy * yy <= r2) ? 1 : 0;
      ++ti;
    }
    x = nx;
    clock = next_clock;
  }
}

void validate(const HeatConfig& cfg) {
  if (!(cfg.gamma >= 0.0) || cfg.gamma >= 2.0) throw DomainError("gamma must lie in [0, 2)");
  if (!(cfg.u.x > 0.0 && cfg.u.x < 1.0 && cfg.u.y > 0.0 && cfg.u.y < 1.0)) throw DomainError("u must lie in (0,1)^2");
  if (!inside_square(cfg.v)) throw DomainError("v must lie in [0,1]^2");
  if (!(cfg.r >= 2.0 / cfg.field.grid_size)) throw DomainError("target radius must be at least two mesh widths");
  if (cfg.replicas < 1000) throw DomainError("heat-kernel estimates need at least 1000 replicas");
  if (!(cfg.dt > 0.0)) throw DomainError("dt must be positive");
  if (cfg.times.empty()) throw DomainError("no times requested");
  if (!std::is_sorted(cfg.times.begin(), cfg.times.end()) || !(cfg.times.front() >= 0.0))
    throw DomainError("times must be non-negative and increasing");
  if (cfg.paths_per_field < 1) throw DomainError("paths_per_field must be >= 1");
}

}  // namespace

std::vector<HeatKernelEstimate> hitting_probabilities(const HeatConfig& cfg) {
  validate(cfg);
  const std::size_t replicas = static_cast<std::size_t>(cfg.replicas);
  const std::size_t nt = cfg.times.size();
  const double horizon = cfg.horizon > 0.0 ? cfg.horizon : 10.0 * cfg.times.back();
  const std::size_t max_steps = step_count(horizon, cfg.dt);
  const bool quenched = cfg.mode == HeatMode::quenched;
  const std::size_t per_field = quenched ? replicas : static_cast<std::size_t>(cfg.paths_per_field);
  const std::size_t fields = (replicas + per_field - 1) / per_field;

  std::vector<std::uint8_t> hits(replicas * nt, 0);
  std::vector<double> ball_mass(fields, 0.0);
  const std::size_t path_offset = quenched ? static_cast<std::size_t>(cfg.quenched_field) * replicas : 0;
  auto run_range = [&](const Environment& env, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      run_path(cfg, env, derive_seed(cfg.seed, path_offset + i, StreamRole::path), max_steps, &hits[i * nt]);
  };
  if (quenched || cfg.gamma == 0.0) {
    // gamma = 0 has no field: every replica shares the Lebesgue environment.
    const Environment env = make_environment(cfg, quenched ? cfg.quenched_field : 0);
    std::fill(ball_mass.begin(), ball_mass.end(), env.ball_mass);
    parallel_for(replicas, cfg.threads, [&](std::size_t i) { run_range(env, i, i + 1); });
  } else {
    parallel_for(fields, cfg.threads, [&](std::size_t f) {
      const Environment env = make_environment(cfg, f);
      ball_mass[f] = env.ball_mass;
      run_range(env, f * per_field, std::min(replicas, (f + 1) * per_field));
    });
  }

  std::vector<HeatKernelEstimate> out;
  for (std::size_t ti = 0; ti < nt; ++ti) {
    HeatKernelEstimate e;
    e.t = cfg.times[ti];
    e.r = cfg.r;
    e.replicas = cfg.replicas;
    std::vector<double> cluster_hits(fields, 0.0), cluster_p(fields, 0.0), cluster_n(fields, 0.0);
    double p_sum = 0.0, p_sq = 0.0;
    for (std::size_t i = 0; i < replicas; ++i) {
      const std::size_t f = i / per_field;
      const double hit = hits[i * nt + ti];
      const double p = ball_mass[f] > 0.0 ? hit / ball_mass[f] : 0.0;
      e.hits += hits[i * nt + ti];
      cluster_hits[f] += hit;
      cluster_p[f] += p;
      cluster_n[f] += 1.0;
      p_sum += p;
      p_sq += p * p;
    }
    const double n = static_cast<double>(replicas);
    e.q_hat = static_cast<double>(e.hits) / n;
    e.p_hat = p_sum / n;
    if (per_field == 1 || quenched || fields < 2) {
      e.q_se = std::sqrt(e.q_hat * (1.0 - e.q_hat) / n);
      e.p_se = std::sqrt(std::max(0.0, p_sq / n - e.p_hat * e.p_hat) / n);
    } else {
      // Replicas sharing a field are dependent; use between-field scatter.
      double sq = 0.0, sp = 0.0;
      for (std::size_t f = 0; f < fields; ++f) {
        sq += std::pow(cluster_hits[f] - e.q_hat * cluster_n[f], 2);
        sp += std::pow(cluster_p[f] - e.p_hat * cluster_n[f], 2);
      }
      const double scale = static_cast<double>(fields) / static_cast<double>(fields - 1);
      e.q_se = std::sqrt(sq * scale) / n;
      e.p_se = std::sqrt(sp * scale) / n;
    }
    e.below_resolution = e.hits == 0;
    e.q_upper = e.below_resolution ? 1.0 - std::pow(0.05, 1.0 / n) : e.q_hat;
    out.push_back(e);
  }
  return out;
}

HeatKernelEstimate hitting_probability(const HeatConfig& config, double t) {
  HeatConfig cfg = config;
  cfg.times = {t};
  return hitting_probabilities(cfg).front();
}

DtCheck dt_convergence_check(const HeatConfig& config) {
  HeatConfig half = config;
  half.dt = config.dt / 2.0;
  const auto a = hitting_probabilities(config);
  const auto b = hitting_probabilities(half);
  DtCheck out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double se = std::sqrt(a[i].q_se * a[i].q_se + b[i].q_se * b[i].q_se);
    const double shift = std::fabs(a[i].q_hat - b[i].q_hat);
    const double ratio = se > 0.0 ? shift / se : (shift == 0.0 ? 0.0 : INFINITY);
    out.times.push_back(a[i].t);
    out.shift_over_se.push_back(ratio);
    out.passed = out.passed && ratio < 1.0;
  }
  return out;
}

HeatFit heat_exponent_fit(std::span<const HeatKernelEstimate> estimates, HeatCorrection correction) {
  std::vector<double> x, y, se;
  for (const auto& e : estimates) {
    if (e.below_resolution || !(e.p_hat > 0.0) || !(e.t > 0.0)) continue;
    const double c = correction == HeatCorrection::diffusive ? 2.0 * std::numbers::pi * e.t : 1.0;
    const double scaled = c * e.p_hat;
    if (!(scaled < 1.0)) continue;
    const double neg_log = -std::log(scaled);
    x.push_back(std::log(1.0 / e.t));
    y.push_back(std::log(neg_log));
    se.push_back(e.p_se / (e.p_hat * neg_log));
  }
  if (x.size() < 4)
    throw InsufficientData("heat exponent fit needs at least 4 resolved times, got " + std::to_string(x.size()));
  HeatFit out;
  out.fit = linear_fit(x, y, se);
  out.usable = x.size();
  out.correction = correction;
  return out;
}

void write_heat_csv(std::ostream& out, double gamma, HeatMode mode, std::uint64_t seed_base,
                    const std::vector<HeatKernelEstimate>& rows) {
  out << "gamma,t,r,replicas,q_hat,q_se,p_hat,mode,seed_base\n";
  for (const auto& e : rows) {
    out << csv_num(gamma) << ',' << csv_num(e.t) << ',' << csv_num(e.r) << ',' << e.replicas << ','
        << csv_num(e.q_hat) << ',' << csv_num(e.q_se) << ',' << csv_num(e.p_hat) << ',' << to_string(mode) << ','
        << seed_base << '\n';
  }
}

}  // namespace lqg
