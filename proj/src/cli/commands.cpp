#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lqg/cli.hpp"
#include "lqg/csv.hpp"
#include "lqg/distance.hpp"
#include "lqg/experiments.hpp"
#include "lqg/field.hpp"
#include "lqg/gmc.hpp"
#include "lqg/lbm.hpp"
#include "lqg/partition.hpp"

namespace lqg::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Key {
  std::string name;
  std::string value;  // default
  std::string help;
};

class Context {
 public:
  Context(std::string command, Settings settings) : command_(std::move(command)), s_(std::move(settings)) {}

  const std::string& command() const { return command_; }
  const Settings& settings() const { return s_; }
  const std::string& raw(const std::string& k) const { return s_.at(k); }

  double real(const std::string& k) const { return parse_real(k, raw(k)); }
  int integer(const std::string& k) const {
    const long long v = parse_integer(k, raw(k));
    if (v < INT32_MIN || v > INT32_MAX) throw ConfigError("field '" + k + "': out of range");
    return static_cast<int>(v);
  }
  std::uint64_t seed() const { return parse_seed("seed", raw("seed")); }
  bool flag(const std::string& k) const { return parse_bool(k, raw(k)); }
  Point point(const std::string& k) const { return parse_point(k, raw(k)); }
  std::vector<double> reals(const std::string& k) const { return parse_real_list(k, raw(k)); }

  int threads() const {
    const std::string& t = raw("threads");
    if (t == "auto") return default_threads();
    const int n = integer("threads");
    if (n < 1) throw ConfigError("field 'threads': must be at least 1");
    return n;
  }

  StackParams stack() const {
    StackParams sp;
    try {
      sp.engine = engine_from_string(raw("engine"));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'engine': ") + e.what());
    }
    sp.grid_size = integer("N");
    if (!is_power_of_two(sp.grid_size) || sp.grid_size < 8)
      throw ConfigError("field 'N': must be a power of two >= 8");
    sp.octaves = raw("J") == "auto" ? log2_exact(sp.grid_size) - 1 : integer("J");
    sp.slices_per_octave = integer("slices");
    sp.seed = seed();
    return sp;
  }

  fs::path out_path(const std::string& name) {
    outputs_.push_back(name);
    return fs::path(raw("output_dir")) / name;
  }
  const std::vector<std::string>& outputs() const { return outputs_; }

 private:
  std::string command_;
  Settings s_;
  std::vector<std::string> outputs_;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

std::vector<Key> field_keys(const std::string& engine, const std::string& n) {
  return {{"engine", engine, "field engine: hat_h, tilde_h or eta"},
          {"N", n, "grid size (power of two)"},
          {"J", "auto", "octave count (auto: log2 N - 1)"},
          {"slices", "4", "time slices per octave"},
          {"seed", "0", "master seed"}};
}

std::vector<Key> common_keys() {
  return {{"threads", "auto", "worker threads (auto: LQG_THREADS or hardware)"},
          {"output_dir", ".", "directory for artifacts"}};
}

ordered_json per_delta_json(const ChiEstimate& est) {
  ordered_json rows = ordered_json::array();
  for (const auto& d : est.per_delta)
    rows.push_back({{"delta", d.delta}, {"mean_logD", d.mean_log}, {"se", d.se}, {"sd", d.sd}, {"n", d.n},
                    {"dropped", d.dropped}});
  return rows;
}

ordered_json chi_json(const ChiEstimate& est) {
  return {{"kind", to_string(est.kind)}, {"gamma", est.gamma},        {"engine", to_string(est.engine)},
          {"N", est.grid_size},          {"replicas", est.replicas},  {"chi", est.chi},
          {"chi_se", est.chi_se},        {"intercept", est.fit.intercept},
          {"bound", est.bound},          {"within_bound", est.within_bound},
          {"per_delta", per_delta_json(est)}};
}

void write_json(Context& ctx, const std::string& name, const ordered_json& doc) {
  auto out = open_out(ctx.out_path(name));
  out << doc.dump(2) << '\n';
}

ChiConfig chi_config(const Context& ctx, const std::string& u, const std::string& v) {
  ChiConfig c;
  c.gamma = ctx.real("gamma");
  c.deltas = ctx.reals("deltas");
  c.replicas = ctx.integer("replicas");
  c.u = ctx.point(u);
  c.v = ctx.point(v);
  c.field = ctx.stack();
  c.seed = c.field.seed;
  c.field.seed = 0;
  c.threads = ctx.threads();
  return c;
}

HeatConfig heat_config(const Context& ctx, const std::string& u, const std::string& v, const std::string& reps) {
  HeatConfig h;
  h.gamma = ctx.real("gamma");
  h.u = ctx.point(u);
  h.v = ctx.point(v);
  h.r = ctx.real("r");
  h.times = ctx.reals("times");
  h.replicas = ctx.integer(reps);
  h.dt = ctx.real("dt");
  h.horizon = ctx.real("horizon");
  try {
    h.mode = heat_mode_from_string(ctx.raw("mode"));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("field 'mode': ") + e.what());
  }
  h.paths_per_field = ctx.integer("paths_per_field");
  h.field = ctx.stack();
  h.seed = h.field.seed;
  h.field.seed = 0;
  h.threads = ctx.threads();
  return h;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_field_sample(Context& ctx) {
  const StackParams sp = ctx.stack();
  const FieldStack stack = sample_stack(sp);
  {
    auto out = open_out(ctx.out_path("field.lqgf"));
    write_stack(stack, out);
  }
  auto out = open_out(ctx.out_path("field_layers.csv"));
  out << "octave,mean,empirical_variance,model_variance\n";
  const double cells = static_cast<double>(sp.grid_size) * sp.grid_size;
  for (int j = 0; j < stack.octaves(); ++j) {
    const auto& v = stack.layer(j).values();
    double mean = 0.0, model = 0.0;
    for (double x : v) mean += x;
    mean /= cells;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    for (double x : stack.variance_profile(j).values()) model += x;
    out << j << ',' << csv_num(mean) << ',' << csv_num(ss / (cells - 1)) << ',' << csv_num(model / cells) << '\n';
  }
}

void cmd_partition(Context& ctx) {
  const FieldStack stack = sample_stack(ctx.stack());
  const double gamma = ctx.real("gamma");
  const CellPartition part = build_partition(stack, gamma, ctx.real("delta"), ctx.integer("depth_cap"));
  {
    auto out = open_out(ctx.out_path("partition.json"));
    write_partition_json(out, part);
  }
  const PartitionStats st = partition_stats(part);
  ordered_json hist = ordered_json::object();
  for (const auto& [deg, count] : st.degree_histogram) hist[std::to_string(deg)] = count;
  ordered_json summary = {{"cells", st.leaf_count},
                          {"min_side", st.min_side},
                          {"max_side", st.max_side},
                          {"area", st.area},
                          {"depth_cap", part.depth_cap},
                          {"depth_cap_hit", part.depth_cap_hit},
                          {"degree_histogram", hist},
                          {"violations", partition_violations(part)}};
  if (ctx.raw("u") != "none" && ctx.raw("v") != "none")
    summary["distance_cells"] = approx_graph_distance(part, ctx.point("u"), ctx.point("v")) + 1;
  write_json(ctx, "partition_summary.json", summary);
}

void cmd_distance(Context& ctx) {
  StackParams base = ctx.stack();
  const std::uint64_t seed = base.seed;
  const double gamma = ctx.real("gamma");
  const std::vector<double> deltas = ctx.reals("deltas");
  std::vector<BallVariant> variants;
  for (const auto& w : parse_word_list(ctx.raw("variants"))) {
    try {
      variants.push_back(variant_from_string(w));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'variants': ") + e.what());
    }
  }
  const int replicas = ctx.integer("replicas");
  if (replicas < 1) throw ConfigError("field 'replicas': must be positive");
  const Point u = ctx.point("u");
  const Point v = ctx.point("v");
  const bool timing = ctx.flag("timing");
  const int threads = ctx.threads();
  const std::size_t per = deltas.size() * variants.size();
  std::vector<DistanceRecord> rows(static_cast<std::size_t>(replicas) * per);
  parallel_for(static_cast<std::size_t>(replicas), replicas > 1 ? threads : 1, [&](std::size_t i) {
    StackParams sp = base;
    sp.seed = derive_seed(seed, i, StreamRole::field);
    const MassGrid mass = gamma == 0.0 ? lebesgue_grid(sp.grid_size) : density_grid(sample_stack(sp), gamma);
    std::size_t k = i * per;
    for (double delta : deltas)
      for (BallVariant var : variants) {
        const RadiusField rf = radius_field(mass, delta, var, replicas > 1 ? 1 : threads);
        const auto t0 = std::chrono::steady_clock::now();
        const BallHopResult res = ball_hop_distance(rf, u, v);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        DistanceRecord& r = rows[k++];
        r.gamma = gamma;
        r.delta = delta;
        r.variant = var;
        r.n = sp.grid_size;
        r.seed = sp.seed;
        r.u = u;
        r.v = v;
        if (res.connected) r.distance = res.distance;
        r.expanded_nodes = res.expanded_nodes;
        if (timing) r.wall_ms = ms;
      }
  });
  auto out = open_out(ctx.out_path("distances.csv"));
  write_distance_csv(out, rows);
}

void write_chi_samples(Context& ctx, const ChiSamples& s) {
  auto out = open_out(ctx.out_path("chi_samples.csv"));
  out << "kind,delta,replica,seed,distance\n";
  for (const auto& [kind, table] : s.values)
    for (std::size_t d = 0; d < table.size(); ++d)
      for (std::size_t i = 0; i < table[d].size(); ++i) {
        out << to_string(kind) << ',' << csv_num(s.config.deltas[d]) << ',' << i << ','
            << derive_seed(s.config.seed, i, StreamRole::field) << ',';
        if (table[d][i]) out << *table[d][i];
        out << '\n';
      }
}

void cmd_chi(Context& ctx) {
  ChiConfig c = chi_config(ctx, "u", "v");
  c.depth_cap = ctx.integer("depth_cap");
  c.kinds.clear();
  for (const auto& w : parse_word_list(ctx.raw("kinds"))) {
    try {
      c.kinds.push_back(distance_kind_from_string(w));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'kinds': ") + e.what());
    }
  }
  const ChiSamples samples = sample_distances(c);
  write_chi_samples(ctx, samples);
  ordered_json summary = ordered_json::array();
  for (DistanceKind k : c.kinds) {
    const ChiEstimate est = estimate_chi(samples, k);
    ordered_json j = chi_json(est);
    if (k == DistanceKind::Dprime) j["capped_per_delta"] = samples.capped;
    summary.push_back(j);
    std::cout << to_string(k) << ": chi = " << csv_num(est.chi) << " +- " << csv_num(est.chi_se)
              << " (bound " << csv_num(est.bound) << (est.within_bound ? ", ok" : ", exceeded") << ")\n";
  }
  write_json(ctx, "chi_summary.json", summary);
}

ordered_json fit_json(const std::vector<HeatKernelEstimate>& est, HeatCorrection corr) {
  try {
    const HeatFit f = heat_exponent_fit(est, corr);
    return {{"slope", f.fit.slope}, {"slope_se", f.fit.slope_se}, {"intercept", f.fit.intercept},
            {"usable", f.usable}};
  } catch (const InsufficientData& e) {
    return {{"error", e.what()}};
  }
}

void cmd_lbm_heat(Context& ctx) {
  HeatConfig h = heat_config(ctx, "u", "v", "replicas");
  h.quenched_field = parse_seed("field_index", ctx.raw("field_index"));
  const auto est = hitting_probabilities(h);
  {
    auto out = open_out(ctx.out_path("heat.csv"));
    write_heat_csv(out, h.gamma, h.mode, h.seed, est);
  }
  ordered_json doc = {{"diffusive", fit_json(est, HeatCorrection::diffusive)},
                      {"none", fit_json(est, HeatCorrection::none)}};
  if (ctx.flag("dt_check")) {
    const DtCheck chk = dt_convergence_check(h);
    doc["dt_check"] = {{"times", chk.times}, {"shift_over_se", chk.shift_over_se}, {"passed", chk.passed}};
  }
  write_json(ctx, "heat_fit.json", doc);
  if (doc["diffusive"].contains("slope"))
    std::cout << "heat slope = " << csv_num(doc["diffusive"]["slope"].get<double>()) << " +- "
              << csv_num(doc["diffusive"]["slope_se"].get<double>()) << '\n';
}

void cmd_consistency(Context& ctx) {
  const ChiConfig c = chi_config(ctx, "u", "v");
  const HeatConfig h = heat_config(ctx, "heat_u", "heat_v", "heat_replicas");
  const ConsistencyRun run = run_consistency(c, h, ctx.integer("fields"));
  {
    auto out = open_out(ctx.out_path("heat_slopes.csv"));
    out << "field,slope\n";
    for (std::size_t i = 0; i < run.heat.slopes.size(); ++i) out << i << ',' << csv_num(run.heat.slopes[i]) << '\n';
  }
  write_json(ctx, "consistency.json",
             {{"chi", chi_json(run.chi)},
              {"heat", {{"mode", to_string(run.heat.mode)}, {"slope", run.heat.slope}, {"se", run.heat.se},
                        {"fields_used", run.heat.slopes.size()}, {"unusable", run.heat.unusable}}},
              {"target", run.result.target},
              {"residual", run.result.residual}});
  std::cout << "chi = " << csv_num(run.chi.chi) << ", heat slope = " << csv_num(run.heat.slope)
            << ", residual = " << csv_num(run.result.residual) << '\n';
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const fs::path& p) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError(p.string() + ": missing column '" + name + "'");
}

void cmd_report(Context& ctx) {
  const fs::path dir = ctx.raw("input_dir") == "auto" ? fs::path(ctx.raw("output_dir")) : fs::path(ctx.raw("input_dir"));
  bool any = false;
  const fs::path chi = dir / "chi_samples.csv";
  if (fs::exists(chi)) {
    any = true;
    const auto rows = read_csv(chi);
    if (rows.empty()) throw ConfigError(chi.string() + ": empty file");
    const std::size_t ck = column(rows[0], "kind", chi), cd = column(rows[0], "delta", chi),
                      cv = column(rows[0], "distance", chi);
    // kind -> delta in first-seen order -> log distances
    std::map<std::string, std::vector<std::pair<std::string, std::vector<double>>>> groups;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() <= std::max({ck, cd, cv})) throw ConfigError(chi.string() + ":" + std::to_string(r + 1) + ": short row");
      auto& list = groups[row[ck]];
      auto it = std::find_if(list.begin(), list.end(), [&](const auto& g) { return g.first == row[cd]; });
      if (it == list.end()) {
        list.emplace_back(row[cd], std::vector<double>{});
        it = list.end() - 1;
      }
      if (!row[cv].empty()) it->second.push_back(std::log(parse_real("distance", row[cv])));
    }
    for (const auto& [kind, list] : groups) {
      auto out = open_out(ctx.out_path("report_logD_" + kind + ".csv"));
      out << "delta,mean_logD,se,n\n";
      for (const auto& [delta, logs] : list) {
        const MeanSe m = mean_se(logs);
        out << delta << ',' << csv_num(m.mean) << ',' << csv_num(m.se) << ',' << m.n << '\n';
      }
    }
  }
  const fs::path heat = dir / "heat.csv";
  if (fs::exists(heat)) {
    any = true;
    const auto rows = read_csv(heat);
    if (rows.empty()) throw ConfigError(heat.string() + ": empty file");
    const std::size_t ct = column(rows[0], "t", heat), cp = column(rows[0], "p_hat", heat);
    auto out = open_out(ctx.out_path("report_heat.csv"));
    out << "t,log_inv_t,log_neg_log_p,log_neg_log_2pit_p\n";
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const double t = parse_real("t", rows[r].at(ct));
      const double p = parse_real("p_hat", rows[r].at(cp));
      auto y = [](double x) -> std::string {
        return (x > 0.0 && x < 1.0) ? csv_num(std::log(-std::log(x))) : std::string();
      };
      out << rows[r][ct] << ',' << csv_num(std::log(1.0 / t)) << ',' << y(p) << ','
          << y(2.0 * std::numbers::pi * t * p) << '\n';
    }
  }
  if (!any) throw ConfigError("report: no chi_samples.csv or heat.csv in '" + dir.string() + "'");
}

// ---------------------------------------------------------------------------
// Command table
// ---------------------------------------------------------------------------

struct Command {
  std::string name;
  std::string description;
  std::vector<Key> keys;
  std::function<void(Context&)> body;
};

std::vector<Key> join(std::vector<Key> a, const std::vector<Key>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Command> commands() {
  const auto common = common_keys();
  std::vector<Command> cmds;
  cmds.push_back({"field-sample", "draw a multi-octave field stack and dump it (LQGF1)",
                  join(field_keys("hat_h", "256"), common), cmd_field_sample});
  cmds.push_back({"partition", "build the random dyadic partition for one field",
                  join(join(field_keys("tilde_h", "512"),
                            {{"gamma", "1", "LQG parameter"},
                             {"delta", "0.015625", "mass threshold delta"},
                             {"depth_cap", "-1", "depth cap (-1: J)"},
                             {"u", "0.25,0.5", "optional endpoint for D' (none to skip)"},
                             {"v", "0.75,0.5", "optional endpoint for D' (none to skip)"}}),
                       common),
                  cmd_partition});
  cmds.push_back({"distance", "ball-hop distances between two points",
                  join(join(field_keys("tilde_h", "512"),
                            {{"gamma", "1", "LQG parameter"},
                             {"deltas", "2^-6", "delta list, e.g. 2^-3..2^-7"},
                             {"variants", "standard", "ball variants: standard, doubled, circle_avg"},
                             {"replicas", "1", "independent fields"},
                             {"u", "0.25,0.5", "start point"},
                             {"v", "0.75,0.5", "end point"},
                             {"timing", "false", "record wall_ms per search"}}),
                       common),
                  cmd_distance});
  cmds.push_back({"chi", "distance exponent estimate over a delta grid",
                  join(join(field_keys("tilde_h", "512"),
                            {{"gamma", "0", "LQG parameter"},
                             {"deltas", "2^-3..2^-7", "delta list"},
                             {"replicas", "1", "independent fields"},
                             {"kinds", "D", "distances: D, Dprime, D2, Dcirc"},
                             {"u", "0.25,0.5", "start point"},
                             {"v", "0.75,0.5", "end point"},
                             {"depth_cap", "-1", "partition depth cap (-1: J)"}}),
                       common),
                  cmd_chi});
  cmds.push_back({"lbm-heat", "Liouville heat kernel by hitting probabilities",
                  join(join(field_keys("tilde_h", "512"),
                            {{"gamma", "0", "LQG parameter"},
                             {"u", "0.425,0.5", "start point"},
                             {"v", "0.575,0.5", "target center"},
                             {"r", "0.015625", "target radius"},
                             {"times", "0.005,0.01,0.02,0.05", "Liouville times"},
                             {"replicas", "100000", "paths"},
                             {"dt", "1e-5", "Euler step"},
                             {"horizon", "0", "path time limit (0: 10 max t)"},
                             {"mode", "annealed", "annealed or quenched"},
                             {"paths_per_field", "1", "annealed: paths sharing a field"},
                             {"field_index", "0", "quenched: index of the fixed field"},
                             {"dt_check", "false", "rerun at dt/2 and compare"}}),
                       common),
                  cmd_lbm_heat});
  cmds.push_back({"consistency", "distance exponent against heat exponent at matched settings",
                  join(join(field_keys("tilde_h", "512"),
                            {{"gamma", "1", "LQG parameter"},
                             {"deltas", "2^-3..2^-6", "delta list for chi"},
                             {"replicas", "20", "chi replicas"},
                             {"u", "0.25,0.5", "chi start point"},
                             {"v", "0.75,0.5", "chi end point"},
                             {"heat_u", "0.425,0.5", "heat start point"},
                             {"heat_v", "0.575,0.5", "heat target center"},
                             {"r", "0.015625", "target radius"},
                             {"times", "0.001,0.0015,0.002,0.003,0.005,0.007,0.01", "Liouville times"},
                             {"heat_replicas", "20000", "paths per field"},
                             {"dt", "1e-5", "Euler step"},
                             {"horizon", "0", "path time limit (0: 10 max t)"},
                             {"mode", "quenched", "annealed or quenched"},
                             {"paths_per_field", "1", "annealed: paths sharing a field"},
                             {"fields", "20", "quenched: fields averaged"}}),
                       common),
                  cmd_consistency});
  cmds.push_back({"report", "plot-ready CSVs from chi or heat outputs",
                  join({{"input_dir", "auto", "directory holding chi_samples.csv / heat.csv (auto: output_dir)"}},
                       common),
                  cmd_report});
  return cmds;
}

std::string option_names(const std::string& key) {
  std::string names = "--" + key;
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  if (dashed != key) names += ",--" + dashed;
  return names;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Liouville quantum gravity distance and heat-kernel simulations", "lqgsim"};
  app.set_version_flag("--version", std::string(LQG_VERSION));
  app.require_subcommand(1);

  const std::vector<Command> cmds = commands();
  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::map<std::string, CLI::Option*>> flag_opts;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.description);
    subs[c.name] = sub;
    sub->add_option("--config", config_paths[c.name], "key=value or JSON config, or a manifest.json");
    for (const auto& k : c.keys)
      flag_opts[c.name][k.name] =
          sub->add_option(option_names(k.name), flag_values[c.name][k.name], k.help + " [" + k.value + "]");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const Command* cmd = nullptr;
  for (const auto& c : cmds)
    if (subs[c.name]->parsed()) cmd = &c;
  if (cmd == nullptr) return 2;

  const auto started = std::chrono::steady_clock::now();
  try {
    Settings s;
    for (const auto& k : cmd->keys) s[k.name] = k.value;
    const std::string& cfg = config_paths[cmd->name];
    if (!cfg.empty()) {
      std::ifstream in(cfg, std::ios::binary);
      if (!in) throw ConfigError(cfg + ": cannot open config file");
      std::ostringstream text;
      text << in.rdbuf();
      const std::string recorded = manifest_command(text.str());
      if (!recorded.empty() && recorded != cmd->name)
        throw ConfigError(cfg + ": manifest was written by '" + recorded + "', not '" + cmd->name + "'");
      for (const auto& [key, value] : parse_settings(text.str(), cfg)) {
        if (!s.count(key)) throw ConfigError(cfg + ": unknown key '" + key + "' for " + cmd->name);
        s[key] = value;
      }
    }
    if (const char* env = std::getenv("LQG_THREADS"); env != nullptr && *env != '\0') s["threads"] = env;
    for (const auto& k : cmd->keys)
      if (flag_opts[cmd->name][k.name]->count() > 0) s[k.name] = flag_values[cmd->name][k.name];

    Context ctx(cmd->name, s);
    std::error_code ec;
    fs::create_directories(s["output_dir"], ec);
    if (ec) throw ConfigError("cannot create output directory '" + s["output_dir"] + "': " + ec.message());
    cmd->body(ctx);

    ordered_json manifest;
    manifest["command"] = cmd->name;
    manifest["version"] = LQG_VERSION;
    manifest["config"] = ordered_json::object();
    for (const auto& [k, v] : ctx.settings()) manifest["config"][k] = v;
    if (s.count("seed"))
      manifest["seeds"] = {{"master", s["seed"]},
                           {"scheme", "stream key = derive_seed(master, index, role); roles field, noise, path"}};
    manifest["threads"] = ctx.threads();
    manifest["outputs"] = ctx.outputs();
    manifest["wall_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    const fs::path manifest_path = fs::path(s["output_dir"]) / "manifest.json";
    std::ofstream out(manifest_path, std::ios::binary);
    out << manifest.dump(2) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ExperimentFailure& e) {
    std::cerr << "experiment failed: " << e.what() << '\n';
    return 3;
  } catch (const InsufficientData& e) {
    std::cerr << "experiment failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lqg::cli
