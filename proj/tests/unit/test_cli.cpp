#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "lqg/cli.hpp"

namespace fs = std::filesystem;
using namespace lqg::cli;

namespace {

fs::path scratch(const std::string& name) {
  const char* base = std::getenv("LQG_TEST_TMP");
  fs::path p = fs::path(base != nullptr ? base : fs::temp_directory_path().string()) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "lqgsim");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("real lists accept numbers, powers and power ranges") {
  CHECK(parse_real_list("deltas", "0.5, 2^-3") == std::vector<double>{0.5, 0.125});
  CHECK(parse_real_list("deltas", "2^-3..2^-5") == std::vector<double>{0.125, 0.0625, 0.03125});
  CHECK(parse_real_list("deltas", "2^-5..2^-4,1e-3") == std::vector<double>{0.03125, 0.0625, 0.001});
  CHECK_THROWS_AS(parse_real_list("deltas", "2^-3..3^-5"), ConfigError);
  CHECK_THROWS_AS(parse_real_list("deltas", "0.1,,0.2"), ConfigError);
  CHECK_THROWS_AS(parse_real_list("deltas", "2^-3..0.01"), ConfigError);
  try {
    parse_real_list("deltas", "abc");
    FAIL("no exception");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("field 'deltas'") != std::string::npos);
  }
}

TEST_CASE("scalar parsers") {
  CHECK(parse_real("g", " 1.5 ") == 1.5);
  CHECK_THROWS_AS(parse_real("g", "1.5x"), ConfigError);
  CHECK(parse_integer("n", "-3") == -3);
  CHECK_THROWS_AS(parse_integer("n", "2.5"), ConfigError);
  CHECK(parse_seed("seed", "18446744073709551615") == 18446744073709551615ULL);
  CHECK_THROWS_AS(parse_seed("seed", "-1"), ConfigError);
  CHECK(parse_bool("b", "yes"));
  CHECK_FALSE(parse_bool("b", "0"));
  CHECK_THROWS_AS(parse_bool("b", "maybe"), ConfigError);
  const lqg::Point p = parse_point("u", "0.25,0.5");
  CHECK(p.x == 0.25);
  CHECK(p.y == 0.5);
  CHECK(parse_point("u", "0.1 0.2").y == 0.2);
  CHECK_THROWS_AS(parse_point("u", "0.1,0.2,0.3"), ConfigError);
  CHECK(parse_word_list("D, D2,,Dcirc") == std::vector<std::string>{"D", "D2", "Dcirc"});
}

TEST_CASE("key=value settings") {
  const Settings s = parse_settings("# comment\ngamma = 1  # trailing\n\ndeltas=2^-3..2^-4\n", "cfg.txt");
  CHECK(s.at("gamma") == "1");
  CHECK(s.at("deltas") == "2^-3..2^-4");
  try {
    parse_settings("gamma=1\nnonsense\n", "cfg.txt");
    FAIL("no exception");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("cfg.txt:2:", 0) == 0);
  }
  CHECK_THROWS_AS(parse_settings("a=1\na=2\n", "x"), ConfigError);
}

TEST_CASE("JSON settings and manifests") {
  const Settings s = parse_settings(R"({"gamma": 0.5, "deltas": ["2^-3", 0.0625], "timing": true, "N": 64})", "c.json");
  CHECK(s.at("gamma") == "0.5");
  CHECK(s.at("deltas") == "2^-3,0.0625");
  CHECK(s.at("timing") == "true");
  CHECK(s.at("N") == "64");
  const std::string manifest = R"({"command": "chi", "config": {"gamma": "1"}, "outputs": []})";
  CHECK(parse_settings(manifest, "m.json").at("gamma") == "1");
  CHECK(manifest_command(manifest) == "chi");
  CHECK(manifest_command("gamma=1") == "");
  CHECK_THROWS_AS(parse_settings("{\"a\": {\"b\": 1}}", "c.json"), ConfigError);
  CHECK_THROWS_AS(parse_settings("{broken", "c.json"), ConfigError);
}

TEST_CASE("field-sample writes the stack and a manifest") {
  const fs::path dir = scratch("field");
  CHECK(invoke({"field-sample", "--N", "32", "--engine", "eta", "--seed", "4", "--output-dir", dir.string()}) == 0);
  CHECK(fs::file_size(dir / "field.lqgf") == 28 + 4u * 32 * 32 * 8);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m["command"] == "field-sample");
  CHECK(m["config"]["J"] == "auto");
  CHECK(m["config"]["engine"] == "eta");
  CHECK(m["outputs"].size() == 2);
  const std::string layers = slurp(dir / "field_layers.csv");
  CHECK(layers.rfind("octave,mean,empirical_variance,model_variance\n", 0) == 0);
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path dir = scratch("errors");
  CHECK(invoke({"chi", "--gamma", "abc", "--output-dir", dir.string()}) == 2);
  CHECK(invoke({"chi", "--gamma", "2.5", "--N", "32", "--output-dir", dir.string()}) == 2);
  CHECK(invoke({"chi", "--no-such-flag", "1"}) == 2);
  CHECK(invoke({"frobnicate"}) == 2);
  CHECK(invoke({"distance", "--N", "96", "--output-dir", dir.string()}) == 2);
  write_file(dir / "bad.cfg", "gamma=1\nrepliacs=3\n");
  CHECK(invoke({"chi", "--config", (dir / "bad.cfg").string(), "--output-dir", dir.string()}) == 2);
  CHECK(invoke({"chi", "--config", (dir / "missing.cfg").string()}) == 2);
  write_file(dir / "other.json", R"({"command": "lbm-heat", "config": {"gamma": "0"}})");
  CHECK(invoke({"chi", "--config", (dir / "other.json").string(), "--output-dir", dir.string()}) == 2);
}

TEST_CASE("too many disconnected replicas exit with code 3") {
  const fs::path dir = scratch("fail");
  // N = 64 at delta = 2^-7 leaves most centers without an admissible ball
  CHECK(invoke({"chi", "--gamma", "1", "--N", "64", "--deltas", "2^-3,2^-7", "--replicas", "4", "--output-dir",
                dir.string()}) == 3);
}

TEST_CASE("chi runs reproduce byte for byte and feed the report") {
  const fs::path a = scratch("chi_a");
  const fs::path b = scratch("chi_b");
  write_file(a / "run.cfg", "gamma = 0.5\nN = 64\ndeltas = 2^-2..2^-4\nreplicas = 3\nkinds = D,Dprime\nseed = 11\n");
  CHECK(invoke({"chi", "--config", (a / "run.cfg").string(), "--output-dir", a.string(), "--threads", "1"}) == 0);
  // rerun from the manifest with another thread count
  CHECK(invoke({"chi", "--config", (a / "manifest.json").string(), "--output-dir", b.string(), "--threads", "2"}) == 0);
  CHECK(slurp(a / "chi_samples.csv") == slurp(b / "chi_samples.csv"));
  CHECK(slurp(a / "chi_samples.csv").rfind("kind,delta,replica,seed,distance\n", 0) == 0);
  const auto summary = nlohmann::json::parse(slurp(a / "chi_summary.json"));
  CHECK(summary.dump().find("\"chi\"") != std::string::npos);

  CHECK(invoke({"report", "--output-dir", a.string()}) == 0);
  const std::string rep = slurp(a / "report_logD_D.csv");
  CHECK(rep.rfind("delta,mean_logD,se,n\n", 0) == 0);
  CHECK(fs::exists(a / "report_logD_Dprime.csv"));
}

TEST_CASE("thread count precedence: config < environment < flag") {
  const fs::path dir = scratch("threads");
  write_file(dir / "t.cfg", "threads = 1\nN = 32\n");
  ::setenv("LQG_THREADS", "3", 1);
  CHECK(invoke({"field-sample", "--config", (dir / "t.cfg").string(), "--output-dir", dir.string()}) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "manifest.json"))["threads"] == 3);
  CHECK(invoke({"field-sample", "--config", (dir / "t.cfg").string(), "--threads", "2", "--output-dir",
                dir.string()}) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "manifest.json"))["threads"] == 2);
  ::unsetenv("LQG_THREADS");
}

TEST_CASE("lbm-heat and distance commands write their tables") {
  const fs::path dir = scratch("heat");
  CHECK(invoke({"lbm-heat", "--N", "64", "--replicas", "2000", "--dt", "1e-4", "--r", "0.03125", "--times",
                "0.005,0.01,0.02,0.03", "--output-dir", dir.string()}) == 0);
  CHECK(slurp(dir / "heat.csv").rfind("gamma,t,r,replicas,q_hat,q_se,p_hat,mode,seed_base\n", 0) == 0);
  const auto fit = nlohmann::json::parse(slurp(dir / "heat_fit.json"));
  CHECK(fit.contains("diffusive"));
  CHECK(fit.contains("none"));
  CHECK(invoke({"report", "--output-dir", dir.string()}) == 0);
  CHECK(slurp(dir / "report_heat.csv").rfind("t,log_inv_t,log_neg_log_p,log_neg_log_2pit_p\n", 0) == 0);

  const fs::path d2 = scratch("distance");
  CHECK(invoke({"distance", "--N", "64", "--deltas", "2^-3,2^-4", "--variants", "standard,doubled,circle_avg",
                "--output-dir", d2.string()}) == 0);
  std::istringstream rows(slurp(d2 / "distances.csv"));
  std::string line;
  int count = 0;
  while (std::getline(rows, line)) ++count;
  CHECK(count == 1 + 2 * 3);
}
