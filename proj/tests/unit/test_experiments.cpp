#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lqg/experiments.hpp"

using namespace lqg;

namespace {

// Every replica at delta gets D = round(c delta^-chi).
ChiSamples synthetic(const std::vector<double>& deltas, int replicas, double chi, double c) {
  ChiSamples s;
  s.config.deltas = deltas;
  s.config.replicas = replicas;
  auto& table = s.values[DistanceKind::D];
  for (double d : deltas) {
    std::vector<std::optional<int>> col;
    for (int r = 0; r < replicas; ++r) col.push_back(static_cast<int>(std::lround(c * std::pow(d, -chi))));
    table.push_back(col);
  }
  s.capped.assign(deltas.size(), 0);
  return s;
}

}  // namespace

TEST_CASE("KPZ bound values") {
  CHECK(kpz_bound(0.0) == 1.0);
  // 4[(1 + g^2/4) - sqrt(1 + g^4/16)] / g^2
  CHECK(kpz_bound(0.5) == doctest::Approx(4.0 * (1.0625 - std::sqrt(1.00390625)) / 0.25).epsilon(1e-14));
  CHECK(kpz_bound(0.5) == doctest::Approx(0.968780).epsilon(1e-6));
  CHECK(kpz_bound(1.0) == doctest::Approx(0.87689).epsilon(1e-5));
  CHECK(kpz_bound(1e-4) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(heat_target(0.5) == doctest::Approx(1.0 / 3.0));
  CHECK(heat_target(1.0) == 1.0);
}

TEST_CASE("distance kind names") {
  for (DistanceKind k : {DistanceKind::D, DistanceKind::Dprime, DistanceKind::D2, DistanceKind::Dcirc})
    CHECK(distance_kind_from_string(to_string(k)) == k);
  CHECK(distance_kind_from_string("D'") == DistanceKind::Dprime);
  CHECK_THROWS(distance_kind_from_string("D3"));
}

TEST_CASE("chi fit on an exact power law") {
  // D values 2^(k * 0.5) * 4 are integers for even k
  const ChiSamples s = synthetic({0.25, 0.0625, 0.015625, 0.00390625}, 5, 0.5, 4.0);
  const ChiEstimate e = estimate_chi(s, DistanceKind::D);
  CHECK(std::abs(e.chi - 0.5) < 1e-12);
  CHECK(e.per_delta.size() == 4);
  CHECK(e.per_delta[0].n == 5);
  CHECK(e.per_delta[0].dropped == 0);
  CHECK(e.within_bound);
}

TEST_CASE("disconnected replicas are dropped up to ten percent") {
  ChiSamples s = synthetic({0.125, 0.0625, 0.03125}, 20, 1.0, 1.0);
  auto& col = s.values[DistanceKind::D][2];
  col[3].reset();
  col[11].reset();
  const ChiEstimate e = estimate_chi(s, DistanceKind::D);
  CHECK(e.per_delta[2].n == 18);
  CHECK(e.per_delta[2].dropped == 2);
  CHECK(std::abs(e.chi - 1.0) < 1e-12);
  col[0].reset();
  CHECK_THROWS_AS(estimate_chi(s, DistanceKind::D), ExperimentFailure);
  CHECK_THROWS_AS(estimate_chi(synthetic({0.125}, 3, 1.0, 1.0), DistanceKind::D), InsufficientData);
}

TEST_CASE("subadditivity defect of a pure power law is the prefactor term") {
  // D = c delta^-chi: defect = log c (1 - 2) / (la + lb) = -log c / log(1/(ab))
  const double c = 4.0;
  const ChiSamples s = synthetic({0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625}, 4, 1.0, c);
  const auto rows = subadditivity_check(s, DistanceKind::D, {{0.125, 0.125}, {0.25, 0.125}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].defect == doctest::Approx(-std::log(c) / std::log(64.0)).epsilon(1e-12));
  CHECK(rows[1].defect == doctest::Approx(-std::log(c) / std::log(32.0)).epsilon(1e-12));
  CHECK(rows[0].se == 0.0);
  CHECK(rows[0].n == 4);
  // the pair order does not matter
  CHECK(subadditivity_check(s, DistanceKind::D, {{0.125, 0.25}})[0].defect == rows[1].defect);
  CHECK_THROWS_AS(subadditivity_check(s, DistanceKind::D, {{0.03125, 0.03125}}), DomainError);
  CHECK_THROWS_AS(subadditivity_check(s, DistanceKind::D2, {{0.5, 0.5}}), DomainError);
}

TEST_CASE("concentration ratio") {
  ChiSamples s = synthetic({0.125, 0.0625}, 4, 1.0, 1.0);
  // log D at delta = 1/8: log 8 +- log 2 around log 8 for two replicas each
  auto& col = s.values[DistanceKind::D][0];
  col = {4, 16, 4, 16};
  const auto rows = concentration_check(s, DistanceKind::D);
  const double sd = std::log(2.0) * std::sqrt(4.0 / 3.0);
  CHECK(rows[0].sd_log == doctest::Approx(sd).epsilon(1e-12));
  CHECK(rows[0].ratio == doctest::Approx(sd / std::log(8.0)).epsilon(1e-12));
  CHECK(rows[1].sd_log == 0.0);
}

TEST_CASE("consistency residual") {
  const ConsistencyResult r = heat_distance_consistency(0.6, 0.5);
  CHECK(r.target == doctest::Approx(0.6 / 1.4));
  CHECK(r.residual == doctest::Approx(0.5 - 0.6 / 1.4));
}

TEST_CASE("gamma = 0 chi is one on a coarse grid and threads do not matter") {
  ChiConfig c;
  c.field = {Engine::tilde_h, 256, 7, 0, 2};
  c.deltas = {0.125, 0.0625, 0.03125, 0.015625};
  c.kinds = {DistanceKind::D, DistanceKind::Dprime};
  c.replicas = 3;
  const ChiSamples s = sample_distances(c);
  // gamma = 0 replicas are identical copies
  for (const auto& col : s.values.at(DistanceKind::D)) CHECK((col[0] == col[1] && col[1] == col[2]));
  const ChiEstimate d = estimate_chi(s, DistanceKind::D);
  CHECK(std::abs(d.chi - 1.0) < 0.05);
  CHECK(d.bound == 1.0);

  c.gamma = 0.7;
  c.replicas = 4;
  c.deltas = {0.125, 0.0625};
  c.kinds = {DistanceKind::D, DistanceKind::D2, DistanceKind::Dcirc, DistanceKind::Dprime};
  c.threads = 1;
  const ChiSamples a = sample_distances(c);
  c.threads = 3;
  const ChiSamples b = sample_distances(c);
  CHECK(a.values == b.values);
  CHECK(a.capped == b.capped);
  // doubled balls are smaller, so chains are longer
  for (std::size_t d = 0; d < 2; ++d)
    for (int r = 0; r < 4; ++r) {
      const auto& x = a.values.at(DistanceKind::D)[d][r];
      const auto& y = a.values.at(DistanceKind::D2)[d][r];
      if (x && y) CHECK(*y >= *x);
    }
}

TEST_CASE("point-to-boundary exponent at gamma = 0") {
  BoundaryConfig c;
  c.field = {Engine::tilde_h, 256, 7, 0, 2};
  c.deltas = {0.0625, 0.03125, 0.015625};
  c.lambda = 0.25;
  const ChiEstimate e = point_to_boundary(c);
  CHECK(e.per_delta.size() == 3);
  CHECK(std::abs(e.chi - 1.0) < 0.1);
}

TEST_CASE("chi report CSV") {
  const ChiEstimate e = estimate_chi(synthetic({0.25, 0.0625}, 2, 0.5, 4.0), DistanceKind::D);
  std::ostringstream out;
  write_chi_report_csv(out, e);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "delta,mean_logD,se,n");
  std::getline(in, line);
  CHECK(line.rfind("0.25,", 0) == 0);
}
