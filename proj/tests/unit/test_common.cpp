#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "lqg/common.hpp"
#include "lqg/csv.hpp"
#include "lqg/stats.hpp"

using namespace lqg;

TEST_CASE("philox matches the published known-answer block for zero key and counter") {
  // Random123 kat_vectors: philox4x32_10, ctr = 0, key = 0
  Philox rng(0);
  CHECK(rng.next_u32() == 0x6627e8d5u);
  CHECK(rng.next_u32() == 0xe169c58du);
  CHECK(rng.next_u32() == 0xbc57ac4cu);
  CHECK(rng.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("philox streams are deterministic and keyed") {
  Philox a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 64; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("derive_seed separates indices and roles") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 200; ++i)
    for (auto role : {StreamRole::field, StreamRole::noise, StreamRole::path}) seen.insert(derive_seed(7, i, role));
  CHECK(seen.size() == 600);
  CHECK(derive_seed(1, 0, StreamRole::field) != derive_seed(2, 0, StreamRole::field));
}

TEST_CASE("uniform draws stay in range and normals have unit variance") {
  Philox rng(derive_seed(3, 0, StreamRole::misc));
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double up = rng.uniform_pos();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(up > 0.0);
    REQUIRE(up <= 1.0);
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  // SE of the mean is 1/sqrt(n), of the second moment sqrt(2/n), of the fourth sqrt(96/n)
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("parallel_for visits every index exactly once for any thread count") {
  for (int threads : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i].fetch_add(1); });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));
  }
  int calls = 0;
  parallel_for(0, 4, [&](std::size_t) { ++calls; });
  CHECK(calls == 0);
}

TEST_CASE("ExactSum rounds the exact total") {
  ExactSum s;
  double naive = 0.0;
  for (int i = 0; i < 10; ++i) {
    s.add(0.1);
    naive += 0.1;
  }
  // ten copies of the double nearest 0.1 sum to 1 + 5.55e-17, which rounds to 1
  CHECK(s.value() == 1.0);
  CHECK(naive != 1.0);

  ExactSum t;
  t.add(1e300);
  t.add(1.0);
  t.add(-1e300);
  t.add(0x1.0p-1000);
  CHECK(t.value() == 1.0);

  ExactSum tiny;
  tiny.add(0x1.0p-1074);
  tiny.add(0x1.0p-1074);
  CHECK(tiny.value() == 0x1.0p-1073);
}

TEST_CASE("ExactSum is order independent") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-60, 60);
  std::vector<double> xs(5000);
  for (auto& x : xs) x = std::ldexp(mant(gen), expo(gen));
  ExactSum ref;
  for (double x : xs) ref.add(x);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(xs.begin(), xs.end(), gen);
    ExactSum a, b;
    for (std::size_t i = 0; i < xs.size(); ++i) (i % 3 == 0 ? a : b).add(xs[i]);
    a += b;
    CHECK(a.value() == ref.value());
  }
  // each term cancelled exactly by its negation leaves the residue alone
  ExactSum c;
  for (double x : xs) c.add(x);
  for (double x : xs) c.add(-x);
  c.add(0.375);
  CHECK(c.value() == 0.375);
}

TEST_CASE("grid helpers") {
  CHECK(is_power_of_two(1));
  CHECK(is_power_of_two(1024));
  CHECK_FALSE(is_power_of_two(0));
  CHECK_FALSE(is_power_of_two(96));
  CHECK(log2_exact(512) == 9);
  CHECK_THROWS_AS(log2_exact(100), DomainError);

  ScalarGrid g(8);
  CHECK(g.cell_of({0.0, 0.0}) == GridIndex{0, 0});
  CHECK(g.cell_of({1.0, 1.0}) == GridIndex{7, 7});
  CHECK(g.cell_of({0.125, 0.5}) == GridIndex{1, 4});
  CHECK(g.position(0, 7).y == doctest::Approx(0.9375));
}

TEST_CASE("csv numbers round-trip") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(csv_num(x)) == x);
  CHECK(csv_num(std::nan("")) == "nan");
  CHECK(csv_num(-HUGE_VAL) == "-inf");
}

TEST_CASE("linear_fit recovers exact power laws") {
  std::vector<double> x, y;
  for (int k = 3; k <= 7; ++k) {
    const double delta = std::ldexp(1.0, -k);
    x.push_back(std::log(1.0 / delta));
    y.push_back(std::log(3.7 * std::pow(delta, -0.6431)));
  }
  const LinearFit f = linear_fit(x, y);
  CHECK(std::abs(f.slope - 0.6431) < 1e-12);
  CHECK(std::abs(f.intercept - std::log(3.7)) < 1e-12);
  CHECK_FALSE(f.weighted);
}

TEST_CASE("weighted linear_fit matches the normal equations") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0, 5.0};
  const std::vector<double> y{1.1, 1.9, 3.2, 3.8, 6.3};
  const std::vector<double> se{0.1, 0.2, 0.1, 0.3, 0.2};
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (se[i] * se[i]);
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  const LinearFit f = linear_fit(x, y, se);
  CHECK(f.weighted);
  CHECK(f.slope == doctest::Approx((sw * sxy - sx * sy) / det).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx((sxx * sy - sx * sxy) / det).epsilon(1e-12));
  CHECK(f.slope_se == doctest::Approx(std::sqrt(sw / det)).epsilon(1e-12));

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(linear_fit(one, one), InsufficientData);
  const std::vector<double> same{2.0, 2.0, 2.0};
  const std::vector<double> ys{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(linear_fit(same, ys), InsufficientData);
}

TEST_CASE("jackknife of the mean equals the classical standard error") {
  const std::vector<double> v{0.3, 1.7, -0.4, 2.2, 0.9, 1.1, -1.3};
  const MeanSe m = mean_se(v);
  const double jk = jackknife_se(v, [](std::span<const double> s) {
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  });
  CHECK(jk == doctest::Approx(m.se).epsilon(1e-12));
  CHECK(m.sd == doctest::Approx(m.se * std::sqrt(7.0)));
}
