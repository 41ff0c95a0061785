#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "lqg/field.hpp"

using namespace lqg;

namespace {

// pi * int_{t1}^{t2} exp(-d^2/2t) / (2 pi t) dt = (E1(a/t2) - E1(a/t1)) / 2 with a = d^2/2
double whole_plane_covariance(double d, double t1, double t2) {
  if (d == 0.0) return 0.5 * std::log(t2 / t1);
  const double a = 0.5 * d * d;
  return 0.5 * (boost::math::expint(1, a / t2) - boost::math::expint(1, a / t1));
}

double layer_sum_variance(const FieldStack& s, int m, GridIndex g) {
  double v = 0.0;
  for (int j = 0; j < m; ++j) v += s.variance_profile(j)(g);
  return v;
}

}  // namespace

TEST_CASE("engine names round-trip") {
  for (Engine e : {Engine::tilde_h, Engine::eta, Engine::hat_h}) CHECK(engine_from_string(to_string(e)) == e);
  CHECK_THROWS_AS(engine_from_string("gff"), DomainError);
}

TEST_CASE("whole-plane kernel is the Gaussian density of variance t per coordinate") {
  const double t = 0.03;
  const Point u{0.2, 0.3}, v{0.35, 0.1};
  const double d2 = 0.15 * 0.15 + 0.2 * 0.2;
  CHECK(kernel_eval(KernelSpec::whole_plane(t), u, v) ==
        doctest::Approx(std::exp(-d2 / (2 * t)) / (2 * std::numbers::pi * t)).epsilon(1e-14));
}

TEST_CASE("Dirichlet kernel: sine series and images agree") {
  for (double t : {0.01, 0.05, 0.2})
    for (double x : {0.1, 0.5, 0.77})
      for (double y : {0.05, 0.4, 0.9})
        CHECK(dirichlet_kernel_spectral(t, x, y) == doctest::Approx(dirichlet_kernel_images(t, x, y)).epsilon(1e-10));
}

TEST_CASE("Dirichlet kernel vanishes on the boundary and integrates to the survival probability") {
  CHECK(std::abs(dirichlet_kernel_images(0.02, 0.0, 0.4)) < 1e-15);
  CHECK(std::abs(dirichlet_kernel_spectral(0.3, 0.3, 1.0)) < 1e-12);
  // t large: survival of the first mode only, 4/pi sin(pi x) exp(-pi^2 t / 2)
  const double t = 2.0, x = 0.3;
  double integral = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) integral += dirichlet_kernel_spectral(t, x, (i + 0.5) / n) / n;
  CHECK(integral == doctest::Approx(4.0 / std::numbers::pi * std::sin(std::numbers::pi * x) *
                                    std::exp(-std::numbers::pi * std::numbers::pi * t / 2))
                        .epsilon(1e-6));
}

TEST_CASE("unit-square kernel is a product of one-dimensional kernels") {
  const double t = 0.04;
  const Point u{0.3, 0.6}, v{0.45, 0.52};
  CHECK(kernel_eval(KernelSpec::unit_square(t), u, v) ==
        doctest::Approx(dirichlet_kernel_images(t, u.x, v.x) * dirichlet_kernel_images(t, u.y, v.y)).epsilon(1e-12));
  CHECK_THROWS_AS(kernel_eval(KernelSpec::unit_square(t), {1.2, 0.5}, v), DomainError);
}

TEST_CASE("ball-truncated kernel") {
  const double t = 0.001, r = 0.1;
  const Point u{0.5, 0.5};
  CHECK(std::abs(kernel_eval(KernelSpec::ball(t, r), u, {0.6, 0.5})) < 1e-13);
  CHECK_THROWS_AS(kernel_eval(KernelSpec::ball(t, r), u, {0.65, 0.5}), DomainError);
  // bridge from u to v stays inside the half-plane bounded by the nearest tangent line
  const double d = 0.01;
  const double p = kernel_eval(KernelSpec::ball(t, r), u, {0.5 + d, 0.5});
  const double free = kernel_eval(KernelSpec::whole_plane(t), u, {0.5 + d, 0.5});
  CHECK(p == doctest::Approx(free * (1.0 - std::exp(-2.0 * r * (r - d) / t))).epsilon(1e-13));
  CHECK(p < free);
  CHECK(free - p < 1e-7 * free);
}

TEST_CASE("eta truncation radius") {
  CHECK(eta_truncation_radius(1e-4) == doctest::Approx(0.25 * 0.01 * std::log(1e4)).epsilon(1e-14));
  CHECK(eta_truncation_radius(0.01) == 0.1);
  CHECK(eta_truncation_radius(0.5) == 0.1);
}

TEST_CASE("octave slices tile the octave geometrically with log-mean evaluation times") {
  for (int j : {0, 3}) {
    const auto sl = octave_slices(j, 4);
    REQUIRE(sl.size() == 4);
    CHECK(sl.front().begin == doctest::Approx(std::pow(4.0, -(j + 1))).epsilon(1e-15));
    CHECK(sl.back().end == doctest::Approx(std::pow(4.0, -j)).epsilon(1e-15));
    for (std::size_t i = 0; i < sl.size(); ++i) {
      if (i > 0) CHECK(sl[i].begin == sl[i - 1].end);
      CHECK(sl[i].end / sl[i].begin == doctest::Approx(std::pow(4.0, 0.25)));
      CHECK(sl[i].eval == doctest::Approx((sl[i].end - sl[i].begin) / std::log(sl[i].end / sl[i].begin)));
    }
  }
}

TEST_CASE("hat_h covariance oracle against the exponential-integral closed form") {
  const double t1 = std::pow(2.0, -10);
  CHECK(covariance_oracle(Engine::hat_h, {0.3, 0.5}, {0.3, 0.5}, 1.0 / 32, 1.0) ==
        doctest::Approx(5.0 * std::log(2.0)).epsilon(1e-8));
  for (double d : {0.01, 0.1, 0.3}) {
    CHECK(covariance_oracle(Engine::hat_h, {0.3, 0.5}, {0.3 + d, 0.5}, 1.0 / 32, 1.0) ==
          doctest::Approx(whole_plane_covariance(d, t1, 1.0)).epsilon(1e-7));
  }
  CHECK(covariance_oracle(Engine::hat_h, {0.3, 0.5}, {0.4, 0.5}, 1.0 / 32, 1.0) == doctest::Approx(2.3626).epsilon(1e-4));
}

TEST_CASE("killed and truncated oracles sit below the whole-plane one") {
  const Point u{0.5, 0.5}, v{0.55, 0.5};
  const double hat = covariance_oracle(Engine::hat_h, u, v, 1.0 / 16, 1.0);
  const double tilde = covariance_oracle(Engine::tilde_h, u, v, 1.0 / 16, 1.0);
  const double eta = covariance_oracle(Engine::eta, u, v, 1.0 / 16, 1.0);
  CHECK(tilde < hat);
  CHECK(eta < hat);
  CHECK(tilde > 0.0);
  // at fine scales the boundary is invisible from the center
  CHECK(covariance_oracle(Engine::tilde_h, u, u, 1.0 / 1024, 1.0 / 64) ==
        doctest::Approx(whole_plane_covariance(0.0, std::pow(2.0, -20), std::pow(2.0, -12))).epsilon(1e-8));
}

TEST_CASE("eta layers are exactly uncorrelated beyond twice the truncation radius") {
  // octave 3 spans s in (4^-4, 4^-3); every cutoff is at most 0.1
  CHECK(covariance_oracle(Engine::eta, {0.3, 0.5}, {0.55, 0.5}, 1.0 / 16, 1.0 / 8) == 0.0);
}

TEST_CASE("stack parameter validation") {
  CHECK_THROWS_AS(sample_stack({Engine::hat_h, 96, 4, 0, 4}), DomainError);
  CHECK_THROWS_AS(sample_stack({Engine::hat_h, 64, 6, 0, 4}), DomainError);
  CHECK_THROWS_AS(sample_stack({Engine::hat_h, 64, 0, 0, 4}), DomainError);
  CHECK_THROWS_AS(sample_stack({Engine::hat_h, 64, 3, 0, 0}), DomainError);
  CHECK(estimate_stack_bytes({Engine::hat_h, 64, 5, 0, 4}) > 5u * 64 * 64 * 8);
}

TEST_CASE("memory budget is enforced") {
  ::setenv("LQG_MEMORY_LIMIT_MB", "1", 1);
  CHECK(memory_budget_bytes() == 1u << 20);
  CHECK_THROWS_AS(sample_stack({Engine::tilde_h, 512, 8, 0, 4}), ResourceError);
  ::unsetenv("LQG_MEMORY_LIMIT_MB");
  CHECK(memory_budget_bytes() == std::size_t{4096} << 20);
}

TEST_CASE("hat_h model variance is log 2 per octave everywhere") {
  const FieldStack s = sample_stack({Engine::hat_h, 64, 5, 1, 4});
  // the synthesis torus is 4 units wide, so the coarsest octave picks up
  // periodic images of relative size about 1e-4
  for (int j = 0; j < 5; ++j) {
    const double at0 = s.variance_profile(j)(0, 0);
    CHECK(at0 == doctest::Approx(std::log(2.0)).epsilon(j == 0 ? 2e-4 : 1e-9));
    for (GridIndex g : {GridIndex{31, 17}, GridIndex{63, 63}})
      CHECK(s.variance_profile(j)(g) == doctest::Approx(at0).epsilon(1e-12));
  }
  CHECK(field_at_scale(s, 5, {10, 10}).variance == doctest::Approx(5 * std::log(2.0)).epsilon(1e-4));
  CHECK(field_at_scale(s, 0, {10, 10}).value == 0.0);
}

TEST_CASE("killed-engine model variance matches the quadrature oracle") {
  for (Engine e : {Engine::tilde_h, Engine::eta}) {
    const FieldStack s = sample_stack({e, 64, 5, 1, 4});
    for (GridIndex g : {GridIndex{32, 32}, GridIndex{12, 40}, GridIndex{20, 9}}) {  // eta oracle needs 1/10 clearance
      const Point p = s.layer(0).position(g.ix, g.iy);
      for (int m : {2, 5}) {
        const double oracle = covariance_oracle(e, p, p, std::ldexp(1.0, -m), 1.0);
        INFO(to_string(e), " at (", g.ix, ",", g.iy, ") m=", m);
        CHECK(layer_sum_variance(s, m, g) == doctest::Approx(oracle).epsilon(3e-3));
      }
    }
  }
}

TEST_CASE("stacks are deterministic in their parameters") {
  const StackParams p{Engine::tilde_h, 32, 4, 99, 2};
  const FieldStack a = sample_stack(p);
  const FieldStack b = sample_stack(p);
  StackParams q = p;
  q.seed = 100;
  const FieldStack c = sample_stack(q);
  CHECK(a.full_field().values() == b.full_field().values());
  CHECK(a.full_field().values() != c.full_field().values());
  // octave j draws from its own stream, so shallower stacks share the leading layers
  StackParams shallow = p;
  shallow.octaves = 2;
  const FieldStack d = sample_stack(shallow);
  CHECK(d.layer(1).values() == a.layer(1).values());
}

TEST_CASE("empirical layer variance tracks the model variance") {
  // one point per sample; 600 samples give an SE of about 6% of the variance
  const int n = 600;
  const GridIndex g{9, 20};
  for (Engine e : {Engine::hat_h, Engine::tilde_h}) {
    double s2 = 0.0, model = 0.0;
    for (int i = 0; i < n; ++i) {
      const FieldStack s = sample_stack({e, 32, 4, derive_seed(5, i, StreamRole::field), 2});
      const double x = s.layer(2)(g);
      s2 += x * x;
      model = s.variance_profile(2)(g);
    }
    const double var = s2 / n;
    CHECK(std::abs(var - model) < 4.0 * model * std::sqrt(2.0 / n));
  }
}

TEST_CASE("LQGF1 round trip is bit exact") {
  const FieldStack s = sample_stack({Engine::eta, 32, 3, 12345, 2});
  std::stringstream buf;
  write_stack(s, buf);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 5) == "LQGF1");
  CHECK(bytes.size() == 5 + 1 + 2 + 4 + 4 + 4 + 8 + 3u * 32 * 32 * 8);
  std::stringstream in(bytes);
  const FieldStack r = read_stack(in);
  CHECK(r.params() == s.params());
  for (int j = 0; j < 3; ++j) CHECK(r.layer(j).values() == s.layer(j).values());

  std::stringstream bad("LQGF2xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx");
  CHECK_THROWS(read_stack(bad));
}
