#include "lqg/field.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <list>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "fft.hpp"

namespace lqg {

using std::numbers::pi;

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::tilde_h: return "tilde_h";
    case Engine::eta: return "eta";
    case Engine::hat_h: return "hat_h";
  }
  return "unknown";
}

Engine engine_from_string(std::string_view name) {
  if (name == "tilde_h") return Engine::tilde_h;
  if (name == "eta") return Engine::eta;
  if (name == "hat_h") return Engine::hat_h;
  throw DomainError("unknown engine '" + std::string(name) + "' (expected tilde_h, eta or hat_h)");
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

namespace {

double gaussian_1d(double t, double z) { return std::exp(-z * z / (2.0 * t)) / std::sqrt(2.0 * pi * t); }

bool in_unit_square(Point p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

}  // namespace

double dirichlet_kernel_spectral(double t, double x, double y) {
  if (t <= 0.0) throw DomainError("heat kernel time must be positive");
  double sum = 0.0;
  for (int n = 1;; ++n) {
    const double decay = std::exp(-0.5 * n * n * pi * pi * t);
    sum += std::sin(n * pi * x) * std::sin(n * pi * y) * decay;
    if (decay < 1e-18) break;
  }
  return 2.0 * sum;
}

double dirichlet_kernel_images(double t, double x, double y) {
  if (t <= 0.0) throw DomainError("heat kernel time must be positive");
  double sum = gaussian_1d(t, x - y) - gaussian_1d(t, x + y);
  for (int n = 1;; ++n) {
    const double term = gaussian_1d(t, x - y + 2.0 * n) + gaussian_1d(t, x - y - 2.0 * n) -
                        gaussian_1d(t, x + y + 2.0 * n) - gaussian_1d(t, x + y - 2.0 * n);
    sum += term;
    // Images beyond |z| > 2n - 2 are all smaller than this bound.
    if (gaussian_1d(t, 2.0 * n - 2.0) < 1e-300 || (n > 2 && std::fabs(term) < 1e-18 * std::fabs(sum))) break;
    if (n > 64) break;
  }
  return sum;
}

namespace {

double dirichlet_kernel(double t, double x, double y) {
  return t >= 0.05 ? dirichlet_kernel_spectral(t, x, y) : dirichlet_kernel_images(t, x, y);
}

double whole_plane_kernel(double t, Point u, Point v) {
  const double dx = u.x - v.x;
  const double dy = u.y - v.y;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * t)) / (2.0 * pi * t);
}

}  // namespace

double kernel_eval(const KernelSpec& spec, Point u, Point v) {
  if (!(spec.time > 0.0)) throw DomainError("kernel_eval: time must be positive");
  switch (spec.domain) {
    case KernelSpec::Domain::whole_plane:
      return whole_plane_kernel(spec.time, u, v);
    case KernelSpec::Domain::unit_square_killed:
      if (!in_unit_square(u) || !in_unit_square(v)) throw DomainError("kernel_eval: point outside [0,1]^2");
      return dirichlet_kernel(spec.time, u.x, v.x) * dirichlet_kernel(spec.time, u.y, v.y);
    case KernelSpec::Domain::ball_truncated: {
      if (!(spec.radius > 0.0)) throw DomainError("kernel_eval: truncation radius must be positive");
      const double d = distance(u, v);
      if (d > spec.radius) throw DomainError("kernel_eval: point outside the truncation ball");
      const double survival = 1.0 - std::exp(-2.0 * spec.radius * (spec.radius - d) / spec.time);
      return whole_plane_kernel(spec.time, u, v) * survival;
    }
  }
  throw DomainError("kernel_eval: unknown domain");
}

double eta_truncation_radius(double s) {
  if (!(s > 0.0)) throw DomainError("eta_truncation_radius: s must be positive");
  return std::min(0.25 * std::sqrt(s) * std::fabs(std::log(s)), 0.1);
}

std::vector<TimeSlice> octave_slices(int octave, int slices) {
  if (slices < 1) throw DomainError("slices_per_octave must be >= 1");
  const double lo = std::ldexp(1.0, -2 * (octave + 1));
  const double ratio_log = std::log(4.0) / slices;
  std::vector<TimeSlice> out;
  out.reserve(slices);
  for (int a = 0; a < slices; ++a) {
    const double b = lo * std::exp(ratio_log * a);
    const double e = a + 1 == slices ? 4.0 * lo : lo * std::exp(ratio_log * (a + 1));
    out.push_back({b, e, (e - b) / std::log(e / b)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis plan
// ---------------------------------------------------------------------------

/// Deterministic part of the synthesis for one parameter set: per octave the
/// spectral filter applied to white noise and the exact variance profile.
class SynthesisPlan {
 public:
  struct Octave {
    int torus = 0;              ///< M, the periodic grid size
    bool odd_reflect = false;   ///< killed engines: noise extended oddly across the square's edges
    std::vector<double> filter; ///< sqrt(spectral density) / M^2 on the half spectrum
    ScalarGrid variance;        ///< exact per-point variance of the layer
  };

  SynthesisPlan(Engine engine, int n, int octaves, int slices);

  const Octave& octave(int j) const { return octaves_.at(j); }
  std::size_t bytes() const noexcept { return bytes_; }

 private:
  std::vector<Octave> octaves_;
  std::size_t bytes_ = 0;
};

namespace {

int torus_multiple(Engine engine, int octave) {
  if (engine == Engine::hat_h) return octave <= 1 ? 4 : 2;
  return 2;  // odd reflection needs period exactly 2
}

// Signed minimal-image offset on a periodic grid of size m.
int signed_offset(int d, int m) { return d < m / 2 ? d : d - m; }

// DFT of a real even sequence (result real), direct O(m^2) evaluation.
std::vector<double> even_dft(const std::vector<double>& seq) {
  const int m = static_cast<int>(seq.size());
  std::vector<double> out(m / 2 + 1, 0.0);
  std::vector<double> cos_table(m);
  for (int i = 0; i < m; ++i) cos_table[i] = std::cos(2.0 * pi * i / m);
  for (int k = 0; k <= m / 2; ++k) {
    double acc = 0.0;
    long long idx = 0;
    for (int x = 0; x < m; ++x) {
      acc += seq[x] * cos_table[idx];
      idx += k;
      if (idx >= m) idx -= m;
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

SynthesisPlan::SynthesisPlan(Engine engine, int n, int octaves, int slices) {
  const double h = 1.0 / n;
  octaves_.resize(octaves);
  for (int j = 0; j < octaves; ++j) {
    Octave& oct = octaves_[j];
    const int m = torus_multiple(engine, j) * n;
    oct.torus = m;
    oct.odd_reflect = engine != Engine::hat_h;
    const int half = m / 2 + 1;
    std::vector<double> density(static_cast<std::size_t>(m) * half, 0.0);

    for (const TimeSlice& sl : octave_slices(j, slices)) {
      const double s = sl.eval;
      const double weight = pi * h * h * (sl.end - sl.begin);
      if (engine == Engine::eta) {
        const double radius = eta_truncation_radius(s);
        detail::Fft2d fft(m);
        detail::RealBuffer kernel(fft.real_size());
        detail::ComplexBuffer spec(fft.spectrum_size());
        for (int y = 0; y < m; ++y) {
          const double py = signed_offset(y, m) * h;
          for (int x = 0; x < m; ++x) {
            const double px = signed_offset(x, m) * h;
            const double r2 = px * px + py * py;
            kernel[static_cast<std::size_t>(y) * m + x] =
                r2 <= radius * radius ? std::exp(-r2 / s) / (pi * s) : 0.0;
          }
        }
        fft.forward(kernel, spec);
        for (std::size_t i = 0; i < density.size(); ++i) density[i] += weight * std::norm(spec[i]);
      } else {
        // Periodized Gaussian, separable: K(x, y) = k(x) k(y).
        std::vector<double> k1(m);
        for (int x = 0; x < m; ++x) {
          double acc = 0.0;
          for (int img = -3; img <= 3; ++img) {
            const double z = (signed_offset(x, m) + static_cast<double>(img) * m) * h;
            acc += std::exp(-z * z / s);
          }
          k1[x] = acc / std::sqrt(pi * s);
        }
        const std::vector<double> khat = even_dft(k1);
        for (int ky = 0; ky < m; ++ky) {
          const double fy = khat[ky <= m / 2 ? ky : m - ky];
          for (int kx = 0; kx < half; ++kx) {
            const double v = fy * khat[kx];
            density[static_cast<std::size_t>(ky) * half + kx] += weight * v * v;
          }
        }
      }
    }

    const double norm = 1.0 / (static_cast<double>(m) * m);
    oct.filter.resize(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) oct.filter[i] = std::sqrt(density[i]) * norm;

    oct.variance = ScalarGrid(n);
    if (!oct.odd_reflect) {
      double total = 0.0;
      // Full-spectrum sum from the half spectrum (Hermitian symmetry).
      for (int ky = 0; ky < m; ++ky) {
        for (int kx = 0; kx < half; ++kx) {
          const bool mirrored = kx != 0 && kx != m / 2;
          total += density[static_cast<std::size_t>(ky) * half + kx] * (mirrored ? 2.0 : 1.0);
        }
      }
      std::fill(oct.variance.values().begin(), oct.variance.values().end(), total * norm);
    } else {
      // Autocovariance of the periodic field, then fold the reflection images:
      // Var(v) = A(0) - A(2v_x, 0) - A(0, 2v_y) + A(2v_x, 2v_y).
      detail::Fft2d fft(m);
      detail::ComplexBuffer spec(fft.spectrum_size());
      detail::RealBuffer autocov(fft.real_size());
      for (std::size_t i = 0; i < density.size(); ++i) spec[i] = density[i];
      fft.inverse(spec, autocov);
      auto a = [&](int x, int y) { return autocov[static_cast<std::size_t>(y % m) * m + (x % m)] * norm; };
      for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
          oct.variance(ix, iy) = a(0, 0) - a(2 * ix + 1, 0) - a(0, 2 * iy + 1) + a(2 * ix + 1, 2 * iy + 1);
        }
      }
    }
    bytes_ += oct.filter.size() * sizeof(double) + oct.variance.values().size() * sizeof(double);
  }
}

namespace {

struct PlanKey {
  Engine engine;
  int n;
  int octaves;
  int slices;
  friend bool operator==(const PlanKey&, const PlanKey&) = default;
};

std::size_t plan_bytes_estimate(const StackParams& p) {
  std::size_t total = 0;
  for (int j = 0; j < p.octaves; ++j) {
    const std::size_t m = static_cast<std::size_t>(torus_multiple(p.engine, j)) * p.grid_size;
    total += m * (m / 2 + 1) * sizeof(double);
    total += static_cast<std::size_t>(p.grid_size) * p.grid_size * sizeof(double);
  }
  return total;
}

// Small LRU cache; plans are immutable and shared by all stacks with the same shape.
std::shared_ptr<const SynthesisPlan> plan_for(const StackParams& p) {
  static std::mutex mutex;
  static std::list<std::pair<PlanKey, std::shared_ptr<const SynthesisPlan>>> cache;
  constexpr std::size_t kCapacity = 4;
  const PlanKey key{p.engine, p.grid_size, p.octaves, p.slices_per_octave};
  std::lock_guard lock(mutex);
  for (auto it = cache.begin(); it != cache.end(); ++it) {
    if (it->first == key) {
      cache.splice(cache.begin(), cache, it);
      return cache.front().second;
    }
  }
  auto plan = std::make_shared<const SynthesisPlan>(p.engine, p.grid_size, p.octaves, p.slices_per_octave);
  cache.emplace_front(key, plan);
  if (cache.size() > kCapacity) cache.pop_back();
  return plan;
}

void validate(const StackParams& p) {
  if (!is_power_of_two(p.grid_size) || p.grid_size < 8)
    throw DomainError("grid size must be a power of two >= 8, got " + std::to_string(p.grid_size));
  const int max_octaves = log2_exact(p.grid_size) - 1;
  if (p.octaves < 1 || p.octaves > max_octaves)
    throw DomainError("octaves must be in [1, log2(N) - 1] = [1, " + std::to_string(max_octaves) + "], got " +
                      std::to_string(p.octaves));
  if (p.slices_per_octave < 1) throw DomainError("slices_per_octave must be >= 1");
}

}  // namespace

std::size_t memory_budget_bytes() {
  std::size_t mb = 4096;
  if (const char* env = std::getenv("LQG_MEMORY_LIMIT_MB")) {
    const long long v = std::atoll(env);
    if (v > 0) mb = static_cast<std::size_t>(v);
  }
  return mb * 1024 * 1024;
}

std::size_t estimate_stack_bytes(const StackParams& p) {
  validate(p);
  const std::size_t n2 = static_cast<std::size_t>(p.grid_size) * p.grid_size;
  std::size_t max_m = 0;
  for (int j = 0; j < p.octaves; ++j)
    max_m = std::max<std::size_t>(max_m, static_cast<std::size_t>(torus_multiple(p.engine, j)) * p.grid_size);
  const std::size_t workspace = max_m * max_m * sizeof(double) * 3;
  return plan_bytes_estimate(p) + static_cast<std::size_t>(p.octaves + 2) * n2 * sizeof(double) + workspace;
}

// ---------------------------------------------------------------------------
// FieldStack
// ---------------------------------------------------------------------------

FieldStack::FieldStack(StackParams params, std::shared_ptr<const SynthesisPlan> plan,
                       std::vector<ScalarGrid> layers)
    : params_(params), plan_(std::move(plan)), layers_(std::move(layers)) {
  if (static_cast<int>(layers_.size()) != params_.octaves)
    throw InvariantViolation("FieldStack: layer count does not match octave count");
}

const ScalarGrid& FieldStack::variance_profile(int j) const { return plan_->octave(j).variance; }

std::shared_ptr<const ScalarGrid> FieldStack::shared_full_field() const {
  if (!full_field_) {
    auto sum = std::make_shared<ScalarGrid>(grid_size());
    for (const auto& layer : layers_) {
      for (std::size_t i = 0; i < layer.values().size(); ++i) sum->values()[i] += layer.values()[i];
    }
    full_field_ = std::move(sum);
  }
  return full_field_;
}

std::shared_ptr<const ScalarGrid> FieldStack::shared_full_variance() const {
  if (!full_variance_) {
    auto sum = std::make_shared<ScalarGrid>(grid_size());
    for (int j = 0; j < octaves(); ++j) {
      const auto& var = variance_profile(j).values();
      for (std::size_t i = 0; i < var.size(); ++i) sum->values()[i] += var[i];
    }
    full_variance_ = std::move(sum);
  }
  return full_variance_;
}

const ScalarGrid& FieldStack::full_field() const { return *shared_full_field(); }
const ScalarGrid& FieldStack::full_variance() const { return *shared_full_variance(); }

FieldStack sample_stack(const StackParams& params) {
  validate(params);
  const std::size_t required = estimate_stack_bytes(params);
  if (required > memory_budget_bytes()) {
    std::ostringstream msg;
    msg << "field stack N=" << params.grid_size << " J=" << params.octaves << " needs " << required
        << " bytes, budget is " << memory_budget_bytes();
    throw ResourceError(msg.str(), required);
  }
  auto plan = plan_for(params);
  const int n = params.grid_size;
  std::vector<ScalarGrid> layers;
  layers.reserve(params.octaves);

  for (int j = 0; j < params.octaves; ++j) {
    const auto& oct = plan->octave(j);
    const int m = oct.torus;
    detail::Fft2d fft(m);
    detail::RealBuffer torus(fft.real_size());
    detail::ComplexBuffer spec(fft.spectrum_size());
    Philox rng(derive_seed(params.seed, static_cast<std::uint64_t>(j), StreamRole::noise));

    if (oct.odd_reflect) {
      std::vector<double> noise(static_cast<std::size_t>(n) * n);
      for (double& z : noise) z = rng.normal();
      for (int y = 0; y < m; ++y) {
        const bool fy = y >= n;
        const int sy = fy ? m - 1 - y : y;
        for (int x = 0; x < m; ++x) {
          const bool fx = x >= n;
          const int sx = fx ? m - 1 - x : x;
          const double v = noise[static_cast<std::size_t>(sy) * n + sx];
          torus[static_cast<std::size_t>(y) * m + x] = (fx != fy) ? -v : v;
        }
      }
    } else {
      for (std::size_t i = 0; i < fft.real_size(); ++i) torus[i] = rng.normal();
    }

    fft.forward(torus, spec);
    for (std::size_t i = 0; i < fft.spectrum_size(); ++i) spec[i] *= oct.filter[i];
    fft.inverse(spec, torus);

    ScalarGrid layer(n);
    for (int iy = 0; iy < n; ++iy) {
      std::memcpy(&layer.values()[static_cast<std::size_t>(iy) * n], &torus[static_cast<std::size_t>(iy) * m],
                  sizeof(double) * n);
    }
    layers.push_back(std::move(layer));
  }
  return FieldStack(params, std::move(plan), std::move(layers));
}

ScaleValue field_at_scale(const FieldStack& stack, int m, GridIndex v) {
  if (m < 0 || m > stack.octaves())
    throw DomainError("field_at_scale: octave count " + std::to_string(m) + " outside [0, " +
                      std::to_string(stack.octaves()) + "]");
  const int n = stack.grid_size();
  if (v.ix < 0 || v.iy < 0 || v.ix >= n || v.iy >= n) throw DomainError("field_at_scale: grid point outside grid");
  ScaleValue out;
  for (int j = 0; j < m; ++j) {
    out.value += stack.layer(j)(v);
    out.variance += stack.variance_profile(j)(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covariance oracle
// ---------------------------------------------------------------------------

namespace {

constexpr double kOracleTol = 1e-8;

template <typename F>
double integrate(F f, double a, double b, double tol, const char* what) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 30, tol, &err);
  const double scale = std::max(std::fabs(value), 1e-300);
  if (!(err <= std::max(tol * scale, 1e-14))) {
    throw NumericError(std::string("quadrature did not converge: ") + what, err / scale);
  }
  return value;
}

// Solutions of s^(1/2)|log s|/4 = level on (0,1): the left side rises to its
// maximum at s = e^-2 and falls back to 0 at s = 1.
std::vector<double> truncation_breakpoints(double level) {
  auto g = [](double s) { return 0.25 * std::sqrt(s) * -std::log(s); };
  std::vector<double> out;
  const double peak = std::exp(-2.0);
  if (level <= 0.0 || level >= g(peak)) return out;
  auto bisect = [&](double lo, double hi, bool rising) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((g(mid) < level) == rising) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  out.push_back(bisect(1e-300, peak, true));
  out.push_back(bisect(peak, 1.0, false));
  return out;
}

double eta_covariance(Point u, Point v, double t_lo, double t_hi) {
  const double d = distance(u, v);
  auto integrand_s = [d](double s) {
    const double radius = eta_truncation_radius(s);
    if (2.0 * radius <= d) return 0.0;
    auto lens = [d, radius, s](double theta) {
      const double c = std::cos(theta);
      const double sn = std::sin(theta);
      const double disc = radius * radius - 0.25 * d * d * sn * sn;
      if (disc <= 0.0) return 0.0;
      const double rho = std::sqrt(disc) - 0.5 * d * std::fabs(c);
      if (rho <= 0.0) return 0.0;
      return -std::expm1(-2.0 * rho * rho / s);
    };
    double angular;
    if (d == 0.0) {
      angular = 0.5 * pi * lens(0.0);
    } else {
      // fixed panels: an adaptive inner rule makes the outer integrand jumpy
      constexpr int panels = 16;
      angular = 0.0;
      for (int k = 0; k < panels; ++k)
        angular += boost::math::quadrature::gauss<double, 30>::integrate(lens, 0.5 * pi * k / panels,
                                                                         0.5 * pi * (k + 1) / panels);
    }
    return std::exp(-d * d / (2.0 * s)) / (pi * s) * angular;
  };
  std::vector<double> cuts{t_lo, t_hi};
  for (double level : {0.1, 0.5 * d}) {
    for (double b : truncation_breakpoints(level)) {
      if (b > t_lo && b < t_hi) cuts.push_back(b);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    // log-time substitution s = e^tau
    total += integrate([&](double tau) { const double s = std::exp(tau); return integrand_s(s) * s; },
                       std::log(cuts[i]), std::log(cuts[i + 1]), kOracleTol, "eta covariance");
  }
  return total;
}

}  // namespace

double covariance_oracle(Engine engine, Point u, Point v, double delta, double delta_tilde) {
  if (!(delta > 0.0) || !(delta < delta_tilde) || delta_tilde > 1.0)
    throw DomainError("covariance_oracle: need 0 < delta < delta_tilde <= 1");
  const double t_lo = delta * delta;
  const double t_hi = delta_tilde * delta_tilde;
  switch (engine) {
    case Engine::hat_h: {
      const double d2 = (u.x - v.x) * (u.x - v.x) + (u.y - v.y) * (u.y - v.y);
      auto f = [d2](double tau) { return 0.5 * std::exp(-d2 / (2.0 * std::exp(tau))); };
      return integrate(f, std::log(t_lo), std::log(t_hi), kOracleTol, "whole-plane covariance");
    }
    case Engine::tilde_h: {
      if (!in_unit_square(u) || !in_unit_square(v)) throw DomainError("covariance_oracle: point outside [0,1]^2");
      auto f = [u, v](double tau) {
        const double t = std::exp(tau);
        return pi * t * dirichlet_kernel(t, u.x, v.x) * dirichlet_kernel(t, u.y, v.y);
      };
      // The kernel switches representation at t = 0.05; split there.
      const double cut = std::clamp(0.05, t_lo, t_hi);
      return integrate(f, std::log(t_lo), std::log(cut), kOracleTol, "killed covariance") +
             integrate(f, std::log(cut), std::log(t_hi), kOracleTol, "killed covariance");
    }
    case Engine::eta:
      return eta_covariance(u, v, t_lo, t_hi);
  }
  throw DomainError("covariance_oracle: unknown engine");
}

// ---------------------------------------------------------------------------
// LQGF1 I/O
// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "LQGF1 I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DomainError("LQGF1: truncated stream");
  return v;
}

constexpr char kMagic[5] = {'L', 'Q', 'G', 'F', '1'};

}  // namespace

void write_stack(const FieldStack& stack, std::ostream& out) {
  const auto& p = stack.params();
  out.write(kMagic, 5);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(p.engine));
  put<std::uint16_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.grid_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.octaves));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.slices_per_octave));
  put<std::uint64_t>(out, p.seed);
  for (int j = 0; j < p.octaves; ++j) {
    const auto& v = stack.layer(j).values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("LQGF1: write failed");
}

FieldStack read_stack(std::istream& in) {
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0) throw DomainError("LQGF1: bad magic");
  StackParams p;
  const auto tag = get<std::uint8_t>(in);
  if (tag > 2) throw DomainError("LQGF1: unknown engine tag");
  p.engine = static_cast<Engine>(tag);
  get<std::uint16_t>(in);
  p.grid_size = static_cast<int>(get<std::uint32_t>(in));
  p.octaves = static_cast<int>(get<std::uint32_t>(in));
  p.slices_per_octave = static_cast<int>(get<std::uint32_t>(in));
  p.seed = get<std::uint64_t>(in);
  validate(p);
  std::vector<ScalarGrid> layers;
  for (int j = 0; j < p.octaves; ++j) {
    ScalarGrid g(p.grid_size);
    in.read(reinterpret_cast<char*>(g.values().data()),
            static_cast<std::streamsize>(g.values().size() * sizeof(double)));
    if (!in) throw DomainError("LQGF1: truncated layer data");
    layers.push_back(std::move(g));
  }
  return FieldStack(p, plan_for(p), std::move(layers));
}

}  // namespace lqg
