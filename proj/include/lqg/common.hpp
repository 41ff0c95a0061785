#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lqg {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Precondition on an argument violated (point outside domain, bad scale, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// The memory estimate for a request exceeds the configured budget.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::size_t required)
      : std::runtime_error(what), required_(required) {}
  std::size_t required_bytes() const noexcept { return required_; }

 private:
  std::size_t required_;
};

/// Too few usable data points for a fit.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant was broken; indicates a bug, not bad input.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An experiment could not produce a valid result (e.g. too many dropped replicas).
class ExperimentFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Geometry and grids
// ---------------------------------------------------------------------------

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(Point, Point) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Index of a mesh cell / grid point. Grid point (ix, iy) sits at the cell
/// center ((ix + 1/2) h, (iy + 1/2) h) with h = 1/N.
struct GridIndex {
  int ix = 0;
  int iy = 0;
  friend bool operator==(GridIndex, GridIndex) = default;
};

inline bool is_power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }
int log2_exact(long long n);

/// Row-major N x N array of reals.
class ScalarGrid {
 public:
  ScalarGrid() = default;
  explicit ScalarGrid(int n, double fill = 0.0)
      : n_(n), values_(static_cast<std::size_t>(n) * n, fill) {}

  int size() const noexcept { return n_; }
  double mesh() const noexcept { return 1.0 / n_; }

  double& operator()(int ix, int iy) { return values_[index(ix, iy)]; }
  double operator()(int ix, int iy) const { return values_[index(ix, iy)]; }
  double operator()(GridIndex g) const { return values_[index(g.ix, g.iy)]; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  std::size_t index(int ix, int iy) const noexcept {
    return static_cast<std::size_t>(iy) * n_ + ix;
  }
  Point position(int ix, int iy) const noexcept {
    return {(ix + 0.5) / n_, (iy + 0.5) / n_};
  }
  /// Cell containing p; points on the upper/right edge of [0,1]^2 map to the last cell.
  GridIndex cell_of(Point p) const noexcept;

 private:
  int n_ = 0;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Counter-based random numbers
// ---------------------------------------------------------------------------

/// Stream roles used when deriving keys from (master seed, replica index, role).
enum class StreamRole : std::uint32_t {
  field = 1,
  noise = 2,
  path = 3,
  triples = 4,
  misc = 5,
};

/// Mixes (seed, index, role) into a 64-bit stream key.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, StreamRole role);

/// Philox4x32-10 counter-based generator. A stream is fully determined by
/// its 64-bit key; draws are produced by encrypting an incrementing counter,
/// so independent streams never share state.
class Philox {
 public:
  explicit Philox(std::uint64_t key) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  /// Uniform in (0, 1], 53-bit resolution.
  double uniform_pos() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller; both outputs of each pair are used.
  double normal() noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Parallel execution
// ---------------------------------------------------------------------------

/// Thread count from LQG_THREADS, else hardware concurrency (at least 1).
int default_threads();

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Work is handed
/// out through a shared counter; results must be written to per-index slots
/// so that the outcome does not depend on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Exact summation
// ---------------------------------------------------------------------------

/// Exact accumulator for sums of finite doubles. Addition is associative and
/// commutative, so any partition of a set of terms yields the same total;
/// value() rounds the exact sum to nearest.
class ExactSum {
 public:
  ExactSum();
  void add(double x);
  ExactSum& operator+=(const ExactSum& other);
  double value() const;

 private:
  void normalize();
  // 32-bit digits stored in int64 limbs; limb k has weight 2^(32k - kBias).
  static constexpr int kLimbs = 72;
  static constexpr int kBias = 1152;
  std::array<std::int64_t, kLimbs> limbs_{};
  int pending_ = 0;
};

}  // namespace lqg
