#pragma once

// Heat kernels and the multiscale white-noise field engines.
//
// A field is synthesized octave by octave: octave j integrates space-time
// white noise against sqrt(pi) * p(s/2; v, w) over diffusion times
// s in (4^-(j+1), 4^-j). Summing octaves 0..m-1 gives the field at scale 2^-m.
//
//   tilde_h  kernel of Brownian motion killed on leaving the unit square
//   eta      as tilde_h, with the kernel cut off outside a ball around v
//            whose radius shrinks with s (finite-range dependence per octave)
//   hat_h    whole-plane kernel (stationary; variance log 2 per octave)

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lqg/common.hpp"

namespace lqg {

enum class Engine : std::uint8_t { tilde_h = 0, eta = 1, hat_h = 2 };

std::string_view to_string(Engine e);
Engine engine_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Heat kernels (generator 1/2 Laplacian)
// ---------------------------------------------------------------------------

struct KernelSpec {
  enum class Domain { whole_plane, unit_square_killed, ball_truncated };
  Domain domain = Domain::whole_plane;
  double time = 1.0;    ///< diffusion time t > 0 (length^2)
  double radius = 0.0;  ///< truncation radius, ball_truncated only

  static KernelSpec whole_plane(double t) { return {Domain::whole_plane, t, 0.0}; }
  static KernelSpec unit_square(double t) { return {Domain::unit_square_killed, t, 0.0}; }
  static KernelSpec ball(double t, double r) { return {Domain::ball_truncated, t, r}; }
};

/// Transition density p(t; u, v).
///
/// unit_square_killed is the product of two 1-D Dirichlet kernels on [0,1];
/// for t >= 0.05 the sine series is used, below that the image series.
/// ball_truncated is the whole-plane kernel times the survival probability of
/// the Brownian bridge in B_radius(u), using a single reflection in the
/// tangent line nearest to v.
double kernel_eval(const KernelSpec& spec, Point u, Point v);

/// 1-D Dirichlet heat kernel on [0,1] by its sine series.
double dirichlet_kernel_spectral(double t, double x, double y);
/// 1-D Dirichlet heat kernel on [0,1] by the method of images.
double dirichlet_kernel_images(double t, double x, double y);

/// Truncation radius of the eta kernel at diffusion time s:
/// min(s^(1/2) |log s| / 4, 1/10).
double eta_truncation_radius(double s);

// ---------------------------------------------------------------------------
// Field stacks
// ---------------------------------------------------------------------------

struct StackParams {
  Engine engine = Engine::hat_h;
  int grid_size = 256;  ///< N, a power of two
  int octaves = 6;      ///< J <= log2(N) - 1
  std::uint64_t seed = 0;
  int slices_per_octave = 4;

  friend bool operator==(const StackParams&, const StackParams&) = default;
};

/// Diffusion-time slices of octave j: geometric endpoints and the
/// log-mean evaluation time used for each slice.
struct TimeSlice {
  double begin;
  double end;
  double eval;  ///< (end - begin) / log(end / begin)
};
std::vector<TimeSlice> octave_slices(int octave, int slices);

class SynthesisPlan;

/// Per-octave field layers on the N x N cell-center grid, together with the
/// exact variance of each layer under the discrete model that produced it.
class FieldStack {
 public:
  FieldStack(StackParams params, std::shared_ptr<const SynthesisPlan> plan,
             std::vector<ScalarGrid> layers);

  const StackParams& params() const noexcept { return params_; }
  Engine engine() const noexcept { return params_.engine; }
  int grid_size() const noexcept { return params_.grid_size; }
  int octaves() const noexcept { return params_.octaves; }
  std::uint64_t seed() const noexcept { return params_.seed; }
  double mesh() const noexcept { return 1.0 / params_.grid_size; }

  const ScalarGrid& layer(int j) const { return layers_.at(j); }
  const ScalarGrid& variance_profile(int j) const;

  /// Sum of layers 0..J-1 and its variance, computed once on first use.
  const ScalarGrid& full_field() const;
  const ScalarGrid& full_variance() const;
  std::shared_ptr<const ScalarGrid> shared_full_field() const;
  std::shared_ptr<const ScalarGrid> shared_full_variance() const;

 private:
  StackParams params_;
  std::shared_ptr<const SynthesisPlan> plan_;
  std::vector<ScalarGrid> layers_;
  mutable std::shared_ptr<const ScalarGrid> full_field_;
  mutable std::shared_ptr<const ScalarGrid> full_variance_;
};

/// Bytes needed to synthesize a stack (plan + layers + transform workspace).
std::size_t estimate_stack_bytes(const StackParams& params);

/// Memory budget in bytes: LQG_MEMORY_LIMIT_MB, default 4096 MB.
std::size_t memory_budget_bytes();

/// Draws a FieldStack. Deterministic in `params`; octave j uses its own
/// random stream derived from (seed, j). Throws ResourceError when the
/// memory estimate exceeds the budget and DomainError on bad parameters.
FieldStack sample_stack(const StackParams& params);

struct ScaleValue {
  double value = 0.0;
  double variance = 0.0;
};

/// Field at scale 2^-m: sum of octaves 0..m-1 and its exact model variance.
/// m = 0 yields (0, 0).
ScaleValue field_at_scale(const FieldStack& stack, int m, GridIndex v);

/// pi * integral over t in (delta^2, delta_tilde^2) of the engine's kernel
/// p(t; u, v), by adaptive Gauss-Kronrod quadrature (relative tolerance 1e-8).
/// For eta the ball-masked model kernel is used and u, v are assumed to lie at
/// least 1/10 away from the boundary.
double covariance_oracle(Engine engine, Point u, Point v, double delta, double delta_tilde);

// ---------------------------------------------------------------------------
// LQGF1 binary dump
// ---------------------------------------------------------------------------

/// Header: "LQGF1", engine (u8), 2 zero bytes, N (u32), J (u32),
/// slices (u32), seed (u64); then J row-major N x N float64 layers.
/// All integers and floats little-endian.
void write_stack(const FieldStack& stack, std::ostream& out);
FieldStack read_stack(std::istream& in);

}  // namespace lqg
