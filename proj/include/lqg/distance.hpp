#pragma once

// Ball-covering Liouville graph distance on the mesh.
//
// Ball centers are mesh-cell centers. Every center z carries the largest
// admissible radius r(z) for its variant; D(u, v) is the least number of such
// balls forming a chain from a ball containing u to a ball containing v in
// which consecutive closed balls intersect.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lqg/common.hpp"
#include "lqg/gmc.hpp"

namespace lqg {

enum class BallVariant { standard, doubled, circle_avg };

std::string_view to_string(BallVariant v);
BallVariant variant_from_string(std::string_view name);

/// Radii are stored squared in units of (h/2)^2 so that halved radii of the
/// doubled variant stay integral. q = 0 means no admissible ball.
///
///   standard    largest r on the lattice {sqrt(a^2 + b^2) h} with M(B_r(z)) <= delta^2
///   doubled     largest r with 2r on that lattice and M(B_2r(z)) <= delta^2
///   circle_avg  integer multiples r = k h, k = 1, 2, ..., up to the first
///               k whose weight r^(2 + gamma^2/2) exp(gamma hbar_r(z)) exceeds
///               delta^2; hbar_r is the mean of the full field over 64 points
///               of the circle, each read at its nearest mesh cell
struct RadiusField {
  BallVariant variant = BallVariant::standard;
  double delta = 0.0;
  int n = 0;
  std::vector<std::int32_t> q;

  std::int32_t q_at(GridIndex g) const { return q[static_cast<std::size_t>(g.iy) * n + g.ix]; }
  /// Radius in length units.
  double radius(GridIndex g) const { return 0.5 * std::sqrt(static_cast<double>(q_at(g))) / n; }
};

RadiusField radius_field(const MassGrid& mass, double delta, BallVariant variant, int threads = 1);

/// Closed ball of z contains p.
bool ball_contains(const RadiusField& rf, GridIndex z, Point p);
/// Closed balls of a and b intersect (exact integer test).
bool balls_overlap(const RadiusField& rf, GridIndex a, GridIndex b);

struct BallHopResult {
  bool connected = false;     ///< false: no admissible chain at this delta
  int distance = 0;           ///< number of balls in a shortest chain
  std::vector<GridIndex> witness;  ///< centers of one shortest chain, from u's side
  std::size_t expanded_nodes = 0;  ///< centers settled by the search
};

/// D(u, v). When no admissible ball contains u, or the chain cannot reach v,
/// the result has connected = false.
BallHopResult ball_hop_distance(const RadiusField& rf, Point u, Point v);

/// Least number of balls in a chain from a ball containing u to a ball that
/// meets the boundary of the axis-parallel square centered at u with side
/// `side`.
BallHopResult point_to_boundary_distance(const RadiusField& rf, Point u, double side);

/// Checks the chain: first ball contains u, consecutive balls intersect, last
/// ball contains v, all radii positive. Empty when valid.
std::vector<std::string> witness_violations(const RadiusField& rf, const BallHopResult& res, Point u, Point v);

struct VariantDistances {
  BallHopResult standard;
  BallHopResult doubled;
  BallHopResult circle_avg;
};

VariantDistances variant_compare(const MassGrid& mass, double delta, Point u, Point v, int threads = 1);

struct DistanceRecord {
  double gamma = 0.0;
  double delta = 0.0;
  BallVariant variant = BallVariant::standard;
  int n = 0;
  std::uint64_t seed = 0;
  Point u;
  Point v;
  std::optional<int> distance;  ///< empty when disconnected
  std::size_t expanded_nodes = 0;
  std::optional<double> wall_ms;  ///< left empty for reproducible output
};

/// Columns: gamma,delta,variant,N,seed,u,v,distance,expanded_nodes,wall_ms.
/// Points are written as "x y"; missing values as empty fields.
void write_distance_csv(std::ostream& out, const std::vector<DistanceRecord>& rows);

}  // namespace lqg
