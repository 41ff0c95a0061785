#include "lqg/distance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>

#include "lqg/csv.hpp"

namespace lqg {

std::string_view to_string(BallVariant v) {
  switch (v) {
    case BallVariant::standard: return "standard";
    case BallVariant::doubled: return "doubled";
    case BallVariant::circle_avg: return "circle_avg";
  }
  return "unknown";
}

BallVariant variant_from_string(std::string_view name) {
  if (name == "standard") return BallVariant::standard;
  if (name == "doubled") return BallVariant::doubled;
  if (name == "circle_avg") return BallVariant::circle_avg;
  throw DomainError("unknown ball variant '" + std::string(name) + "' (expected standard, doubled or circle_avg)");
}

namespace {

std::int64_t isqrt(std::int64_t v) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

// Sorted integers a^2 + b^2 <= limit (the squared radii at which a lattice
// ball gains new cell centers).
std::shared_ptr<const std::vector<std::int32_t>> two_square_lattice(std::int32_t limit) {
  static std::mutex mutex;
  static std::map<std::int32_t, std::shared_ptr<const std::vector<std::int32_t>>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(limit); it != cache.end()) return it->second;
  std::vector<char> hit(static_cast<std::size_t>(limit) + 1, 0);
  for (std::int64_t a = 0; a * a <= limit; ++a)
    for (std::int64_t b = a; a * a + b * b <= limit; ++b) hit[a * a + b * b] = 1;
  auto out = std::make_shared<std::vector<std::int32_t>>();
  for (std::int32_t s = 0; s <= limit; ++s)
    if (hit[s]) out->push_back(s);
  cache.emplace(limit, out);
  return out;
}

// Largest k in [0, count) with pred(k), for pred true on a prefix and
// pred(0) true by convention. Gallops outward from `guess`.
template <typename Pred>
std::size_t last_true(std::size_t count, std::size_t guess, Pred pred) {
  guess = std::clamp<std::size_t>(guess, 1, count - 1);
  std::size_t lo, hi;  // pred(lo) true, pred(hi) false (hi == count means unknown/past end)
  if (pred(guess)) {
    lo = guess;
    std::size_t step = 1;
    for (;;) {
      if (lo + step >= count) { hi = count; break; }
      if (!pred(lo + step)) { hi = lo + step; break; }
      lo += step;
      step *= 2;
    }
  } else {
    hi = guess;
    std::size_t step = 1;
    for (;;) {
      if (hi <= step) { lo = 0; break; }
      if (pred(hi - step)) { lo = hi - step; break; }
      hi -= step;
      step *= 2;
    }
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (pred(mid)) lo = mid; else hi = mid;
  }
  return lo;
}

struct RowPrefix {
  int n;
  std::vector<double> sums;  // n rows of n + 1 entries

  explicit RowPrefix(const ScalarGrid& g) : n(g.size()), sums(static_cast<std::size_t>(n) * (n + 1), 0.0) {
    for (int y = 0; y < n; ++y) {
      double* row = &sums[static_cast<std::size_t>(y) * (n + 1)];
      for (int x = 0; x < n; ++x) row[x + 1] = row[x] + g(x, y);
    }
  }
  double range(int y, int x0, int x1) const {  // inclusive
    const double* row = &sums[static_cast<std::size_t>(y) * (n + 1)];
    return row[x1 + 1] - row[x0];
  }
};

// Mass of the cell centers within squared distance s (h units) of (zx, zy).
// Rows are summed in increasing y, so the result is monotone in s in floating
// point as well: enlarging s only widens row ranges and adds rows.
double ball_mass(const RowPrefix& pre, int zx, int zy, std::int64_t s) {
  const int n = pre.n;
  const auto w = static_cast<int>(isqrt(s));
  double total = 0.0;
  const int y0 = std::max(0, zy - w);
  const int y1 = std::min(n - 1, zy + w);
  for (int y = y0; y <= y1; ++y) {
    const std::int64_t dy = y - zy;
    const auto wx = static_cast<int>(isqrt(s - dy * dy));
    const int x0 = std::max(0, zx - wx);
    const int x1 = std::min(n - 1, zx + wx);
    total += pre.range(y, x0, x1);
  }
  return total;
}

void lattice_radius_field(const MassGrid& mass, RadiusField& rf, int threads) {
  const int n = mass.n;
  const auto lattice = two_square_lattice(2 * n * n);
  const auto& lat = *lattice;
  const RowPrefix pre(mass.cell_mass);
  const double threshold = rf.delta * rf.delta;
  const bool doubled = rf.variant == BallVariant::doubled;
  // Initial guess from the Lebesgue disk area.
  const double s0 = threshold * n * n / std::numbers::pi;
  const auto guess0 = static_cast<std::size_t>(
      std::lower_bound(lat.begin(), lat.end(), static_cast<std::int32_t>(std::min<double>(s0, lat.back()))) -
      lat.begin());
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::size_t guess = guess0;
    for (int x = 0; x < n; ++x) {
      const std::size_t k = last_true(lat.size(), guess, [&](std::size_t i) {
        return ball_mass(pre, x, y, lat[i]) <= threshold;
      });
      guess = std::max<std::size_t>(k, 1);
      const std::int64_t s = lat[k];
      rf.q[static_cast<std::size_t>(y) * n + x] = static_cast<std::int32_t>(doubled ? s : 4 * s);
    }
  });
}

void circle_radius_field(const MassGrid& mass, RadiusField& rf, int threads) {
  constexpr int kPoints = 64;
  const int n = mass.n;
  const double gamma = mass.gamma;
  const double threshold = rf.delta * rf.delta;
  const ScalarGrid* field = mass.field.get();
  if (gamma != 0.0 && field == nullptr) throw DomainError("circle_avg radii need the field");
  std::array<double, kPoints> cs{}, sn{};
  for (int k = 0; k < kPoints; ++k) {
    cs[k] = std::cos(2.0 * std::numbers::pi * k / kPoints);
    sn[k] = std::sin(2.0 * std::numbers::pi * k / kPoints);
  }
  // Centers are integers in mesh units, so the ring offsets do not depend on
  // the center and a whole row advances one radius at a time.
  const int max_steps = 2 * n;
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> avg(static_cast<std::size_t>(n));
    std::vector<int> admissible(static_cast<std::size_t>(n), 0);
    std::vector<char> alive(static_cast<std::size_t>(n), 1);
    int remaining = n;
    for (int k = 1; k <= max_steps && remaining > 0; ++k) {
      const double r = static_cast<double>(k) / n;
      const double base = std::pow(r, 2.0 + 0.5 * gamma * gamma);
      if (gamma != 0.0) {
        std::fill(avg.begin(), avg.end(), 0.0);
        for (int p = 0; p < kPoints; ++p) {
          const int dx = static_cast<int>(std::lround(k * cs[p]));
          const int iy = std::clamp(y + static_cast<int>(std::lround(k * sn[p])), 0, n - 1);
          const double* src = field->values().data() + field->index(0, iy);
          const int lo = std::clamp(-dx, 0, n);
          const int hi = std::clamp(n - dx, lo, n);
          for (int x = 0; x < lo; ++x) avg[x] += src[0];
          for (int x = lo; x < hi; ++x) avg[x] += src[x + dx];
          for (int x = hi; x < n; ++x) avg[x] += src[n - 1];
        }
      }
      for (int x = 0; x < n; ++x) {
        if (!alive[x]) continue;
        const double weight = gamma != 0.0 ? base * std::exp(gamma * (avg[x] / kPoints)) : base;
        if (weight > threshold) {
          alive[x] = 0;
          --remaining;
        } else {
          admissible[x] = k;
        }
      }
    }
    for (int x = 0; x < n; ++x)
      rf.q[static_cast<std::size_t>(y) * n + x] = 4 * admissible[x] * admissible[x];
  });
}

// Coordinates in mesh units with cell centers at integers.
struct MeshPoint {
  double x;
  double y;
};

MeshPoint to_mesh(Point p, int n) { return {p.x * n - 0.5, p.y * n - 0.5}; }

bool contains_q(std::int32_t q, int zx, int zy, MeshPoint p) {
  const double dx = zx - p.x;
  const double dy = zy - p.y;
  return 4.0 * (dx * dx + dy * dy) <= static_cast<double>(q);
}

bool overlap_q(std::int32_t qa, int ax, int ay, std::int32_t qb, int bx, int by) {
  // |a - b| <= (sqrt(qa) + sqrt(qb)) / 2  <=>  4 d^2 - qa - qb <= 2 sqrt(qa qb)
  const std::int64_t dx = ax - bx;
  const std::int64_t dy = ay - by;
  const std::int64_t excess = 4 * (dx * dx + dy * dy) - qa - qb;
  if (excess <= 0) return true;
  return excess * excess <= 4 * static_cast<std::int64_t>(qa) * qb;
}

}  // namespace

RadiusField radius_field(const MassGrid& mass, double delta, BallVariant variant, int threads) {
  if (!(delta > 0.0) || delta > 1.0) throw DomainError("delta must lie in (0, 1]");
  RadiusField rf;
  rf.variant = variant;
  rf.delta = delta;
  rf.n = mass.n;
  rf.q.assign(static_cast<std::size_t>(mass.n) * mass.n, 0);
  if (variant == BallVariant::circle_avg) {
    circle_radius_field(mass, rf, threads);
  } else {
    lattice_radius_field(mass, rf, threads);
  }
  return rf;
}

bool ball_contains(const RadiusField& rf, GridIndex z, Point p) {
  return contains_q(rf.q_at(z), z.ix, z.iy, to_mesh(p, rf.n));
}

bool balls_overlap(const RadiusField& rf, GridIndex a, GridIndex b) {
  return overlap_q(rf.q_at(a), a.ix, a.iy, rf.q_at(b), b.ix, b.iy);
}

namespace {

// Breadth-first search over ball centers. Unsettled centers are kept in
// per-row skip lists; tiles and blocks carry the largest radius they contain
// so that a ball only scans the part of the grid its neighbors can come from.
class BallSearch {
 public:
  explicit BallSearch(const RadiusField& rf)
      : rf_(rf), n_(rf.n), tile_(std::min(16, rf.n)), tiles_(n_ / tile_), block_tiles_(std::min(8, tiles_)),
        blocks_((tiles_ + block_tiles_ - 1) / block_tiles_) {
    next_.resize(static_cast<std::size_t>(n_) * (n_ + 1));
    parent_.assign(static_cast<std::size_t>(n_) * n_, -1);
    tile_max_.assign(static_cast<std::size_t>(tiles_) * tiles_, 0);
    tile_left_.assign(tile_max_.size(), 0);
    block_max_.assign(static_cast<std::size_t>(blocks_) * blocks_, 0);
    block_left_.assign(block_max_.size(), 0);
    for (int y = 0; y < n_; ++y) {
      for (int x = 0; x <= n_; ++x) next_[row_base(y) + x] = x;
      for (int x = 0; x < n_; ++x) {
        const std::int32_t q = rf.q[static_cast<std::size_t>(y) * n_ + x];
        if (q == 0) {
          next_[row_base(y) + x] = x + 1;  // no admissible ball here
          continue;
        }
        const std::size_t t = tile_of(x, y);
        tile_max_[t] = std::max(tile_max_[t], q);
        ++tile_left_[t];
        const std::size_t b = block_of(x / tile_, y / tile_);
        block_max_[b] = std::max(block_max_[b], q);
        ++block_left_[b];
        global_max_ = std::max(global_max_, q);
      }
    }
  }

  template <typename Target>
  BallHopResult run(Point source, Target target) {
    BallHopResult res;
    const MeshPoint u = to_mesh(source, n_);
    std::vector<int> layer;
    int found = -1;
    auto add = [&](int x, int y, int parent) {
      const int id = y * n_ + x;
      parent_[id] = parent;
      layer_next_.push_back(id);
      ++res.expanded_nodes;
      if (found < 0 && target(x, y, rf_.q[id])) found = id;
    };
    layer_next_.clear();
    scan(u.x, u.y, 0.0, [&](int x, int y, std::int32_t q) { return contains_q(q, x, y, u); },
         [&](int x, int y) { add(x, y, -1); });
    while (found < 0 && !layer_next_.empty()) {
      layer.swap(layer_next_);
      layer_next_.clear();
      for (int id : layer) {
        const int zx = id % n_;
        const int zy = id / n_;
        const std::int32_t qz = rf_.q[id];
        scan(zx, zy, 0.5 * std::sqrt(static_cast<double>(qz)),
             [&](int x, int y, std::int32_t q) { return overlap_q(qz, zx, zy, q, x, y); },
             [&](int x, int y) { add(x, y, id); });
        if (found >= 0) break;
      }
    }
    if (found < 0) return res;
    res.connected = true;
    for (int id = found; id >= 0; id = parent_[id]) res.witness.push_back({id % n_, id / n_});
    std::reverse(res.witness.begin(), res.witness.end());
    res.distance = static_cast<int>(res.witness.size());
    return res;
  }

 private:
  std::size_t row_base(int y) const { return static_cast<std::size_t>(y) * (n_ + 1); }
  std::size_t tile_of(int x, int y) const { return static_cast<std::size_t>(y / tile_) * tiles_ + x / tile_; }
  std::size_t block_of(int tx, int ty) const {
    return static_cast<std::size_t>(ty / block_tiles_) * blocks_ + tx / block_tiles_;
  }

  int find(int y, int x) {
    int* row = &next_[row_base(y)];
    while (row[x] != x) {
      row[x] = row[row[x]];
      x = row[x];
    }
    return x;
  }

  void settle(int x, int y) {
    next_[row_base(y) + x] = x + 1;
    --tile_left_[tile_of(x, y)];
    --block_left_[block_of(x / tile_, y / tile_)];
  }

  static double rect_dist2(double cx, double cy, int x0, int x1, int y0, int y1) {
    const double dx = cx < x0 ? x0 - cx : (cx > x1 ? cx - x1 : 0.0);
    const double dy = cy < y0 ? y0 - cy : (cy > y1 ? cy - y1 : 0.0);
    return dx * dx + dy * dy;
  }

  // Visits every unsettled center within rz + r(center) of (cx, cy) that
  // satisfies pred; accepted centers are settled and handed to on_add.
  template <typename Pred, typename OnAdd>
  void scan(double cx, double cy, double rz, Pred pred, OnAdd on_add) {
    constexpr double kSlack = 1e-6;
    const double reach_all = rz + 0.5 * std::sqrt(static_cast<double>(global_max_)) + kSlack;
    const int span = tile_ * block_tiles_;
    const int bx0 = std::max(0, static_cast<int>(std::floor((cx - reach_all) / span)));
    const int bx1 = std::min(blocks_ - 1, static_cast<int>(std::floor((cx + reach_all) / span)));
    const int by0 = std::max(0, static_cast<int>(std::floor((cy - reach_all) / span)));
    const int by1 = std::min(blocks_ - 1, static_cast<int>(std::floor((cy + reach_all) / span)));
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        const std::size_t b = static_cast<std::size_t>(by) * blocks_ + bx;
        if (block_left_[b] == 0) continue;
        const double breach = rz + 0.5 * std::sqrt(static_cast<double>(block_max_[b])) + kSlack;
        const int tx_lo = bx * block_tiles_;
        const int ty_lo = by * block_tiles_;
        const int tx_hi = std::min(tiles_, tx_lo + block_tiles_) - 1;
        const int ty_hi = std::min(tiles_, ty_lo + block_tiles_) - 1;
        if (rect_dist2(cx, cy, tx_lo * tile_, (tx_hi + 1) * tile_ - 1, ty_lo * tile_, (ty_hi + 1) * tile_ - 1) >
            breach * breach)
          continue;
        for (int ty = ty_lo; ty <= ty_hi; ++ty) {
          for (int tx = tx_lo; tx <= tx_hi; ++tx) {
            const std::size_t t = static_cast<std::size_t>(ty) * tiles_ + tx;
            if (tile_left_[t] == 0) continue;
            const double reach = rz + 0.5 * std::sqrt(static_cast<double>(tile_max_[t])) + kSlack;
            const int x0 = tx * tile_, x1 = x0 + tile_ - 1, y0 = ty * tile_, y1 = y0 + tile_ - 1;
            if (rect_dist2(cx, cy, x0, x1, y0, y1) > reach * reach) continue;
            for (int y = y0; y <= y1; ++y) {
              const double dy = y - cy;
              const double rest = reach * reach - dy * dy;
              if (rest < 0.0) continue;
              const double w = std::sqrt(rest);
              const int xa = std::max(x0, static_cast<int>(std::ceil(cx - w)));
              const int xb = std::min(x1, static_cast<int>(std::floor(cx + w)));
              if (xa > xb) continue;
              for (int x = find(y, xa); x <= xb; x = find(y, x + 1)) {
                const std::int32_t q = rf_.q[static_cast<std::size_t>(y) * n_ + x];
                if (pred(x, y, q)) {
                  settle(x, y);
                  on_add(x, y);
                }
              }
            }
          }
        }
      }
    }
  }

  const RadiusField& rf_;
  int n_;
  int tile_;
  int tiles_;
  int block_tiles_;
  int blocks_;
  std::int32_t global_max_ = 0;
  std::vector<int> next_;
  std::vector<int> parent_;
  std::vector<std::int32_t> tile_max_;
  std::vector<int> tile_left_;
  std::vector<std::int32_t> block_max_;
  std::vector<int> block_left_;
  std::vector<int> layer_next_;
};

void check_point(Point p, const char* what) {
  if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
    throw DomainError(std::string(what) + " outside [0,1]^2");
}

}  // namespace

BallHopResult ball_hop_distance(const RadiusField& rf, Point u, Point v) {
  check_point(u, "u");
  check_point(v, "v");
  const MeshPoint mv = to_mesh(v, rf.n);
  BallSearch search(rf);
  return search.run(u, [mv](int x, int y, std::int32_t q) { return contains_q(q, x, y, mv); });
}

BallHopResult point_to_boundary_distance(const RadiusField& rf, Point u, double side) {
  check_point(u, "u");
  if (!(side > 0.0)) throw DomainError("box side must be positive");
  const MeshPoint mu = to_mesh(u, rf.n);
  const double a = 0.5 * side * rf.n;
  BallSearch search(rf);
  return search.run(u, [mu, a](int x, int y, std::int32_t q) {
    const double dx = std::fabs(x - mu.x);
    const double dy = std::fabs(y - mu.y);
    double d2;
    if (dx <= a && dy <= a) {
      const double d = std::min(a - dx, a - dy);
      d2 = d * d;
    } else {
      const double ex = std::max(dx - a, 0.0);
      const double ey = std::max(dy - a, 0.0);
      d2 = ex * ex + ey * ey;
    }
    return 4.0 * d2 <= static_cast<double>(q);
  });
}

std::vector<std::string> witness_violations(const RadiusField& rf, const BallHopResult& res, Point u, Point v) {
  std::vector<std::string> out;
  if (!res.connected) return out;
  if (static_cast<int>(res.witness.size()) != res.distance) out.push_back("witness length differs from distance");
  if (res.witness.empty()) {
    out.push_back("empty witness");
    return out;
  }
  for (GridIndex z : res.witness)
    if (rf.q_at(z) <= 0) out.push_back("witness ball without admissible radius");
  if (!ball_contains(rf, res.witness.front(), u)) out.push_back("first ball misses u");
  if (!ball_contains(rf, res.witness.back(), v)) out.push_back("last ball misses v");
  for (std::size_t i = 1; i < res.witness.size(); ++i)
    if (!balls_overlap(rf, res.witness[i - 1], res.witness[i]))
      out.push_back("balls " + std::to_string(i - 1) + " and " + std::to_string(i) + " are disjoint");
  return out;
}

VariantDistances variant_compare(const MassGrid& mass, double delta, Point u, Point v, int threads) {
  VariantDistances out;
  out.standard = ball_hop_distance(radius_field(mass, delta, BallVariant::standard, threads), u, v);
  out.doubled = ball_hop_distance(radius_field(mass, delta, BallVariant::doubled, threads), u, v);
  out.circle_avg = ball_hop_distance(radius_field(mass, delta, BallVariant::circle_avg, threads), u, v);
  return out;
}

void write_distance_csv(std::ostream& out, const std::vector<DistanceRecord>& rows) {
  out << "gamma,delta,variant,N,seed,u,v,distance,expanded_nodes,wall_ms\n";
  for (const auto& r : rows) {
    out << csv_num(r.gamma) << ',' << csv_num(r.delta) << ',' << to_string(r.variant) << ',' << r.n << ','
        << r.seed << ',' << csv_num(r.u.x) << ' ' << csv_num(r.u.y) << ',' << csv_num(r.v.x) << ' '
        << csv_num(r.v.y) << ',';
    if (r.distance) out << *r.distance;
    out << ',' << r.expanded_nodes << ',';
    if (r.wall_ms) out << csv_num(*r.wall_ms);
    out << '\n';
  }
}

}  // namespace lqg
