#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "lqg/partition.hpp"

using namespace lqg;

namespace {

// Adjacency recomputed from geometry: two leaves touch along a segment of
// positive length.
bool share_segment(const Cell& a, const Cell& b) {
  const double ax0 = a.box.ix * a.side(), ax1 = ax0 + a.side(), ay0 = a.box.iy * a.side(), ay1 = ay0 + a.side();
  const double bx0 = b.box.ix * b.side(), bx1 = bx0 + b.side(), by0 = b.box.iy * b.side(), by1 = by0 + b.side();
  const double ox = std::min(ax1, bx1) - std::max(ax0, bx0);
  const double oy = std::min(ay1, by1) - std::max(ay0, by0);
  return (ox > 0 && oy == 0) || (oy > 0 && ox == 0);
}

int brute_hops(const CellPartition& p, int from, int to) {
  const int n = p.cell_count();
  std::vector<int> dist(n, -1);
  std::queue<int> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    const int a = q.front();
    q.pop();
    for (int b = 0; b < n; ++b)
      if (dist[b] < 0 && share_segment(p.leaves[a], p.leaves[b])) {
        dist[b] = dist[a] + 1;
        q.push(b);
      }
  }
  return dist[to];
}

}  // namespace

TEST_CASE("gamma = 0 partition is the uniform grid just below delta") {
  const FieldStack s = sample_stack({Engine::tilde_h, 64, 5, 0, 2});
  // a box of side 1/8 has mass 1/64 = delta^2 and is split; side 1/16 is not
  const CellPartition p = build_partition(s, 0.0, 0.125);
  CHECK(p.cell_count() == 256);
  for (const auto& c : p.leaves) CHECK(c.side() == 0.0625);
  CHECK_FALSE(p.depth_cap_hit);
  // u = (0.25, 0.5) and v = (0.75, 0.5) are eight columns apart
  CHECK(approx_graph_distance(p, {0.25, 0.5}, {0.75, 0.5}) == 8);
  const PartitionStats st = partition_stats(p);
  CHECK(st.area == 1.0);
  CHECK(st.interior_degree_histogram.size() == 1);
  CHECK(st.interior_degree_histogram.begin()->first == 4);
}

TEST_CASE("partition invariants hold on random fields") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const FieldStack s = sample_stack({Engine::eta, 64, 5, seed, 2});
    for (double delta : {0.25, 0.0625}) {
      const CellPartition p = build_partition(s, 1.0, delta);
      CHECK(partition_violations(p).empty());
      CHECK(partition_stats(p).area == 1.0);
      for (const auto& c : p.leaves) {
        if (!c.capped) CHECK(c.approx_mass < delta * delta);
        CHECK(c.parent_mass >= delta * delta);
      }
    }
  }
}

TEST_CASE("edges match geometric adjacency and hop counts match a brute-force search") {
  const FieldStack s = sample_stack({Engine::tilde_h, 32, 4, 5, 2});
  const CellPartition p = build_partition(s, 1.2, 0.1);
  std::set<std::pair<int, int>> geo;
  for (int a = 0; a < p.cell_count(); ++a)
    for (int b = a + 1; b < p.cell_count(); ++b)
      if (share_segment(p.leaves[a], p.leaves[b])) geo.insert({a, b});
  CHECK(std::set<std::pair<int, int>>(p.edges.begin(), p.edges.end()) == geo);
  for (auto [u, v] : {std::pair<Point, Point>{{0.25, 0.5}, {0.75, 0.5}}, {{0.1, 0.1}, {0.9, 0.7}}})
    CHECK(approx_graph_distance(p, u, v) == brute_hops(p, p.locate(u), p.locate(v)));
}

TEST_CASE("locate uses closed lower-left edges") {
  const FieldStack s = sample_stack({Engine::tilde_h, 32, 4, 0, 2});
  const CellPartition p = build_partition(s, 0.0, 0.5);  // 4 x 4 leaves of side 1/4
  REQUIRE(p.cell_count() == 16);
  const auto& c = p.leaves[p.locate({0.25, 0.5})];
  CHECK(c.box.ix == 1);
  CHECK(c.box.iy == 2);
  const auto& last = p.leaves[p.locate({1.0, 1.0})];
  CHECK(last.box.ix == 3);
  CHECK(last.box.iy == 3);
  CHECK_THROWS_AS(p.locate({1.5, 0.5}), DomainError);
}

TEST_CASE("depth cap") {
  const FieldStack s = sample_stack({Engine::tilde_h, 32, 4, 0, 2});
  CHECK(default_depth_cap(s) == 4);
  CHECK_THROWS_AS(build_partition(s, 1.0, 0.1, 5), DomainError);
  CHECK_THROWS_AS(build_partition(s, 1.0, 0.1, 0), DomainError);
  const CellPartition p = build_partition(s, 0.0, 0.01, 2);
  CHECK(p.depth_cap_hit);
  CHECK(p.cell_count() == 16);
  for (const auto& c : p.leaves) CHECK(c.capped);
  CHECK(partition_violations(p).empty());
}

TEST_CASE("partition JSON") {
  const FieldStack s = sample_stack({Engine::tilde_h, 32, 4, 0, 2});
  const CellPartition p = build_partition(s, 1.0, 0.2);
  std::ostringstream out;
  write_partition_json(out, p);
  const auto doc = nlohmann::json::parse(out.str());
  CHECK(doc["cells"].size() == static_cast<std::size_t>(p.cell_count()));
  CHECK(doc["edges"].size() == p.edges.size());
  CHECK(doc["delta"].get<double>() == 0.2);
}
