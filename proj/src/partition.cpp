#include "lqg/partition.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace lqg {

int default_depth_cap(const FieldStack& stack) { return stack.octaves(); }

CellPartition build_partition(const FieldStack& stack, double gamma, double delta, int depth_cap) {
  if (!(delta > 0.0) || delta > 1.0) throw DomainError("delta must lie in (0, 1]");
  if (!(gamma >= 0.0) || gamma >= 2.0) throw DomainError("gamma must lie in [0, 2)");
  if (depth_cap < 0) depth_cap = default_depth_cap(stack);
  if (depth_cap < 1 || depth_cap > stack.octaves())
    throw DomainError("depth cap must lie in [1, J] = [1, " + std::to_string(stack.octaves()) + "]");

  CellPartition part;
  part.delta = delta;
  part.gamma = gamma;
  part.depth_cap = depth_cap;
  const double threshold = delta * delta;

  struct Pending {
    DyadicBox box;
    double parent_mass;
  };
  std::deque<Pending> queue;
  queue.push_back({{0, 0, 0}, std::numeric_limits<double>::infinity()});
  while (!queue.empty()) {
    const Pending cur = queue.front();
    queue.pop_front();
    const double mass = approx_lqg_box(stack, gamma, cur.box);
    if (mass >= threshold && cur.box.level < depth_cap) {
      const DyadicBox& b = cur.box;
      for (int k = 0; k < 4; ++k)
        queue.push_back({{b.level + 1, 2 * b.ix + (k & 1), 2 * b.iy + (k >> 1)}, mass});
      continue;
    }
    Cell c{cur.box, mass, cur.parent_mass, mass >= threshold};
    part.depth_cap_hit = part.depth_cap_hit || c.capped;
    part.leaves.push_back(c);
  }

  const int fine = 1 << depth_cap;
  part.locator_.assign(static_cast<std::size_t>(fine) * fine, -1);
  for (int id = 0; id < part.cell_count(); ++id) {
    const DyadicBox& b = part.leaves[id].box;
    const int span = 1 << (depth_cap - b.level);
    for (int y = b.iy * span; y < (b.iy + 1) * span; ++y)
      std::fill_n(part.locator_.begin() + static_cast<std::ptrdiff_t>(y) * fine + b.ix * span, span, id);
  }

  // Two leaves are adjacent iff some pair of edge-sharing fine cells straddles them.
  for (int y = 0; y < fine; ++y) {
    for (int x = 0; x < fine; ++x) {
      const int a = part.locator_[static_cast<std::size_t>(y) * fine + x];
      if (x + 1 < fine) {
        const int b = part.locator_[static_cast<std::size_t>(y) * fine + x + 1];
        if (a != b) part.edges.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < fine) {
        const int b = part.locator_[static_cast<std::size_t>(y + 1) * fine + x];
        if (a != b) part.edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(part.edges.begin(), part.edges.end());
  part.edges.erase(std::unique(part.edges.begin(), part.edges.end()), part.edges.end());

  part.adj_offsets_.assign(part.leaves.size() + 1, 0);
  for (const auto& [a, b] : part.edges) {
    ++part.adj_offsets_[a + 1];
    ++part.adj_offsets_[b + 1];
  }
  for (std::size_t i = 1; i < part.adj_offsets_.size(); ++i) part.adj_offsets_[i] += part.adj_offsets_[i - 1];
  part.adj_.resize(part.edges.size() * 2);
  std::vector<int> fill(part.adj_offsets_.begin(), part.adj_offsets_.end() - 1);
  for (const auto& [a, b] : part.edges) {
    part.adj_[fill[a]++] = b;
    part.adj_[fill[b]++] = a;
  }
  return part;
}

int CellPartition::locate(Point p) const {
  if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) throw DomainError("locate_cell: point outside [0,1]^2");
  const int fine = 1 << depth_cap;
  const int x = std::min(fine - 1, static_cast<int>(std::floor(p.x * fine)));
  const int y = std::min(fine - 1, static_cast<int>(std::floor(p.y * fine)));
  return locator_[static_cast<std::size_t>(y) * fine + x];
}

std::span<const int> CellPartition::neighbors(int id) const {
  return {adj_.data() + adj_offsets_[id], static_cast<std::size_t>(adj_offsets_[id + 1] - adj_offsets_[id])};
}

int locate_cell(const CellPartition& partition, Point p) { return partition.locate(p); }

int approx_graph_distance(const CellPartition& partition, Point u, Point v) {
  const int src = partition.locate(u);
  const int dst = partition.locate(v);
  if (src == dst) return 0;
  std::vector<int> dist(partition.leaves.size(), -1);
  std::vector<int> queue{src};
  dist[src] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int cur = queue[head];
    for (int nb : partition.neighbors(cur)) {
      if (dist[nb] >= 0) continue;
      dist[nb] = dist[cur] + 1;
      if (nb == dst) return dist[nb];
      queue.push_back(nb);
    }
  }
  throw InvariantViolation("partition adjacency graph is disconnected");
}

namespace {

bool touches_boundary(const DyadicBox& b) {
  const int last = (1 << b.level) - 1;
  return b.ix == 0 || b.iy == 0 || b.ix == last || b.iy == last;
}

}  // namespace

PartitionStats partition_stats(const CellPartition& partition) {
  PartitionStats s;
  s.leaf_count = partition.cell_count();
  s.min_side = std::numeric_limits<double>::infinity();
  s.max_side = 0.0;
  for (int id = 0; id < s.leaf_count; ++id) {
    const Cell& c = partition.leaves[id];
    s.min_side = std::min(s.min_side, c.side());
    s.max_side = std::max(s.max_side, c.side());
    s.area += c.side() * c.side();
    const int deg = static_cast<int>(partition.neighbors(id).size());
    ++s.degree_histogram[deg];
    if (!touches_boundary(c.box)) ++s.interior_degree_histogram[deg];
  }
  return s;
}

std::vector<std::string> partition_violations(const CellPartition& partition) {
  std::vector<std::string> out;
  const double threshold = partition.delta * partition.delta;
  // Powers of two down to 2^-2cap: the sum is exact in double.
  double area = 0.0;
  for (const Cell& c : partition.leaves) area += c.side() * c.side();
  if (area != 1.0) out.push_back("leaf areas sum to " + std::to_string(area));

  std::vector<long long> owned(partition.leaves.size(), 0);
  for (int id : partition.locator()) {
    if (id < 0) {
      out.push_back("locator cell not covered by any leaf");
      break;
    }
    ++owned[id];
  }
  for (std::size_t id = 0; id < partition.leaves.size(); ++id) {
    const Cell& c = partition.leaves[id];
    const long long span = 1LL << (partition.depth_cap - c.box.level);
    if (owned[id] != span * span) out.push_back("leaf " + std::to_string(id) + " overlaps another leaf");
    if (!c.capped && !(c.approx_mass < threshold))
      out.push_back("uncapped leaf " + std::to_string(id) + " has mass >= delta^2");
    if (c.capped && c.box.level != partition.depth_cap)
      out.push_back("leaf " + std::to_string(id) + " flagged capped above the cap");
    if (c.box.level > 0 && !(c.parent_mass >= threshold))
      out.push_back("parent of leaf " + std::to_string(id) + " had mass < delta^2");
  }
  for (const auto& [a, b] : partition.edges) {
    const DyadicBox& p = partition.leaves[a].box;
    const DyadicBox& q = partition.leaves[b].box;
    // Overlap of the two boxes' projections, in units of 2^-cap.
    const long long sp = 1LL << (partition.depth_cap - p.level);
    const long long sq = 1LL << (partition.depth_cap - q.level);
    const long long px0 = p.ix * sp, px1 = px0 + sp, py0 = p.iy * sp, py1 = py0 + sp;
    const long long qx0 = q.ix * sq, qx1 = qx0 + sq, qy0 = q.iy * sq, qy1 = qy0 + sq;
    const long long ox = std::min(px1, qx1) - std::max(px0, qx0);
    const long long oy = std::min(py1, qy1) - std::max(py0, qy0);
    const bool side_contact = (ox == 0 && oy > 0) || (oy == 0 && ox > 0);
    if (!side_contact) out.push_back("edge " + std::to_string(a) + "-" + std::to_string(b) + " without shared segment");
    const auto nb = partition.neighbors(b);
    if (std::find(nb.begin(), nb.end(), a) == nb.end()) out.push_back("asymmetric adjacency");
  }
  return out;
}

void write_partition_json(std::ostream& out, const CellPartition& partition) {
  nlohmann::json j;
  j["delta"] = partition.delta;
  j["gamma"] = partition.gamma;
  j["depth_cap"] = partition.depth_cap;
  j["depth_cap_hit"] = partition.depth_cap_hit;
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const Cell& c : partition.leaves) {
    cells.push_back({{"center", {c.center().x, c.center().y}}, {"side", c.side()}, {"mass", c.approx_mass}});
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : partition.edges) edges.push_back({a, b});
  out << j.dump() << '\n';
}

}  // namespace lqg
