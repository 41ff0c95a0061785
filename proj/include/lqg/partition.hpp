#pragma once

// Random dyadic delta-partition: boxes are split while their approximate LQG
// mass is at least delta^2. D' is the hop distance in the leaf adjacency graph.

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lqg/common.hpp"
#include "lqg/field.hpp"
#include "lqg/gmc.hpp"

namespace lqg {

struct Cell {
  DyadicBox box;
  double approx_mass = 0.0;
  double parent_mass = 0.0;  ///< approximate mass of the box this leaf was split from (root: +inf)
  bool capped = false;       ///< at the depth cap with approx_mass >= delta^2

  double side() const { return box.side(); }
  Point center() const { return box.center(); }
};

class CellPartition {
 public:
  double delta = 0.0;
  double gamma = 0.0;
  int depth_cap = 0;
  bool depth_cap_hit = false;
  std::vector<Cell> leaves;
  std::vector<std::pair<int, int>> edges;  ///< (a, b) with a < b, sorted

  /// Leaf containing p. Cells are closed on their lower and left edges; points
  /// on the top or right edge of the unit square go to the last cell.
  int locate(Point p) const;
  std::span<const int> neighbors(int id) const;
  int cell_count() const { return static_cast<int>(leaves.size()); }
  /// Leaf ids on the 2^depth_cap x 2^depth_cap locator grid (row-major).
  const std::vector<int>& locator() const { return locator_; }

 private:
  friend CellPartition build_partition(const FieldStack&, double, double, int);
  std::vector<int> locator_;
  std::vector<int> adj_offsets_;
  std::vector<int> adj_;
};

/// Default depth cap: J (boxes of side 2^-J still have a grid-point anchor and
/// a field at their own scale).
int default_depth_cap(const FieldStack& stack);

/// Breadth-first subdivision from the unit square. depth_cap < 0 selects the
/// default; otherwise 1 <= depth_cap <= J is required.
CellPartition build_partition(const FieldStack& stack, double gamma, double delta, int depth_cap = -1);

int locate_cell(const CellPartition& partition, Point p);

/// Hop count between the leaves containing u and v (0 for the same leaf).
int approx_graph_distance(const CellPartition& partition, Point u, Point v);

struct PartitionStats {
  int leaf_count = 0;
  double min_side = 0.0;
  double max_side = 0.0;
  double area = 0.0;                         ///< sum of side^2
  std::map<int, int> degree_histogram;       ///< all leaves
  std::map<int, int> interior_degree_histogram;  ///< leaves not touching the square's boundary
};

PartitionStats partition_stats(const CellPartition& partition);

/// Structural checks: exact tiling, stopping rule for leaves and parents,
/// edge symmetry and positive shared boundary. Returns one message per violation.
std::vector<std::string> partition_violations(const CellPartition& partition);

/// {"delta", "gamma", "depth_cap", "depth_cap_hit", "cells": [{"center", "side", "mass"}], "edges"}
void write_partition_json(std::ostream& out, const CellPartition& partition);

}  // namespace lqg
