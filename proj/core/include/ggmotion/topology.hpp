#pragma once

#include "ggmotion/geom.hpp"

#include <string>
#include <vector>

namespace ggmotion {

/// Skeleton tree plus the body-group partition.
///
/// `order` is the canonical joint ordering (the group lists concatenated).
/// Every joint-indexed summation in the network iterates in this order, so a
/// consistent relabeling of joints and groups permutes outputs bit-exactly.
struct SkeletonTopology {
  int n_joints = 0;
  std::vector<int> parent;               // -1 for the global root
  std::vector<std::vector<int>> groups;  // first entry of each list is its root

  // Derived at build time.
  int root = -1;
  std::vector<std::vector<int>> neighbors;  // tree adjacency, canonical order
  std::vector<int> group_of;                // joint -> group index
  std::vector<int> order;                   // canonical joint order
  std::vector<int> rank;                    // joint -> position in `order`
  Eigen::MatrixXi hop;                      // all-pairs shortest path lengths
  int max_hop = 0;

  int n_groups() const { return static_cast<int>(groups.size()); }
};

/// Validates the parent links and group partition, then derives adjacency and
/// the hop matrix. Throws ConfigError naming the violated invariant.
SkeletonTopology build_topology(std::vector<int> parent, std::vector<std::vector<int>> groups);

/// BFS all-pairs hop distances over the undirected tree adjacency.
Eigen::MatrixXi hops(const SkeletonTopology& topo);

/// Sinusoidal encoding of a hop count: entry 2i = sin(h / 10000^(2i/C')),
/// entry 2i+1 = cos of the same argument. c_prime must be even.
Row hop_embed(int h, int c_prime);

/// Precomputed hop encodings, row h = hop_embed(h, c_prime).
struct HopEmbedding {
  Mat table;  // (max_hop + 1) x C'

  const Row row(int h) const { return table.row(h); }
  int c_prime() const { return static_cast<int>(table.cols()); }
};

HopEmbedding build_hop_embedding(const SkeletonTopology& topo, int c_prime);

/// JSON of the form {"n_joints": N, "parent": [int or null, ...],
/// "groups": [[...], ...]}; the first index of each group is its root.
SkeletonTopology topology_from_json(const std::string& text);
std::string topology_to_json(const SkeletonTopology& topo);
SkeletonTopology load_topology(const std::string& path);

}  // namespace ggmotion
