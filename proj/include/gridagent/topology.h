#pragma once

#include <cstddef>
#include <vector>

#include "gridagent/model.h"

namespace gridagent::topology {

struct Edge {
  std::size_t to;      // bus index
  std::size_t branch;  // branch index
};

using Adjacency = std::vector<std::vector<Edge>>;

/// Every branch, whatever its switch or service state. Used for electrical
/// proximity (hop distances).
Adjacency physical_adjacency(const Network& net);

/// Only energizable branches: effective_branch_state() and both ends in service.
Adjacency active_adjacency(const Network& net);

/// BFS hop counts from a set of source buses; -1 marks unreachable buses.
std::vector<int> hop_distances(const Adjacency& adj, const std::vector<std::size_t>& sources);

/// Connected components over in-service buses, each sorted by bus index;
/// components ordered by their smallest bus index.
std::vector<std::vector<std::size_t>> connected_components(const Network& net, const Adjacency& adj);

/// BFS spanning tree of the energized island rooted at the slack bus.
struct FeedTree {
  std::vector<int> parent_bus;     // -1 for root and unreached buses
  std::vector<int> parent_branch;  // branch feeding the bus from its parent
  std::vector<int> depth;          // -1 for unreached
};

FeedTree feed_tree(const Network& net);

/// Buses in the subtree rooted at `bus` (inclusive), in BFS order.
std::vector<std::size_t> subtree(const FeedTree& tree, std::size_t bus);

/// The bus on the far side of `branch_index` from the root, or -1 if the branch
/// is not a tree edge.
int downstream_end(const Network& net, const FeedTree& tree, std::size_t branch_index);

}  // namespace gridagent::topology
