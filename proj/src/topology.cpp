#include "gridagent/topology.h"

#include <algorithm>
#include <deque>

namespace gridagent::topology {

Adjacency physical_adjacency(const Network& net) {
  Adjacency adj(net.buses().size());
  const auto& branches = net.branches();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto f = *net.bus_index(branches[k].from_bus);
    const auto t = *net.bus_index(branches[k].to_bus);
    adj[f].push_back({t, k});
    adj[t].push_back({f, k});
  }
  return adj;
}

Adjacency active_adjacency(const Network& net) {
  Adjacency adj(net.buses().size());
  const auto& branches = net.branches();
  const auto& buses = net.buses();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const Branch& br = branches[k];
    if (!effective_branch_state(net, br.id)) continue;
    const auto f = *net.bus_index(br.from_bus);
    const auto t = *net.bus_index(br.to_bus);
    if (!buses[f].in_service || !buses[t].in_service) continue;
    adj[f].push_back({t, k});
    adj[t].push_back({f, k});
  }
  return adj;
}

std::vector<int> hop_distances(const Adjacency& adj, const std::vector<std::size_t>& sources) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<std::size_t> queue;
  for (auto s : sources) {
    if (s < adj.size() && dist[s] < 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    for (const auto& e : adj[u]) {
      if (dist[e.to] < 0) {
        dist[e.to] = dist[u] + 1;
        queue.push_back(e.to);
      }
    }
  }
  return dist;
}

std::vector<std::vector<std::size_t>> connected_components(const Network& net, const Adjacency& adj) {
  const auto& buses = net.buses();
  std::vector<int> label(buses.size(), -1);
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t s = 0; s < buses.size(); ++s) {
    if (!buses[s].in_service || label[s] >= 0) continue;
    const int c = static_cast<int>(comps.size());
    comps.emplace_back();
    std::deque<std::size_t> queue{s};
    label[s] = c;
    while (!queue.empty()) {
      auto u = queue.front();
      queue.pop_front();
      comps[c].push_back(u);
      for (const auto& e : adj[u]) {
        if (label[e.to] < 0 && buses[e.to].in_service) {
          label[e.to] = c;
          queue.push_back(e.to);
        }
      }
    }
    std::sort(comps[c].begin(), comps[c].end());
  }
  return comps;
}

FeedTree feed_tree(const Network& net) {
  const auto n = net.buses().size();
  FeedTree tree{std::vector<int>(n, -1), std::vector<int>(n, -1), std::vector<int>(n, -1)};
  const auto root = *net.bus_index(net.slack_bus().id);
  if (!net.buses()[root].in_service) return tree;
  const Adjacency adj = active_adjacency(net);
  std::deque<std::size_t> queue{root};
  tree.depth[root] = 0;
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    for (const auto& e : adj[u]) {
      if (tree.depth[e.to] < 0) {
        tree.depth[e.to] = tree.depth[u] + 1;
        tree.parent_bus[e.to] = static_cast<int>(u);
        tree.parent_branch[e.to] = static_cast<int>(e.branch);
        queue.push_back(e.to);
      }
    }
  }
  return tree;
}

std::vector<std::size_t> subtree(const FeedTree& tree, std::size_t bus) {
  const auto n = tree.parent_bus.size();
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.parent_bus[i] >= 0) children[static_cast<std::size_t>(tree.parent_bus[i])].push_back(i);
  }
  std::vector<std::size_t> out{bus};
  for (std::size_t head = 0; head < out.size(); ++head) {
    for (auto c : children[out[head]]) out.push_back(c);
  }
  return out;
}

int downstream_end(const Network& net, const FeedTree& tree, std::size_t branch_index) {
  const Branch& br = net.branches()[branch_index];
  const auto f = *net.bus_index(br.from_bus);
  const auto t = *net.bus_index(br.to_bus);
  if (tree.parent_branch[t] == static_cast<int>(branch_index)) return static_cast<int>(t);
  if (tree.parent_branch[f] == static_cast<int>(branch_index)) return static_cast<int>(f);
  return -1;
}

}  // namespace gridagent::topology
