#pragma once

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "core.hpp"

namespace motgraph {

/// Undirected tree with directed-message bookkeeping. Edge e = (a, b) owns the
/// directed ids 2e (a -> b) and 2e + 1 (b -> a).
class tree_topology {
public:
  struct neighbor {
    index node;
    index edge;
    index out; // directed id of the message this node sends to `node`
    index in;  // directed id of the message `node` sends to this node
  };

  tree_topology() = default;

  /// `edges` must form a tree on `nodes` vertices.
  tree_topology(index nodes, std::vector<std::pair<index, index>> edges)
  : edges_(std::move(edges)), adj_(nodes), parent_(nodes, nodes), depth_(nodes, 0)
  {
    if (nodes == 0 || edges_.size() + 1 != nodes)
      throw mot_error(error_kind::invalid_argument, "tree_topology: not a tree");
    for (index e = 0; e < edges_.size(); ++e) {
      auto [a, b] = edges_[e];
      adj_[a].push_back({b, e, 2 * e, 2 * e + 1});
      adj_[b].push_back({a, e, 2 * e + 1, 2 * e});
    }

    // root at 0, BFS for parents, depths and subtree sizes
    std::vector<index> order;
    order.reserve(nodes);
    std::vector<bool> seen(nodes, false);
    order.push_back(0);
    seen[0] = true;
    for (index i = 0; i < order.size(); ++i) {
      const index v = order[i];
      for (const auto& nb : adj_[v]) {
        if (seen[nb.node]) continue;
        seen[nb.node] = true;
        parent_[nb.node] = v;
        depth_[nb.node] = depth_[v] + 1;
        order.push_back(nb.node);
      }
    }
    if (order.size() != nodes)
      throw mot_error(error_kind::disconnected, "tree_topology: graph is not connected");
    bfs_order_ = order;

    std::vector<index> subtree(nodes, 1);
    for (index i = order.size(); i-- > 1;)
      subtree[parent_[order[i]]] += subtree[order[i]];

    // a message's dependencies all have a strictly smaller source-side subtree
    std::vector<index> source_size(2 * edges_.size());
    for (index d = 0; d < source_size.size(); ++d) {
      const index from = source(d), to = target(d);
      source_size[d] = parent_[from] == to ? subtree[from] : nodes - subtree[to];
    }
    schedule_.resize(source_size.size());
    std::iota(schedule_.begin(), schedule_.end(), index{0});
    std::stable_sort(schedule_.begin(), schedule_.end(),
                     [&](index a, index b) { return source_size[a] < source_size[b]; });
  }

  index node_count() const { return adj_.size(); }
  index edge_count() const { return edges_.size(); }
  index directed_count() const { return 2 * edges_.size(); }

  const std::pair<index, index>& edge(index e) const { return edges_[e]; }
  const std::vector<neighbor>& neighbors(index v) const { return adj_[v]; }
  index degree(index v) const { return adj_[v].size(); }

  /// Parent when rooted at node 0; the root's parent is node_count().
  index parent(index v) const { return parent_[v]; }
  /// Nodes in breadth-first order from node 0.
  const std::vector<index>& bfs_order() const { return bfs_order_; }

  index source(index d) const { return d % 2 == 0 ? edges_[d / 2].first : edges_[d / 2].second; }
  index target(index d) const { return d % 2 == 0 ? edges_[d / 2].second : edges_[d / 2].first; }

  index directed(index from, index to) const
  {
    for (const auto& nb : adj_[from])
      if (nb.node == to) return nb.out;
    throw mot_error(error_kind::invalid_argument, "tree_topology: nodes are not adjacent");
  }

  /// All directed messages, each listed after everything it depends on.
  const std::vector<index>& schedule() const { return schedule_; }

  /// Vertex sequence of the unique path from a to b (inclusive).
  std::vector<index> path(index a, index b) const
  {
    std::vector<index> front, back;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        front.push_back(a);
        a = parent_[a];
      } else {
        back.push_back(b);
        b = parent_[b];
      }
    }
    front.push_back(a);
    front.insert(front.end(), back.rbegin(), back.rend());
    return front;
  }

  index distance(index a, index b) const { return path(a, b).size() - 1; }

  /// Calls f(d) for every directed message pointing away from v.
  template<typename F>
  void for_each_away(index v, F&& f) const
  {
    std::vector<std::pair<index, index>> stack{{v, node_count()}};
    while (!stack.empty()) {
      auto [x, from] = stack.back();
      stack.pop_back();
      for (const auto& nb : adj_[x]) {
        if (nb.node == from) continue;
        f(nb.out);
        stack.push_back({nb.node, x});
      }
    }
  }

  /// Marks d and everything computed from it as stale. Stops at messages that
  /// are already stale, whose dependents are stale by construction.
  void invalidate(std::vector<bool>& dirty, index d) const
  {
    if (dirty[d]) return;
    dirty[d] = true;
    std::vector<index> stack{d};
    while (!stack.empty()) {
      const index cur = stack.back();
      stack.pop_back();
      const index from = source(cur);
      for (const auto& nb : adj_[target(cur)]) {
        if (nb.node == from || dirty[nb.out]) continue;
        dirty[nb.out] = true;
        stack.push_back(nb.out);
      }
    }
  }

  /// Longest shortest path in hops.
  index diameter() const
  {
    auto farthest = [&](index s) {
      std::vector<index> dist(node_count(), node_count());
      std::vector<index> queue{s};
      dist[s] = 0;
      index best = s;
      for (index i = 0; i < queue.size(); ++i) {
        const index v = queue[i];
        if (dist[v] > dist[best]) best = v;
        for (const auto& nb : adj_[v])
          if (dist[nb.node] == node_count()) {
            dist[nb.node] = dist[v] + 1;
            queue.push_back(nb.node);
          }
      }
      return std::pair{best, dist[best]};
    };
    return farthest(farthest(0).first).second;
  }

private:
  std::vector<std::pair<index, index>> edges_;
  std::vector<std::vector<neighbor>> adj_;
  std::vector<index> parent_;
  std::vector<index> depth_;
  std::vector<index> schedule_;
  std::vector<index> bfs_order_;
};

} // namespace motgraph
