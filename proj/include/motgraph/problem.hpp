#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "tree_topology.hpp"

namespace motgraph {

/// Pairwise cost C^{(tail, head)}; rows index the tail vertex.
struct cost_matrix {
  index tail = 0;
  index head = 0;
  matrix entries;
};

/// Raw, unvalidated problem description. Vertices are 0-indexed.
/// `marginals` is indexed by vertex and empty for unconstrained vertices.
struct problem_data {
  index m = 0;
  std::vector<index> support_sizes;
  std::vector<cost_matrix> edges;
  std::vector<index> gamma;
  std::vector<vector> marginals;
};

/// Pairwise plans aligned with a problem's edge list (same orientation).
struct edge_plan_set {
  std::vector<matrix> plans;
};

inline constexpr double probability_tolerance = 1e-12;

namespace detail {

inline void check_marginal(std::span<const double> w, index expected, index vertex)
{
  if (w.size() != expected)
    throw mot_error(error_kind::shape_mismatch,
                    "marginal of vertex " + std::to_string(vertex + 1) + " has length " +
                    std::to_string(w.size()) + ", support size is " + std::to_string(expected));
  double s = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0)
      throw mot_error(error_kind::not_a_probability,
                      "marginal of vertex " + std::to_string(vertex + 1) + " has a negative or non-finite entry");
    s += x;
  }
  if (std::abs(s - 1.0) > probability_tolerance)
    throw mot_error(error_kind::not_a_probability,
                    "marginal of vertex " + std::to_string(vertex + 1) + " sums to " + std::to_string(s));
}

/// Shapes, cost entries, gamma ids and marginals. Shared by tree and general validation.
inline void check_common(const problem_data& p)
{
  if (p.m < 2)
    throw mot_error(error_kind::invalid_argument, "a problem needs at least two vertices");
  if (p.support_sizes.size() != p.m)
    throw mot_error(error_kind::shape_mismatch, "support_sizes has " + std::to_string(p.support_sizes.size()) +
                                                " entries for m = " + std::to_string(p.m));
  for (index v = 0; v < p.m; ++v)
    if (p.support_sizes[v] == 0)
      throw mot_error(error_kind::shape_mismatch, "vertex " + std::to_string(v + 1) + " has empty support");
  for (const auto& e : p.edges) {
    if (e.tail >= p.m || e.head >= p.m)
      throw mot_error(error_kind::shape_mismatch, "edge endpoint out of range");
    if (e.tail == e.head)
      throw mot_error(error_kind::cyclic_graph, "self loop at vertex " + std::to_string(e.tail + 1));
    if (e.entries.rows() != p.support_sizes[e.tail] || e.entries.cols() != p.support_sizes[e.head])
      throw mot_error(error_kind::shape_mismatch,
                      "cost on edge " + std::to_string(e.tail + 1) + "-" + std::to_string(e.head + 1) +
                      " does not match the endpoint support sizes");
    for (double c : e.entries.flat())
      if (!std::isfinite(c) || c < 0.0)
        throw mot_error(error_kind::invalid_cost,
                        "cost on edge " + std::to_string(e.tail + 1) + "-" + std::to_string(e.head + 1) +
                        " has a negative or non-finite entry");
  }
  if (p.gamma.empty())
    throw mot_error(error_kind::invalid_argument, "no constrained vertices");
  if (!std::is_sorted(p.gamma.begin(), p.gamma.end()) ||
      std::adjacent_find(p.gamma.begin(), p.gamma.end()) != p.gamma.end() || p.gamma.back() >= p.m)
    throw mot_error(error_kind::invalid_argument, "gamma must be sorted, unique and in range");
  if (p.marginals.size() != p.m)
    throw mot_error(error_kind::shape_mismatch, "marginals must be indexed by vertex");
  for (index v = 0; v < p.m; ++v) {
    const bool constrained = std::binary_search(p.gamma.begin(), p.gamma.end(), v);
    if (!constrained && !p.marginals[v].empty())
      throw mot_error(error_kind::invalid_argument,
                      "vertex " + std::to_string(v + 1) + " carries a marginal but is not in gamma");
    if (constrained) check_marginal(p.marginals[v], p.support_sizes[v], v);
  }
}

/// Union-find over the edge list: reports the first cycle, then connectivity.
inline void check_tree_shape(index m, const std::vector<std::pair<index, index>>& edges)
{
  std::vector<index> root(m);
  std::iota(root.begin(), root.end(), index{0});
  auto find = [&](index x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (auto [a, b] : edges) {
    const index ra = find(a), rb = find(b);
    if (ra == rb)
      throw mot_error(error_kind::cyclic_graph,
                      "edge " + std::to_string(a + 1) + "-" + std::to_string(b + 1) + " closes a cycle");
    root[ra] = rb;
  }
  if (edges.size() + 1 != m)
    throw mot_error(error_kind::disconnected, "graph has " + std::to_string(m - edges.size()) + " components");
}

inline bool is_connected(index m, const std::vector<std::pair<index, index>>& edges)
{
  std::vector<index> root(m);
  std::iota(root.begin(), root.end(), index{0});
  auto find = [&](index x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  index components = m;
  for (auto [a, b] : edges) {
    const index ra = find(a), rb = find(b);
    if (ra != rb) {
      root[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

inline std::vector<std::pair<index, index>> endpoint_list(const problem_data& p)
{
  std::vector<std::pair<index, index>> out;
  out.reserve(p.edges.size());
  for (const auto& e : p.edges) out.emplace_back(e.tail, e.head);
  return out;
}

} // namespace detail

/// A validated tree-structured problem whose constrained set is exactly the leaf set.
/// Immutable after construction.
class tree_problem {
public:
  const problem_data& data() const { return data_; }
  index m() const { return data_.m; }
  index support(index v) const { return data_.support_sizes[v]; }
  index max_support() const { return *std::max_element(data_.support_sizes.begin(), data_.support_sizes.end()); }
  const std::vector<index>& gamma() const { return data_.gamma; }
  bool in_gamma(index v) const { return std::binary_search(data_.gamma.begin(), data_.gamma.end(), v); }
  const vector& marginal(index k) const { return data_.marginals[k]; }
  const std::vector<cost_matrix>& edges() const { return data_.edges; }
  const tree_topology& topology() const { return topology_; }

  /// The unique neighbour of a leaf and the edge joining them.
  index leaf_neighbor(index k) const { return topology_.neighbors(k).front().node; }
  index leaf_edge(index k) const { return topology_.neighbors(k).front().edge; }

  /// C^{(a,b)} oriented with rows indexed by a.
  matrix oriented_cost(index e, index a) const
  {
    const auto& c = data_.edges[e];
    return c.tail == a ? c.entries : c.entries.transposed();
  }

private:
  friend tree_problem validate_tree_problem(problem_data p);
  tree_problem(problem_data p, tree_topology t) : data_(std::move(p)), topology_(std::move(t)) {}

  problem_data data_;
  tree_topology topology_;
};

/// Accepts p iff it describes a tree with Γ equal to its leaves and valid
/// marginals/costs; throws mot_error naming the violated invariant otherwise.
inline tree_problem validate_tree_problem(problem_data p)
{
  detail::check_common(p);
  auto endpoints = detail::endpoint_list(p);
  detail::check_tree_shape(p.m, endpoints);
  tree_topology topo(p.m, std::move(endpoints));
  std::vector<index> leaves;
  for (index v = 0; v < p.m; ++v)
    if (topo.degree(v) == 1) leaves.push_back(v);
  if (leaves != p.gamma) {
    std::string detail;
    for (index v : p.gamma)
      if (topo.degree(v) != 1) detail += "vertex " + std::to_string(v + 1) + " is internal; ";
    for (index v : leaves)
      if (!std::binary_search(p.gamma.begin(), p.gamma.end(), v))
        detail += "leaf " + std::to_string(v + 1) + " is unconstrained; ";
    throw mot_error(error_kind::gamma_not_leaves, detail);
  }
  return tree_problem(std::move(p), std::move(topo));
}

/// A validated connected graph problem; cycles are allowed and Γ is any
/// non-empty vertex subset.
class general_problem {
public:
  const problem_data& data() const { return data_; }
  index m() const { return data_.m; }
  index support(index v) const { return data_.support_sizes[v]; }
  index max_support() const { return *std::max_element(data_.support_sizes.begin(), data_.support_sizes.end()); }
  const std::vector<index>& gamma() const { return data_.gamma; }
  bool in_gamma(index v) const { return std::binary_search(data_.gamma.begin(), data_.gamma.end(), v); }
  const vector& marginal(index k) const { return data_.marginals[k]; }
  const std::vector<cost_matrix>& edges() const { return data_.edges; }

private:
  friend general_problem validate_general_problem(problem_data p);
  explicit general_problem(problem_data p) : data_(std::move(p)) {}

  problem_data data_;
};

inline general_problem validate_general_problem(problem_data p)
{
  detail::check_common(p);
  if (!detail::is_connected(p.m, detail::endpoint_list(p)))
    throw mot_error(error_kind::disconnected, "graph is not connected");
  return general_problem(std::move(p));
}

/// Star problem for the uniform-weight fixed-support barycenter: leaves
/// 0..L-1 carry the input marginals, vertex L is the free center and every
/// spoke costs ground_cost / L (rows index the center).
inline tree_problem build_barycenter_problem(const std::vector<vector>& marginals, const matrix& ground_cost)
{
  const index L = marginals.size();
  if (L == 0) throw mot_error(error_kind::shape_mismatch, "barycenter needs at least one marginal");
  const index n = ground_cost.rows();
  if (ground_cost.cols() != n)
    throw mot_error(error_kind::shape_mismatch, "ground cost must be square");
  for (const auto& mu : marginals)
    if (mu.size() != n)
      throw mot_error(error_kind::shape_mismatch, "marginal length differs from the ground cost size");

  problem_data p;
  if (L == 1) {
    // a free leaf is not allowed, so the center is pinned to the single input:
    // plain two-marginal transport of mu_1 onto itself
    p.m = 2;
    p.support_sizes = {n, n};
    p.edges.push_back({1, 0, ground_cost});
    p.gamma = {0, 1};
    p.marginals = {marginals[0], marginals[0]};
    return validate_tree_problem(std::move(p));
  }
  p.m = L + 1;
  p.support_sizes.assign(L + 1, n);
  matrix spoke(n, n);
  for (index i = 0; i < n; ++i)
    for (index j = 0; j < n; ++j)
      spoke(i, j) = ground_cost(i, j) / static_cast<double>(L);
  for (index l = 0; l < L; ++l) p.edges.push_back({L, l, spoke});
  p.gamma.resize(L);
  std::iota(p.gamma.begin(), p.gamma.end(), index{0});
  p.marginals = marginals;
  p.marginals.emplace_back();
  return validate_tree_problem(std::move(p));
}

struct problem_constants {
  std::map<index, double> rc_per_leaf;
  double rc_gamma = 0.0;
  index diameter = 0;
  double avg_leaf_distance = 0.0;
  double c_inf = 0.0;
};

/// Largest value of the assembled cost tensor, by max-plus dynamic
/// programming over the tree rooted at vertex 0.
inline double structural_cost_max(const tree_problem& p)
{
  const auto& topo = p.topology();
  std::vector<vector> best(p.m());
  for (index v = 0; v < p.m(); ++v) best[v].assign(p.support(v), 0.0);
  const auto& order = topo.bfs_order();
  for (index i = order.size(); i-- > 1;) {
    const index child = order[i];
    const index parent = topo.parent(child);
    const index e = topo.directed(child, parent) / 2;
    const matrix c = p.oriented_cost(e, parent);
    for (index xp = 0; xp < p.support(parent); ++xp) {
      double mx = neg_inf;
      for (index xc = 0; xc < p.support(child); ++xc) mx = std::max(mx, c(xp, xc) + best[child][xc]);
      best[parent][xp] += mx;
    }
  }
  return *std::max_element(best[order[0]].begin(), best[order[0]].end());
}

inline problem_constants compute_constants(const tree_problem& p)
{
  problem_constants out;
  for (index k : p.gamma()) {
    const double r = p.edges()[p.leaf_edge(k)].entries.max_abs();
    out.rc_per_leaf[k] = r;
    out.rc_gamma = std::max(out.rc_gamma, r);
  }
  out.diameter = p.topology().diameter();
  const auto& g = p.gamma();
  double total = 0.0;
  index pairs = 0;
  for (index i = 0; i < g.size(); ++i)
    for (index j = i + 1; j < g.size(); ++j) {
      total += static_cast<double>(p.topology().distance(g[i], g[j]));
      ++pairs;
    }
  out.avg_leaf_distance = pairs ? total / static_cast<double>(pairs) : 0.0;
  out.c_inf = structural_cost_max(p);
  return out;
}

/// Σ_e <C_e, B_e> over the edge list.
inline double cost_of_plan(const problem_data& p, const edge_plan_set& plans)
{
  if (plans.plans.size() != p.edges.size())
    throw mot_error(error_kind::shape_mismatch, "one plan per edge required");
  double total = 0.0;
  for (index e = 0; e < p.edges.size(); ++e) {
    const auto& c = p.edges[e].entries;
    const auto& b = plans.plans[e];
    if (b.rows() != c.rows() || b.cols() != c.cols())
      throw mot_error(error_kind::shape_mismatch, "plan shape differs from cost shape on edge " + std::to_string(e));
    for (index i = 0; i < c.size(); ++i) total += c.flat()[i] * b.flat()[i];
  }
  return total;
}

inline double cost_of_plan(const tree_problem& p, const edge_plan_set& plans) { return cost_of_plan(p.data(), plans); }

/// Marginal of an edge plan at one of its endpoints.
inline vector plan_marginal(const problem_data& p, const edge_plan_set& plans, index e, index v)
{
  const auto& edge = p.edges[e];
  return edge.tail == v ? plans.plans[e].row_sums() : plans.plans[e].col_sums();
}

/// Largest disagreement between the vertex marginals implied by any two plans
/// sharing that vertex.
inline double consistency_gap(const tree_problem& p, const edge_plan_set& plans)
{
  double gap = 0.0;
  for (index v = 0; v < p.m(); ++v) {
    const auto& nbs = p.topology().neighbors(v);
    if (nbs.size() < 2) continue;
    const vector ref = plan_marginal(p.data(), plans, nbs[0].edge, v);
    for (index i = 1; i < nbs.size(); ++i) {
      const vector other = plan_marginal(p.data(), plans, nbs[i].edge, v);
      for (index x = 0; x < ref.size(); ++x) gap = std::max(gap, std::abs(ref[x] - other[x]));
    }
  }
  return gap;
}

/// |Γ|·R_C^Γ <= c·||C||_inf. Diagnostic only; relative slack of 1e-12 absorbs
/// the rounding in R_C^Γ = ||C||/L style constants.
inline bool is_balanced(const tree_problem& p, double c)
{
  const auto k = compute_constants(p);
  const double lhs = static_cast<double>(p.gamma().size()) * k.rc_gamma;
  const double rhs = c * k.c_inf;
  return lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs));
}

} // namespace motgraph
