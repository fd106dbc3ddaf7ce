#pragma once

// Sinkhorn on graphs with cycles: decompose into a cluster tree, pass
// messages between clusters, round at the clusters holding constrained vertices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "pipeline.hpp"
#include "problem.hpp"
#include "rounding.hpp"
#include "sinkhorn.hpp"
#include "tree_bp.hpp"
#include "tree_topology.hpp"

namespace motgraph {

/// Clusters of vertices joined into a tree. `edge_cluster[e]` names the
/// cluster holding the cost of graph edge e; leave it empty to assign each
/// edge to the smallest-index cluster containing both endpoints.
struct junction_tree {
  std::vector<std::vector<index>> clusters;
  std::vector<std::pair<index, index>> tree_edges;
  std::vector<index> edge_cluster;

  index width() const
  {
    index w = 0;
    for (const auto& c : clusters) w = std::max(w, c.size());
    return w == 0 ? 0 : w - 1;
  }
};

namespace detail {

inline bool cluster_has(const std::vector<index>& c, index v) { return std::binary_search(c.begin(), c.end(), v); }

inline std::vector<index> intersect(const std::vector<index>& a, const std::vector<index>& b)
{
  std::vector<index> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

} // namespace detail

/// Min-fill elimination (ties: fewer neighbours, then smaller index), maximal
/// elimination cliques joined by a maximum-weight spanning tree on separator
/// sizes, then one singleton leaf cluster per constrained vertex hung off the
/// first cluster that contains it.
inline junction_tree min_fill_decomposition(const general_problem& g)
{
  const index m = g.m();
  std::vector<std::vector<char>> adj(m, std::vector<char>(m, 0));
  for (const auto& e : g.edges()) adj[e.tail][e.head] = adj[e.head][e.tail] = 1;

  std::vector<bool> gone(m, false);
  std::vector<std::vector<index>> cliques;
  for (index step = 0; step < m; ++step) {
    index best = m, best_fill = 0, best_deg = 0;
    for (index v = 0; v < m; ++v) {
      if (gone[v]) continue;
      std::vector<index> nb;
      for (index u = 0; u < m; ++u)
        if (!gone[u] && adj[v][u]) nb.push_back(u);
      index fill = 0;
      for (index i = 0; i < nb.size(); ++i)
        for (index j = i + 1; j < nb.size(); ++j)
          if (!adj[nb[i]][nb[j]]) ++fill;
      if (best == m || fill < best_fill || (fill == best_fill && nb.size() < best_deg)) {
        best = v;
        best_fill = fill;
        best_deg = nb.size();
      }
    }
    std::vector<index> clique{best};
    for (index u = 0; u < m; ++u)
      if (!gone[u] && adj[best][u]) clique.push_back(u);
    for (index i = 1; i < clique.size(); ++i)
      for (index j = i + 1; j < clique.size(); ++j) adj[clique[i]][clique[j]] = adj[clique[j]][clique[i]] = 1;
    gone[best] = true;
    std::sort(clique.begin(), clique.end());
    cliques.push_back(std::move(clique));
  }

  junction_tree jt;
  for (index i = 0; i < cliques.size(); ++i) {
    bool maximal = true;
    for (index j = 0; j < cliques.size() && maximal; ++j) {
      if (i == j) continue;
      const bool subset = std::includes(cliques[j].begin(), cliques[j].end(), cliques[i].begin(), cliques[i].end());
      if (subset && (cliques[i].size() < cliques[j].size() || j < i)) maximal = false;
    }
    if (maximal) jt.clusters.push_back(cliques[i]);
  }

  // Kruskal, heaviest separators first, ties by cluster index
  struct candidate {
    index weight, a, b;
  };
  std::vector<candidate> cands;
  for (index a = 0; a < jt.clusters.size(); ++a)
    for (index b = a + 1; b < jt.clusters.size(); ++b)
      cands.push_back({detail::intersect(jt.clusters[a], jt.clusters[b]).size(), a, b});
  std::stable_sort(cands.begin(), cands.end(), [](const candidate& x, const candidate& y) { return x.weight > y.weight; });
  std::vector<index> root(jt.clusters.size());
  std::iota(root.begin(), root.end(), index{0});
  auto find = [&](index x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (const auto& c : cands) {
    const index ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    root[ra] = rb;
    jt.tree_edges.emplace_back(c.a, c.b);
  }

  for (index k : g.gamma()) {
    index host = 0;
    while (!detail::cluster_has(jt.clusters[host], k)) ++host;
    jt.tree_edges.emplace_back(host, jt.clusters.size());
    jt.clusters.push_back({k});
  }
  return jt;
}

/// A junction tree checked against its graph. Immutable after validation.
class cluster_tree {
public:
  const junction_tree& tree() const { return jt_; }
  const tree_topology& topology() const { return topology_; }
  index cluster_count() const { return jt_.clusters.size(); }
  const std::vector<index>& cluster(index c) const { return jt_.clusters[c]; }
  index width() const { return jt_.width(); }
  index edge_cluster(index e) const { return jt_.edge_cluster[e]; }
  /// Singleton leaf cluster {k} of a constrained vertex, and its one neighbour.
  index leaf_cluster(index k) const { return leaf_[k]; }
  index attach_cluster(index k) const { return topology_.neighbors(leaf_[k]).front().node; }
  /// The constrained vertex whose singleton leaf this cluster is, or npos.
  index leaf_vertex(index c) const { return leaf_vertex_[c]; }

  static constexpr index npos = std::numeric_limits<index>::max();

private:
  friend cluster_tree validate_junction_tree(junction_tree jt, const general_problem& g);
  cluster_tree(junction_tree jt, tree_topology topo, std::vector<index> leaf, std::vector<index> leaf_vertex)
  : jt_(std::move(jt)), topology_(std::move(topo)), leaf_(std::move(leaf)), leaf_vertex_(std::move(leaf_vertex)) {}

  junction_tree jt_;
  tree_topology topology_;
  std::vector<index> leaf_;
  std::vector<index> leaf_vertex_;
};

/// Checks cost coverage, family preservation, running intersection and the
/// singleton leaves of Γ, in that order; fills in a missing edge assignment.
inline cluster_tree validate_junction_tree(junction_tree jt, const general_problem& g)
{
  const index nc = jt.clusters.size();
  if (nc == 0) throw mot_error(error_kind::invalid_argument, "junction tree has no clusters");
  for (const auto& c : jt.clusters) {
    if (c.empty()) throw mot_error(error_kind::invalid_argument, "empty cluster");
    if (!std::is_sorted(c.begin(), c.end()) || std::adjacent_find(c.begin(), c.end()) != c.end() || c.back() >= g.m())
      throw mot_error(error_kind::invalid_argument, "cluster vertices must be sorted, unique and in range");
  }
  for (auto [a, b] : jt.tree_edges)
    if (a >= nc || b >= nc || a == b) throw mot_error(error_kind::invalid_argument, "tree edge names an unknown cluster");
  detail::check_tree_shape(nc, jt.tree_edges);
  tree_topology topo(nc, jt.tree_edges);

  const auto& edges = g.edges();
  for (index e = 0; e < edges.size(); ++e) {
    bool covered = false;
    for (const auto& c : jt.clusters)
      covered = covered || (detail::cluster_has(c, edges[e].tail) && detail::cluster_has(c, edges[e].head));
    if (!covered)
      throw mot_error(error_kind::cost_not_covered, "no cluster contains edge " + std::to_string(edges[e].tail + 1) +
                                                    "-" + std::to_string(edges[e].head + 1));
  }
  for (index v = 0; v < g.m(); ++v) {
    bool seen = false;
    for (const auto& c : jt.clusters) seen = seen || detail::cluster_has(c, v);
    if (!seen) throw mot_error(error_kind::cost_not_covered, "vertex " + std::to_string(v + 1) + " is in no cluster");
  }

  if (jt.edge_cluster.empty()) {
    for (const auto& e : edges) {
      index c = 0;
      while (!(detail::cluster_has(jt.clusters[c], e.tail) && detail::cluster_has(jt.clusters[c], e.head))) ++c;
      jt.edge_cluster.push_back(c);
    }
  } else {
    if (jt.edge_cluster.size() != edges.size())
      throw mot_error(error_kind::family_preservation_violated, "edge assignment does not list every graph edge");
    for (index e = 0; e < edges.size(); ++e) {
      const index c = jt.edge_cluster[e];
      if (c >= nc || !detail::cluster_has(jt.clusters[c], edges[e].tail) ||
          !detail::cluster_has(jt.clusters[c], edges[e].head))
        throw mot_error(error_kind::family_preservation_violated,
                        "edge " + std::to_string(edges[e].tail + 1) + "-" + std::to_string(edges[e].head + 1) +
                        " is assigned to a cluster missing an endpoint");
    }
  }

  // the clusters holding v must span a connected subtree
  for (index v = 0; v < g.m(); ++v) {
    index holding = 0, links = 0;
    for (const auto& c : jt.clusters) holding += detail::cluster_has(c, v);
    for (auto [a, b] : jt.tree_edges)
      links += detail::cluster_has(jt.clusters[a], v) && detail::cluster_has(jt.clusters[b], v);
    if (links + 1 != holding)
      throw mot_error(error_kind::running_intersection_violated,
                      "clusters containing vertex " + std::to_string(v + 1) + " are not connected in the tree");
  }

  std::vector<index> leaf(g.m(), cluster_tree::npos);
  std::vector<index> leaf_vertex(nc, cluster_tree::npos);
  for (index k : g.gamma()) {
    for (index c = 0; c < nc && leaf[k] == cluster_tree::npos; ++c)
      if (jt.clusters[c].size() == 1 && jt.clusters[c][0] == k && topo.degree(c) == 1 && leaf_vertex[c] == cluster_tree::npos)
        leaf[k] = c;
    if (leaf[k] == cluster_tree::npos)
      throw mot_error(error_kind::leaf_not_singleton,
                      "constrained vertex " + std::to_string(k + 1) + " has no singleton leaf cluster");
    leaf_vertex[leaf[k]] = k;
  }
  return cluster_tree(std::move(jt), std::move(topo), std::move(leaf), std::move(leaf_vertex));
}

/// Σ of the costs of the graph edges assigned to cluster c, as a row-major
/// tensor over the cluster's vertices (ascending).
inline vector cluster_cost(const general_problem& g, const cluster_tree& ct, index c)
{
  const auto& vars = ct.cluster(c);
  std::vector<index> shape;
  for (index v : vars) shape.push_back(g.support(v));
  index total = 1;
  for (index n : shape) total *= n;
  vector out(total, 0.0);
  for (index e = 0; e < g.edges().size(); ++e) {
    if (ct.edge_cluster(e) != c) continue;
    const auto& edge = g.edges()[e];
    const index pt = std::lower_bound(vars.begin(), vars.end(), edge.tail) - vars.begin();
    const index ph = std::lower_bound(vars.begin(), vars.end(), edge.head) - vars.begin();
    for_each_config(shape, [&](index flat, const std::vector<index>& x) { out[flat] += edge.entries(x[pt], x[ph]); });
  }
  return out;
}

namespace detail {

/// For every configuration of `vars`, the flat index of its restriction to `sub`.
inline std::vector<index> restriction_map(const general_problem& g, const std::vector<index>& vars,
                                          const std::vector<index>& sub)
{
  std::vector<index> shape, stride(vars.size(), 0);
  for (index v : vars) shape.push_back(g.support(v));
  index s = 1;
  for (index i = sub.size(); i-- > 0;) {
    const index pos = std::lower_bound(vars.begin(), vars.end(), sub[i]) - vars.begin();
    stride[pos] = s;
    s *= g.support(sub[i]);
  }
  index total = 1;
  for (index n : shape) total *= n;
  std::vector<index> out(total);
  for_each_config(shape, [&](index flat, const std::vector<index>& x) {
    index f = 0;
    for (index i = 0; i < x.size(); ++i) f += x[i] * stride[i];
    out[flat] = f;
  });
  return out;
}

inline index config_count(const general_problem& g, const std::vector<index>& vars)
{
  index total = 1;
  for (index v : vars) total *= g.support(v);
  return total;
}

/// Grouped log-sum-exp: out[map[i]] = log Σ exp(values[i]).
inline vector grouped_lse(const vector& values, const std::vector<index>& map, index groups)
{
  vector mx(groups, neg_inf), out(groups, 0.0);
  for (index i = 0; i < values.size(); ++i) mx[map[i]] = std::max(mx[map[i]], values[i]);
  for (index i = 0; i < values.size(); ++i)
    if (mx[map[i]] != neg_inf) out[map[i]] += std::exp(values[i] - mx[map[i]]);
  for (index s = 0; s < groups; ++s) out[s] = mx[s] == neg_inf ? neg_inf : mx[s] + std::log(out[s]);
  return out;
}

} // namespace detail

/// Log-domain cluster message passing. Same interface as tree_bp for the
/// Sinkhorn loop; single owner, not safe for concurrent mutation.
class cluster_bp {
public:
  cluster_bp(const general_problem& g, const cluster_tree& ct, double eta)
  : problem_(&g), tree_(&ct)
  {
    if (!(eta > 0.0)) throw mot_error(error_kind::invalid_argument, "eta must be positive");
    const auto& topo = ct.topology();
    state_.eta = eta;
    state_.log_u.resize(g.m());
    state_.updates.assign(g.m(), 0);
    log_mu_.resize(g.m());
    for (index k : g.gamma()) {
      state_.log_u[k].assign(g.support(k), 0.0);
      log_mu_[k] = log_of(g.marginal(k));
    }
    log_potential_.resize(ct.cluster_count());
    for (index c = 0; c < ct.cluster_count(); ++c) {
      log_potential_[c] = cluster_cost(g, ct, c);
      for (double& x : log_potential_[c]) x = -x / eta;
    }
    const index nd = topo.directed_count();
    table_.log_messages.resize(nd);
    table_.dirty.assign(nd, true);
    source_map_.resize(nd);
    target_map_.resize(nd);
    for (index d = 0; d < nd; ++d) {
      const auto& a = ct.cluster(topo.source(d));
      const auto& b = ct.cluster(topo.target(d));
      const auto sep = detail::intersect(a, b);
      table_.log_messages[d].assign(detail::config_count(g, sep), 0.0);
      source_map_[d] = detail::restriction_map(g, a, sep);
      target_map_[d] = detail::restriction_map(g, b, sep);
    }
  }

  const general_problem& problem() const { return *problem_; }
  const cluster_tree& clusters() const { return *tree_; }
  const tree_topology& topology() const { return tree_->topology(); }
  const dual_state& state() const { return state_; }
  const message_table& table() const { return table_; }
  double eta() const { return state_.eta; }
  const std::vector<index>& gamma() const { return problem_->gamma(); }
  index support(index v) const { return problem_->support(v); }
  const vector& marginal(index k) const { return problem_->marginal(k); }
  const vector& log_u(index k) const { return state_.log_u[k]; }
  index messages_updated() const { return messages_updated_; }

  void set_log_u(index k, vector log_u)
  {
    if (!problem_->in_gamma(k)) throw mot_error(error_kind::invalid_argument, "vertex is not constrained");
    if (log_u.size() != support(k)) throw mot_error(error_kind::shape_mismatch, "log_u length");
    state_.log_u[k] = std::move(log_u);
    ++state_.updates[k];
    topology().invalidate(table_.dirty, topology().directed(tree_->leaf_cluster(k), tree_->attach_cluster(k)));
  }

  /// Marginalizes the source cluster's potential times its other incoming
  /// messages onto the separator; a singleton leaf of Γ sends u mu.
  void update_message(index from, index to)
  {
    const auto& topo = topology();
    const index d = topo.directed(from, to);
    const index k = tree_->leaf_vertex(from);
    if (k != cluster_tree::npos) {
      for (index x = 0; x < support(k); ++x) table_.log_messages[d][x] = state_.log_u[k][x] + log_mu_[k][x];
    } else {
      vector acc = log_potential_[from];
      for (const auto& nb : topo.neighbors(from)) {
        if (nb.node == to) continue;
        require_clean(nb.in);
        const auto& msg = table_.log_messages[nb.in];
        const auto& map = target_map_[nb.in];
        for (index x = 0; x < acc.size(); ++x) acc[x] += msg[map[x]];
      }
      table_.log_messages[d] = detail::grouped_lse(acc, source_map_[d], table_.log_messages[d].size());
    }
    table_.dirty[d] = false;
    ++messages_updated_;
    for (const auto& nb : topo.neighbors(to))
      if (nb.node != from) topo.invalidate(table_.dirty, nb.out);
  }

  /// Refreshes the cluster path between the singleton leaves of two constrained vertices.
  index refresh_path(index from, index to)
  {
    const auto path = topology().path(tree_->leaf_cluster(from), tree_->leaf_cluster(to));
    for (index i = 0; i + 1 < path.size(); ++i) update_message(path[i], path[i + 1]);
    return path.size() - 1;
  }

  index refresh_all()
  {
    const auto& topo = topology();
    index count = 0;
    for (index d : topo.schedule()) {
      if (!table_.dirty[d]) continue;
      update_message(topo.source(d), topo.target(d));
      ++count;
    }
    return count;
  }

  const vector& leaf_log_message(index k) const
  {
    const index d = topology().directed(tree_->attach_cluster(k), tree_->leaf_cluster(k));
    require_clean(d);
    return table_.log_messages[d];
  }

  vector leaf_projection(index k) const
  {
    const vector& msg = leaf_log_message(k);
    vector out(support(k));
    for (index x = 0; x < out.size(); ++x) out[x] = std::exp(state_.log_u[k][x] + log_mu_[k][x] + msg[x]);
    return out;
  }

  /// Log of the unnormalized cluster marginal P_c(B(Λ)) over the cluster's configurations.
  vector log_belief(index c) const
  {
    vector acc;
    const index k = tree_->leaf_vertex(c);
    if (k != cluster_tree::npos) {
      acc.resize(support(k));
      for (index x = 0; x < acc.size(); ++x) acc[x] = state_.log_u[k][x] + log_mu_[k][x];
    } else {
      acc = log_potential_[c];
    }
    for (const auto& nb : topology().neighbors(c)) {
      require_clean(nb.in);
      const auto& msg = table_.log_messages[nb.in];
      const auto& map = target_map_[nb.in];
      for (index x = 0; x < acc.size(); ++x) acc[x] += msg[map[x]];
    }
    return acc;
  }

  double total_mass() const
  {
    for (index k : gamma())
      if (!table_.dirty[topology().directed(tree_->attach_cluster(k), tree_->leaf_cluster(k))])
        return sum_of(leaf_projection(k));
    throw mot_error(error_kind::stale_dependency, "no leaf has a current incoming message");
  }

  double dual_objective() const { return eta() * total_mass() - linear_term(); }

  double linear_term() const
  {
    double s = 0.0;
    for (index k : gamma()) {
      const auto& mu = marginal(k);
      for (index x = 0; x < mu.size(); ++x)
        if (mu[x] > 0.0) s += mu[x] * state_.log_u[k][x];
    }
    return eta() * s;
  }

  /// Index maps of directed cluster edge d onto its separator.
  const std::vector<index>& source_map(index d) const { return source_map_[d]; }
  const std::vector<index>& target_map(index d) const { return target_map_[d]; }

private:
  void require_clean(index d) const
  {
    if (table_.dirty[d])
      throw mot_error(error_kind::stale_dependency, "cluster message " + std::to_string(topology().source(d)) + "->" +
                                                    std::to_string(topology().target(d)) + " is stale");
  }

  const general_problem* problem_;
  const cluster_tree* tree_;
  dual_state state_;
  message_table table_;
  std::vector<vector> log_mu_;
  std::vector<vector> log_potential_;
  std::vector<std::vector<index>> source_map_;
  std::vector<std::vector<index>> target_map_;
  index messages_updated_ = 0;
};

namespace detail {

/// Pushes a change of cluster `start` through the tree: every other cluster
/// keeps its conditional given the separator towards `start`.
inline void absorb_from(const cluster_bp& engine, index start, std::vector<vector>& belief, std::vector<vector>& log_b)
{
  const auto& topo = engine.topology();
  topo.for_each_away(start, [&](index d) {
    const index from = topo.source(d), to = topo.target(d);
    const auto& smap = engine.source_map(d);
    const auto& tmap = engine.target_map(d);
    const index groups = *std::max_element(smap.begin(), smap.end()) + 1;
    vector sep(groups, 0.0);
    for (index x = 0; x < smap.size(); ++x) sep[smap[x]] += belief[from][x];
    const vector old = grouped_lse(log_b[to], tmap, groups);
    for (index x = 0; x < tmap.size(); ++x) {
      const index s = tmap[x];
      if (sep[s] <= 0.0) {
        log_b[to][x] = neg_inf;
      } else {
        if (old[s] == neg_inf)
          throw mot_error(error_kind::inconsistent, "rounding placed mass on a separator state with no support");
        log_b[to][x] = log_b[to][x] - old[s] + std::log(sep[s]);
      }
      belief[to][x] = std::exp(log_b[to][x]);
    }
  });
}

inline vector cluster_vertex_marginal(const general_problem& g, const cluster_tree& ct, const vector& belief, index c,
                                      index v)
{
  const auto map = restriction_map(g, ct.cluster(c), {v});
  vector out(g.support(v), 0.0);
  for (index x = 0; x < belief.size(); ++x) out[map[x]] += belief[x];
  return out;
}

} // namespace detail

/// Entropic Sinkhorn over a junction tree, then rounding of each constrained
/// vertex inside its host cluster and absorption through the rest of the tree.
/// The plans are the graph-edge marginals of the cluster beliefs.
inline approx_result solve_general_graph(const general_problem& g, const cluster_tree& ct, double eps,
                                         const update_rule& rule, const solve_options& opts = {})
{
  if (!(eps > 0.0)) throw mot_error(error_kind::invalid_argument, "eps must be positive");
  approx_result out;
  out.m = g.m();
  out.n_max = g.max_support();
  out.eta = regularization_for(eps, out.m, out.n_max);
  out.log.rule = rule;
  for (index k : g.gamma()) {
    const vector c = cluster_cost(g, ct, ct.attach_cluster(k));
    const double r = c.empty() ? 0.0 : *std::max_element(c.begin(), c.end());
    out.rc_per_leaf[k] = r;
    out.rc_gamma = std::max(out.rc_gamma, r);
  }
  // with free leaf clusters the entropic plan at Λ = 0 already carries the guarantee
  out.eps_prime = out.rc_gamma > 0.0 ? eps / (8.0 * out.rc_gamma) : std::numeric_limits<double>::infinity();

  cluster_bp engine(g, ct, out.eta);
  solver_config cfg;
  cfg.eps_prime = out.eps_prime;
  cfg.max_iters = opts.max_iters ? opts.max_iters
                                 : (out.rc_gamma > 0.0 ? default_max_iters(g.gamma().size(), out.rc_gamma, out.eta,
                                                                           out.eps_prime)
                                                       : 1);
  cfg.error_refresh_period = opts.error_refresh_period;
  cfg.record_wall_time = opts.record_wall_time;
  out.log = run(engine, rule, cfg).log;
  engine.refresh_all();

  const index nc = ct.cluster_count();
  const double log_mass = std::log(engine.total_mass());
  std::vector<vector> log_b(nc), belief(nc), cost(nc);
  for (index c = 0; c < nc; ++c) {
    log_b[c] = engine.log_belief(c);
    for (double& x : log_b[c]) x -= log_mass;
    belief[c] = exp_of(log_b[c]);
    cost[c] = cluster_cost(g, ct, c);
  }
  auto total_cost = [&] {
    double s = 0.0;
    for (index c = 0; c < nc; ++c)
      for (index x = 0; x < cost[c].size(); ++x) s += cost[c][x] * belief[c][x];
    return s;
  };

  out.report.cost_before = total_cost();
  for (index k : g.gamma())
    out.report.per_leaf_l1[k] = l1_distance(g.marginal(k), belief[ct.leaf_cluster(k)]);

  // a vertex shared by several big clusters can be disturbed by a later
  // absorption, so sweep until every constrained marginal is exact
  for (index sweep = 0; sweep < 20; ++sweep) {
    double worst = 0.0;
    for (index k : g.gamma())
      worst = std::max(worst, l1_distance(g.marginal(k), detail::cluster_vertex_marginal(
                                                           g, ct, belief[ct.attach_cluster(k)], ct.attach_cluster(k), k)));
    if (sweep > 0 && worst <= 1e-13) break;
    for (index k : g.gamma()) {
      const index a = ct.attach_cluster(k);
      const auto& vars = ct.cluster(a);
      std::vector<index> rest;
      for (index v : vars)
        if (v != k) rest.push_back(v);
      const auto row_of = detail::restriction_map(g, vars, rest);
      const auto col_of = detail::restriction_map(g, vars, {k});
      matrix b(detail::config_count(g, rest), g.support(k));
      for (index x = 0; x < belief[a].size(); ++x) b(row_of[x], col_of[x]) = belief[a][x];
      const matrix r = round_bimarginal(b, b.row_sums(), g.marginal(k));
      for (index x = 0; x < belief[a].size(); ++x) {
        belief[a][x] = r(row_of[x], col_of[x]);
        log_b[a][x] = safe_log(belief[a][x]);
      }
      detail::absorb_from(engine, a, belief, log_b);
    }
  }

  out.report.cost_after = total_cost();
  out.cost = out.report.cost_after;
  for (index e = 0; e < g.edges().size(); ++e) {
    const auto& edge = g.edges()[e];
    const index c = ct.edge_cluster(e);
    const auto rows = detail::restriction_map(g, ct.cluster(c), {edge.tail});
    const auto cols = detail::restriction_map(g, ct.cluster(c), {edge.head});
    matrix plan(g.support(edge.tail), g.support(edge.head));
    for (index x = 0; x < belief[c].size(); ++x) plan(rows[x], cols[x]) += belief[c][x];
    out.plans.plans.push_back(std::move(plan));
  }
  out.cluster_marginals = std::move(belief);
  return out;
}

/// Convenience overload: min-fill decomposition, then solve.
inline approx_result solve_general_graph(const general_problem& g, double eps, const update_rule& rule,
                                         const solve_options& opts = {})
{
  const cluster_tree ct = validate_junction_tree(min_fill_decomposition(g), g);
  return solve_general_graph(g, ct, eps, rule, opts);
}

} // namespace motgraph
