#pragma once

#include <string>
#include <vector>

#include "core.hpp"
#include "problem.hpp"
#include "tree_topology.hpp"

namespace motgraph {

/// Kernel K = exp(-C / eta), kept in log form.
inline matrix log_kernel(const matrix& cost, double eta)
{
  if (!(eta > 0.0)) throw mot_error(error_kind::invalid_argument, "eta must be positive");
  matrix out(cost.rows(), cost.cols());
  for (index i = 0; i < cost.size(); ++i) out.flat()[i] = -cost.flat()[i] / eta;
  return out;
}

/// Dual variables: log u_k = lambda_k / eta for k in Γ (empty elsewhere).
struct dual_state {
  double eta = 1.0;
  std::vector<vector> log_u;
  std::vector<index> updates; // per-vertex count of Sinkhorn updates applied
};

/// Cached log-messages, one per directed edge, with staleness flags.
/// A dirty message always has dirty dependents.
struct message_table {
  std::vector<vector> log_messages;
  std::vector<bool> dirty;
};

/// Log-domain belief propagation over a validated tree problem. Owns one
/// (dual_state, message_table) pair; not safe for concurrent mutation.
class tree_bp {
public:
  tree_bp(const tree_problem& problem, double eta)
  : problem_(&problem)
  {
    const auto& topo = problem.topology();
    state_.eta = eta;
    state_.log_u.resize(problem.m());
    state_.updates.assign(problem.m(), 0);
    log_mu_.resize(problem.m());
    for (index k : problem.gamma()) {
      state_.log_u[k].assign(problem.support(k), 0.0);
      log_mu_[k] = log_of(problem.marginal(k));
    }
    table_.log_messages.resize(topo.directed_count());
    table_.dirty.assign(topo.directed_count(), true);
    directed_log_kernel_.resize(topo.directed_count());
    for (index d = 0; d < topo.directed_count(); ++d) {
      table_.log_messages[d].assign(problem.support(topo.target(d)), 0.0);
      // rows index the receiving vertex
      directed_log_kernel_[d] = log_kernel(problem.oriented_cost(d / 2, topo.target(d)), eta);
    }
  }

  const tree_problem& problem() const { return *problem_; }
  const tree_topology& topology() const { return problem_->topology(); }
  const dual_state& state() const { return state_; }
  const message_table& table() const { return table_; }
  double eta() const { return state_.eta; }
  const std::vector<index>& gamma() const { return problem_->gamma(); }
  index support(index v) const { return problem_->support(v); }
  const vector& marginal(index k) const { return problem_->marginal(k); }
  const vector& log_u(index k) const { return state_.log_u[k]; }
  index messages_updated() const { return messages_updated_; }

  bool is_dirty(index from, index to) const { return table_.dirty[topology().directed(from, to)]; }

  const vector& log_message(index from, index to) const
  {
    const index d = topology().directed(from, to);
    require_clean(d);
    return table_.log_messages[d];
  }

  /// Replaces log u_k and invalidates every message that depends on it.
  void set_log_u(index k, vector log_u)
  {
    if (!problem_->in_gamma(k)) throw mot_error(error_kind::invalid_argument, "vertex is not constrained");
    if (log_u.size() != support(k)) throw mot_error(error_kind::shape_mismatch, "log_u length");
    state_.log_u[k] = std::move(log_u);
    ++state_.updates[k];
    mark_dirty(topology().directed(k, problem_->leaf_neighbor(k)));
  }

  /// Recomputes the message from -> to from its upstream messages (or, for
  /// a leaf source, from u and mu).
  void update_message(index from, index to)
  {
    const auto& topo = topology();
    const index d = topo.directed(from, to);
    const index n_from = support(from);

    vector incoming(n_from, 0.0);
    if (problem_->in_gamma(from)) {
      for (index x = 0; x < n_from; ++x) incoming[x] = state_.log_u[from][x] + log_mu_[from][x];
    } else {
      for (const auto& nb : topo.neighbors(from)) {
        if (nb.node == to) continue;
        require_clean(nb.in);
        const auto& msg = table_.log_messages[nb.in];
        for (index x = 0; x < n_from; ++x) incoming[x] += msg[x];
      }
    }

    const matrix& lk = directed_log_kernel_[d];
    vector& out = table_.log_messages[d];
    vector terms(n_from);
    for (index xt = 0; xt < lk.rows(); ++xt) {
      for (index xf = 0; xf < n_from; ++xf) terms[xf] = lk(xt, xf) + incoming[xf];
      out[xt] = log_sum_exp(terms);
    }
    table_.dirty[d] = false;
    ++messages_updated_;
    for (const auto& nb : topo.neighbors(to))
      if (nb.node != from) mark_dirty(nb.out);
  }

  /// Recomputes the messages along the path from -> to, in order. Returns
  /// the number of messages recomputed.
  index refresh_path(index from, index to)
  {
    const auto path = topology().path(from, to);
    for (index i = 0; i + 1 < path.size(); ++i) update_message(path[i], path[i + 1]);
    return path.size() - 1;
  }

  /// Recomputes every dirty message. Returns the number recomputed.
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

  /// Log of the incoming message at leaf k.
  const vector& leaf_log_message(index k) const { return log_message(problem_->leaf_neighbor(k), k); }

  /// P_k(B(Λ)) = u_k ⊙ mu_k ⊙ m_{l_k -> k} for a leaf.
  vector leaf_projection(index k) const
  {
    if (!problem_->in_gamma(k)) throw mot_error(error_kind::invalid_argument, "leaf_projection on an internal vertex");
    const vector& msg = leaf_log_message(k);
    vector out(support(k));
    for (index x = 0; x < out.size(); ++x) out[x] = std::exp(state_.log_u[k][x] + log_mu_[k][x] + msg[x]);
    return out;
  }

  /// P_k(B(Λ)) = product of incoming messages for an internal vertex.
  vector internal_projection(index k) const
  {
    if (problem_->in_gamma(k)) throw mot_error(error_kind::invalid_argument, "internal_projection on a leaf");
    vector acc(support(k), 0.0);
    for (const auto& nb : topology().neighbors(k)) {
      require_clean(nb.in);
      const auto& msg = table_.log_messages[nb.in];
      for (index x = 0; x < acc.size(); ++x) acc[x] += msg[x];
    }
    return exp_of(acc);
  }

  vector projection(index v) const { return problem_->in_gamma(v) ? leaf_projection(v) : internal_projection(v); }

  /// P_{tail,head}(B(Λ)) on edge e, rows indexed by the edge's tail.
  matrix pairwise_projection(index e) const
  {
    const auto& edge = problem_->edges()[e];
    const vector a = side_aggregate(edge.tail, edge.head);
    const vector b = side_aggregate(edge.head, edge.tail);
    const matrix& lk = directed_log_kernel_[topology().directed(edge.head, edge.tail)];
    matrix out(a.size(), b.size());
    for (index i = 0; i < a.size(); ++i)
      for (index j = 0; j < b.size(); ++j) out(i, j) = std::exp(lk(i, j) + a[i] + b[j]);
    return out;
  }

  edge_plan_set pairwise_projections() const
  {
    edge_plan_set out;
    for (index e = 0; e < problem_->edges().size(); ++e) out.plans.push_back(pairwise_projection(e));
    return out;
  }

  /// P(B(Λ)), read off the first leaf whose incoming message is current.
  double total_mass() const
  {
    for (index k : gamma())
      if (!table_.dirty[topology().directed(problem_->leaf_neighbor(k), k)]) return sum_of(leaf_projection(k));
    throw mot_error(error_kind::stale_dependency, "no leaf has a current incoming message");
  }

  /// psi(Λ) = eta P(B(Λ)) - Σ_k mu_k^T lambda_k.
  double dual_objective() const { return eta() * total_mass() - linear_term(); }

  /// Σ_k mu_k^T lambda_k with lambda_k = eta log u_k.
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

  /// ∇_{lambda_k} psi = P_k(B(Λ)) - mu_k.
  vector dual_gradient(index k) const
  {
    vector g = leaf_projection(k);
    const auto& mu = marginal(k);
    for (index x = 0; x < g.size(); ++x) g[x] -= mu[x];
    return g;
  }

private:
  void require_clean(index d) const
  {
    if (table_.dirty[d]) {
      const auto& topo = topology();
      throw mot_error(error_kind::stale_dependency, "message " + std::to_string(topo.source(d) + 1) + "->" +
                                                    std::to_string(topo.target(d) + 1) + " is stale");
    }
  }

  void mark_dirty(index d) { topology().invalidate(table_.dirty, d); }

  /// Log of everything reaching v except through `other` (times u mu at a leaf).
  vector side_aggregate(index v, index other) const
  {
    vector acc(support(v), 0.0);
    if (problem_->in_gamma(v)) {
      for (index x = 0; x < acc.size(); ++x) acc[x] = state_.log_u[v][x] + log_mu_[v][x];
      return acc;
    }
    for (const auto& nb : topology().neighbors(v)) {
      if (nb.node == other) continue;
      require_clean(nb.in);
      const auto& msg = table_.log_messages[nb.in];
      for (index x = 0; x < acc.size(); ++x) acc[x] += msg[x];
    }
    return acc;
  }

  const tree_problem* problem_;
  dual_state state_;
  message_table table_;
  std::vector<vector> log_mu_;
  std::vector<matrix> directed_log_kernel_;
  index messages_updated_ = 0;
};

} // namespace motgraph
