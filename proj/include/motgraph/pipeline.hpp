#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "core.hpp"
#include "problem.hpp"
#include "rounding.hpp"
#include "sinkhorn.hpp"
#include "tree_bp.hpp"

namespace motgraph {

struct solve_options {
  index max_iters = 0;            // 0: ten times the delta = 0.01 iteration bound
  index error_refresh_period = 0; // 0: |Γ|
  bool record_wall_time = false;
};

/// A feasible plan with the parameters and diagnostics that produced it.
struct approx_result {
  edge_plan_set plans;       // one plan per problem edge, exact Γ-marginals
  double cost = 0.0;
  double eta = 0.0;
  double eps_prime = 0.0;
  transcript log;
  rounding_report report;
  std::map<index, double> rc_per_leaf;
  double rc_gamma = 0.0;
  index m = 0;
  index n_max = 0;
  std::vector<vector> cluster_marginals; // junction-tree runs only, row-major over each cluster's vertices
};

/// eta = eps / (2 m ln n) with n = max(n_max, 2).
inline double regularization_for(double eps, index m, index n_max)
{
  return eps / (2.0 * static_cast<double>(m) * std::log(static_cast<double>(std::max<index>(n_max, 2))));
}

/// A-posteriori bound m eta ln(n) + 4 Σ_k R_k ||mu_k - P_k(B~)||_1 on cost - OPT.
inline double certificate(const approx_result& r)
{
  double s = 0.0;
  for (const auto& [k, l1] : r.report.per_leaf_l1) s += r.rc_per_leaf.at(k) * l1;
  return static_cast<double>(r.m) * r.eta * std::log(static_cast<double>(std::max<index>(r.n_max, 2))) + 4.0 * s;
}

namespace detail {

/// Exact optimum when every leaf edge is free: internal vertices sit at a
/// min-sum configuration and each leaf keeps its own marginal.
inline edge_plan_set zero_leaf_cost_plan(const tree_problem& p)
{
  const auto& topo = p.topology();
  const auto& order = topo.bfs_order();
  std::vector<vector> best(p.m());
  std::vector<std::vector<index>> choice(p.m()); // argmin child state per parent state
  for (index v = 0; v < p.m(); ++v) best[v].assign(p.support(v), 0.0);
  for (index i = order.size(); i-- > 1;) {
    const index child = order[i], parent = topo.parent(child);
    const matrix c = p.oriented_cost(topo.directed(child, parent) / 2, parent);
    choice[child].assign(p.support(parent), 0);
    for (index xp = 0; xp < p.support(parent); ++xp) {
      double mn = std::numeric_limits<double>::infinity();
      for (index xc = 0; xc < p.support(child); ++xc) {
        const double v = c(xp, xc) + best[child][xc];
        if (v < mn) {
          mn = v;
          choice[child][xp] = xc;
        }
      }
      best[parent][xp] += mn;
    }
  }
  std::vector<index> state(p.m(), 0);
  const auto& root_best = best[order[0]];
  state[order[0]] = static_cast<index>(std::min_element(root_best.begin(), root_best.end()) - root_best.begin());
  for (index i = 1; i < order.size(); ++i) state[order[i]] = choice[order[i]][state[topo.parent(order[i])]];

  auto point_or_marginal = [&](index v) {
    if (p.in_gamma(v)) return p.marginal(v);
    vector w(p.support(v), 0.0);
    w[state[v]] = 1.0;
    return w;
  };
  edge_plan_set out;
  for (const auto& e : p.edges()) {
    const vector a = point_or_marginal(e.tail), b = point_or_marginal(e.head);
    matrix plan(a.size(), b.size());
    for (index i = 0; i < a.size(); ++i)
      for (index j = 0; j < b.size(); ++j) plan(i, j) = a[i] * b[j];
    out.plans.push_back(std::move(plan));
  }
  return out;
}

} // namespace detail

/// Entropic Sinkhorn with belief propagation, pairwise plan extraction and
/// rounding, tuned so that cost <= OPT + eps once the loop converges.
inline approx_result solve_mot_eps(const tree_problem& problem, double eps, const update_rule& rule,
                                   const solve_options& opts = {})
{
  if (!(eps > 0.0)) throw mot_error(error_kind::invalid_argument, "eps must be positive");
  const auto constants = compute_constants(problem);

  approx_result out;
  out.m = problem.m();
  out.n_max = problem.max_support();
  out.rc_per_leaf = constants.rc_per_leaf;
  out.rc_gamma = constants.rc_gamma;
  out.eta = regularization_for(eps, out.m, out.n_max);
  out.log.rule = rule;

  if (constants.rc_gamma == 0.0) {
    out.eps_prime = std::numeric_limits<double>::infinity();
    out.plans = detail::zero_leaf_cost_plan(problem);
    out.cost = cost_of_plan(problem, out.plans);
    for (index k : problem.gamma()) out.report.per_leaf_l1[k] = 0.0;
    out.report.cost_before = out.report.cost_after = out.cost;
    return out;
  }
  out.eps_prime = eps / (8.0 * constants.rc_gamma);

  tree_bp engine(problem, out.eta);
  solver_config cfg;
  cfg.eps_prime = out.eps_prime;
  cfg.max_iters = opts.max_iters ? opts.max_iters
                                 : default_max_iters(problem.gamma().size(), constants.rc_gamma, out.eta, out.eps_prime);
  cfg.error_refresh_period = opts.error_refresh_period;
  cfg.record_wall_time = opts.record_wall_time;
  out.log = run(engine, rule, cfg).log;

  engine.refresh_all();
  edge_plan_set plans = engine.pairwise_projections();
  // unit mass holds after the first update; this only matters when tau = 0
  const double mass = engine.total_mass();
  for (auto& b : plans.plans)
    for (double& x : b.flat()) x /= mass;

  auto [rounded, report] = round_tree(plans, problem);
  out.plans = std::move(rounded);
  out.report = std::move(report);
  out.cost = out.report.cost_after;
  return out;
}

} // namespace motgraph
