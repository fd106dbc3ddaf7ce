#pragma once

#include <map>
#include <utility>

#include "core.hpp"
#include "problem.hpp"

namespace motgraph {

/// Projects a nonnegative matrix onto the transport polytope with row sums r
/// and column sums c: shrink rows that exceed r, shrink columns that exceed
/// c, then add the outer product of the residuals.
///
/// Output is nonnegative with exact marginals whenever sum(r) = sum(c), and
/// ||out - B||_1 <= 2 (||r - rowsums(B)||_1 + ||c - colsums(B)||_1).
inline matrix round_bimarginal(const matrix& b, std::span<const double> r, std::span<const double> c)
{
  if (r.size() != b.rows() || c.size() != b.cols())
    throw mot_error(error_kind::shape_mismatch, "round_bimarginal: marginal lengths do not match the plan");
  matrix out = b;

  const vector rows = out.row_sums();
  for (index i = 0; i < out.rows(); ++i) {
    if (rows[i] <= 0.0) continue;
    const double f = std::min(1.0, r[i] / rows[i]);
    for (index j = 0; j < out.cols(); ++j) out(i, j) *= f;
  }
  const vector cols = out.col_sums();
  for (index j = 0; j < out.cols(); ++j) {
    if (cols[j] <= 0.0) continue;
    const double f = std::min(1.0, c[j] / cols[j]);
    for (index i = 0; i < out.rows(); ++i) out(i, j) *= f;
  }

  // after the two shrinking passes neither residual can be negative
  auto residual = [](std::span<const double> target, const vector& have) {
    vector err(have.size());
    for (index i = 0; i < have.size(); ++i) {
      err[i] = target[i] - have[i];
      if (err[i] < -1e-12)
        throw mot_error(error_kind::inconsistent, "round_bimarginal: negative residual after scaling");
      err[i] = std::max(err[i], 0.0);
    }
    return err;
  };
  const vector err_r = residual(r, out.row_sums());
  const vector err_c = residual(c, out.col_sums());
  const double norm = sum_of(err_r);
  if (norm > 0.0)
    for (index i = 0; i < out.rows(); ++i)
      for (index j = 0; j < out.cols(); ++j) out(i, j) += err_r[i] * err_c[j] / norm;
  return out;
}

struct rounding_report {
  std::map<index, double> per_leaf_l1; // ||mu_k - P_k(B)||_1 before rounding
  double cost_before = 0.0;
  double cost_after = 0.0;
};

/// Restores exact leaf marginals: each leaf edge plan is rounded with the
/// internal side's current marginal held fixed and mu_k imposed on the leaf
/// side. Internal edges are untouched. Leaves are processed in ascending order.
inline std::pair<edge_plan_set, rounding_report> round_tree(const edge_plan_set& plans, const tree_problem& problem)
{
  const auto& edges = problem.edges();
  if (plans.plans.size() != edges.size())
    throw mot_error(error_kind::shape_mismatch, "one plan per edge required");
  const double gap = consistency_gap(problem, plans);
  if (gap > 1e-6)
    throw mot_error(error_kind::inconsistent, "edge plans disagree by " + std::to_string(gap) + " at a shared vertex");

  rounding_report report;
  report.cost_before = cost_of_plan(problem, plans);
  for (index k : problem.gamma())
    report.per_leaf_l1[k] =
      l1_distance(problem.marginal(k), plan_marginal(problem.data(), plans, problem.leaf_edge(k), k));

  edge_plan_set out = plans;
  for (index k : problem.gamma()) {
    const index e = problem.leaf_edge(k);
    const bool leaf_is_head = edges[e].head == k;
    // rows: the neighbour's side, columns: the leaf's side
    const matrix oriented = leaf_is_head ? out.plans[e] : out.plans[e].transposed();
    const matrix rounded = round_bimarginal(oriented, oriented.row_sums(), problem.marginal(k));
    out.plans[e] = leaf_is_head ? rounded : rounded.transposed();
  }
  report.cost_after = cost_of_plan(problem, out);
  return {std::move(out), std::move(report)};
}

} // namespace motgraph
