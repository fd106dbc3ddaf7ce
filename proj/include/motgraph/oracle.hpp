#pragma once

// Brute-force references over the dense n^m tensor. Nothing here uses the
// tree structure, so these routines can check the structured solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "problem.hpp"

namespace motgraph::oracle {

inline constexpr index dense_limit = 1'000'000;
inline constexpr index lp_limit = 4096;

/// Row-major m-mode tensor; the last mode varies fastest.
struct dense_tensor {
  std::vector<index> shape;
  std::vector<double> values;

  index size() const { return values.size(); }
  double sum() const { return sum_of(values); }
};

inline index checked_size(const std::vector<index>& shape, index limit)
{
  index total = 1;
  for (index n : shape) {
    if (n != 0 && total > limit / n)
      throw mot_error(error_kind::too_large, "dense tensor exceeds " + std::to_string(limit) + " entries");
    total *= n;
  }
  if (total > limit) throw mot_error(error_kind::too_large, "dense tensor exceeds " + std::to_string(limit) + " entries");
  return total;
}

/// C(x) = Σ_{(a,b) in E} C^{(a,b)}(x_a, x_b), entry by entry.
inline dense_tensor dense_cost(const problem_data& p)
{
  dense_tensor t{p.support_sizes, {}};
  t.values.resize(checked_size(t.shape, dense_limit));
  for_each_config(t.shape, [&](index flat, const std::vector<index>& x) {
    double c = 0.0;
    for (const auto& e : p.edges) c += e.entries(x[e.tail], x[e.head]);
    t.values[flat] = c;
  });
  return t;
}

/// B(Λ)(x) = exp(-C(x)/eta) Π_{k in Γ} u_k(x_k) mu_k(x_k), optionally leaving
/// out the factor of one constrained vertex.
inline dense_tensor dense_plan(const problem_data& p, double eta, const std::vector<vector>& log_u,
                               index skip = std::numeric_limits<index>::max())
{
  const dense_tensor cost = dense_cost(p);
  dense_tensor b{cost.shape, std::vector<double>(cost.size())};
  for_each_config(b.shape, [&](index flat, const std::vector<index>& x) {
    double lg = -cost.values[flat] / eta;
    for (index k : p.gamma) {
      if (k == skip) continue;
      const double mu = p.marginals[k][x[k]];
      lg += mu > 0.0 ? log_u[k][x[k]] + std::log(mu) : neg_inf;
    }
    b.values[flat] = std::exp(lg);
  });
  return b;
}

inline vector dense_projection(const dense_tensor& b, index k)
{
  if (k >= b.shape.size()) throw mot_error(error_kind::invalid_argument, "mode out of range");
  vector out(b.shape[k], 0.0);
  for_each_config(b.shape, [&](index flat, const std::vector<index>& x) { out[x[k]] += b.values[flat]; });
  return out;
}

inline matrix dense_pairwise(const dense_tensor& b, index k1, index k2)
{
  if (k1 >= b.shape.size() || k2 >= b.shape.size() || k1 == k2)
    throw mot_error(error_kind::invalid_argument, "modes out of range");
  matrix out(b.shape[k1], b.shape[k2]);
  for_each_config(b.shape, [&](index flat, const std::vector<index>& x) { out(x[k1], x[k2]) += b.values[flat]; });
  return out;
}

/// eta Σ_x B(Λ)(x) - eta Σ_k mu_k^T log u_k.
inline double dense_dual_objective(const problem_data& p, double eta, const std::vector<vector>& log_u)
{
  double lin = 0.0;
  for (index k : p.gamma)
    for (index x = 0; x < p.marginals[k].size(); ++x)
      if (p.marginals[k][x] > 0.0) lin += p.marginals[k][x] * log_u[k][x];
  return eta * dense_plan(p, eta, log_u).sum() - eta * lin;
}

/// One exact block update: u_k <- u_k ⊙ mu_k ./ P_k(B(Λ)), written as
/// u_k <- 1 ./ P_k(B without factor k) so zero marginal entries stay finite.
inline void dense_sinkhorn_step(const problem_data& p, double eta, std::vector<vector>& log_u, index k)
{
  const vector rest = dense_projection(dense_plan(p, eta, log_u, k), k);
  for (index x = 0; x < rest.size(); ++x) log_u[k][x] = -std::log(rest[x]);
}

inline double dense_error(const problem_data& p, double eta, const std::vector<vector>& log_u)
{
  const dense_tensor b = dense_plan(p, eta, log_u);
  double e = 0.0;
  for (index k : p.gamma) e += l1_distance(dense_projection(b, k), p.marginals[k]);
  return e;
}

/// Cyclic dense Sinkhorn from u = 1 until Σ_k ||P_k - mu_k||_1 < eps'.
/// Returns log u indexed by vertex (empty for unconstrained vertices).
inline std::vector<vector> dense_sinkhorn(const problem_data& p, double eta, double eps_prime,
                                          index max_sweeps = 1'000'000)
{
  checked_size(p.support_sizes, dense_limit);
  std::vector<vector> log_u(p.m);
  for (index k : p.gamma) log_u[k].assign(p.support_sizes[k], 0.0);
  for (index sweep = 0; sweep < max_sweeps; ++sweep) {
    if (dense_error(p, eta, log_u) < eps_prime) return log_u;
    for (index k : p.gamma) dense_sinkhorn_step(p, eta, log_u, k);
  }
  throw mot_error(error_kind::max_iters_exceeded, "dense_sinkhorn did not converge");
}

struct lp_result {
  dense_tensor plan;
  double optimum = 0.0;
  /// One dual value per marginal constraint, ordered by (k in Γ ascending, x_k).
  vector duals;
};

/// Exact optimum of min <C, B> s.t. P_k(B) = mu_k for k in Γ, B >= 0, over the
/// full tensor. Two-phase dense tableau simplex with Bland's rule.
inline lp_result lp_solve_small(const problem_data& p)
{
  const index nvar = checked_size(p.support_sizes, lp_limit);
  const dense_tensor cost = dense_cost(p);

  index nrow = 0;
  std::vector<index> row_offset;
  for (index k : p.gamma) {
    row_offset.push_back(nrow);
    nrow += p.support_sizes[k];
  }

  constexpr double pivot_tol = 1e-10;
  constexpr double cost_tol = 1e-11;
  const index ncol = nvar + nrow; // structural then artificial
  const index rhs = ncol;
  // rows 0..nrow-1: constraints, row nrow: objective (reduced costs, -value in rhs)
  std::vector<vector> tab(nrow + 1, vector(ncol + 1, 0.0));
  for (index g = 0; g < p.gamma.size(); ++g) {
    const index k = p.gamma[g];
    for (index x = 0; x < p.support_sizes[k]; ++x) tab[row_offset[g] + x][rhs] = p.marginals[k][x];
  }
  for_each_config(p.support_sizes, [&](index flat, const std::vector<index>& x) {
    for (index g = 0; g < p.gamma.size(); ++g) tab[row_offset[g] + x[p.gamma[g]]][flat] = 1.0;
  });
  std::vector<index> basis(nrow);
  std::vector<bool> active(nrow, true);
  for (index i = 0; i < nrow; ++i) {
    tab[i][nvar + i] = 1.0;
    basis[i] = nvar + i;
  }

  auto pivot = [&](index r, index c) {
    const double pv = tab[r][c];
    for (double& v : tab[r]) v /= pv;
    for (index i = 0; i <= nrow; ++i) {
      if (i == r || tab[i][c] == 0.0) continue;
      const double f = tab[i][c];
      for (index j = 0; j <= ncol; ++j) tab[i][j] -= f * tab[r][j];
      tab[i][c] = 0.0;
    }
    basis[r] = c;
  };

  // Bland: lowest-index improving column, ties in the ratio test by lowest basic index
  auto optimize = [&](index allowed_cols) {
    for (;;) {
      index enter = ncol;
      for (index j = 0; j < allowed_cols; ++j)
        if (tab[nrow][j] < -cost_tol) {
          enter = j;
          break;
        }
      if (enter == ncol) return;
      index leave = nrow;
      double best = std::numeric_limits<double>::infinity();
      for (index i = 0; i < nrow; ++i) {
        if (!active[i] || tab[i][enter] <= pivot_tol) continue;
        const double ratio = tab[i][rhs] / tab[i][enter];
        if (leave == nrow || ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[leave])) {
          leave = i;
          best = std::min(best, ratio);
        }
      }
      if (leave == nrow) throw mot_error(error_kind::infeasible, "lp_solve_small: unbounded direction");
      pivot(leave, enter);
    }
  };

  // phase 1: minimise the sum of artificials
  std::fill(tab[nrow].begin(), tab[nrow].end(), 0.0);
  for (index i = 0; i < nrow; ++i)
    for (index j = 0; j <= ncol; ++j)
      if (j < nvar || j == rhs) tab[nrow][j] -= tab[i][j];
  optimize(nvar);
  if (-tab[nrow][rhs] > 1e-9)
    throw mot_error(error_kind::infeasible, "marginal constraints are inconsistent");

  // drive artificials out of the basis; rows where that is impossible are redundant
  for (index i = 0; i < nrow; ++i) {
    if (basis[i] < nvar) continue;
    index c = nvar;
    for (index j = 0; j < nvar; ++j)
      if (std::abs(tab[i][j]) > pivot_tol) {
        c = j;
        break;
      }
    if (c == nvar) active[i] = false;
    else pivot(i, c);
  }

  // phase 2: objective row = c - c_B^T B^{-1} A
  std::fill(tab[nrow].begin(), tab[nrow].end(), 0.0);
  for (index j = 0; j < nvar; ++j) tab[nrow][j] = cost.values[j];
  for (index i = 0; i < nrow; ++i) {
    if (!active[i] || basis[i] >= nvar) continue;
    const double cb = cost.values[basis[i]];
    if (cb == 0.0) continue;
    for (index j = 0; j <= ncol; ++j) tab[nrow][j] -= cb * tab[i][j];
  }
  optimize(nvar);

  lp_result out;
  out.plan.shape = p.support_sizes;
  out.plan.values.assign(nvar, 0.0);
  for (index i = 0; i < nrow; ++i)
    if (active[i] && basis[i] < nvar) out.plan.values[basis[i]] = std::max(0.0, tab[i][rhs]);
  out.optimum = 0.0;
  for (index j = 0; j < nvar; ++j) out.optimum += cost.values[j] * out.plan.values[j];
  // the artificial columns hold B^{-1}; their reduced costs are -y
  out.duals.assign(nrow, 0.0);
  for (index i = 0; i < nrow; ++i) out.duals[i] = -tab[nrow][nvar + i];
  return out;
}

} // namespace motgraph::oracle
