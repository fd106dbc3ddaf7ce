#include <gtest/gtest.h>

#include "test_support.hpp"

namespace testing_support {

namespace {

problem_data cycle(index q, index n, std::vector<index> gamma, std::mt19937_64& g, double scale = 1.0)
{
  problem_data p;
  p.m = q;
  p.support_sizes.assign(q, n);
  for (index v = 0; v < q; ++v) p.edges.push_back({v, (v + 1) % q, random_cost(g, n, n, scale)});
  p.gamma = std::move(gamma);
  p.marginals.assign(q, {});
  for (index k : p.gamma) p.marginals[k] = random_marginal(g, n);
  return p;
}

problem_data clique(index q, index n, std::mt19937_64& g)
{
  problem_data p;
  p.m = q;
  p.support_sizes.assign(q, n);
  for (index a = 0; a < q; ++a)
    for (index b = a + 1; b < q; ++b) p.edges.push_back({a, b, random_cost(g, n, n)});
  p.gamma = {0};
  p.marginals.assign(q, {});
  p.marginals[0] = random_marginal(g, n);
  return p;
}

error_kind validation_error(junction_tree jt, const general_problem& g)
{
  try {
    validate_junction_tree(std::move(jt), g);
  } catch (const mot_error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a validation error";
  return error_kind::invalid_argument;
}

/// Dense marginal over a sorted vertex set, row-major.
vector dense_marginal(const oracle::dense_tensor& t, const std::vector<index>& vars)
{
  index total = 1;
  for (index v : vars) total *= t.shape[v];
  vector out(total, 0.0);
  for_each_config(t.shape, [&](index flat, const std::vector<index>& x) {
    index f = 0;
    for (index v : vars) f = f * t.shape[v] + x[v];
    out[f] += t.values[flat];
  });
  return out;
}

/// Replays the solver's update sequence on the dense tensor, normalises, then
/// rounds each constrained mode against all other modes jointly.
oracle::dense_tensor dense_pipeline(const problem_data& d, double eta, const transcript& log)
{
  std::vector<vector> log_u(d.m);
  for (index k : d.gamma) log_u[k].assign(d.support_sizes[k], 0.0);
  for (const auto& row : log.rows)
    if (row.t > 0) oracle::dense_sinkhorn_step(d, eta, log_u, row.k);
  oracle::dense_tensor t = oracle::dense_plan(d, eta, log_u);
  const double mass = t.sum();
  for (double& x : t.values) x /= mass;
  for (index k : d.gamma) t = dense_round(t, k, d.marginals[k]);
  return t;
}

} // namespace

TEST(MinFill, Widths)
{
  std::mt19937_64 g(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = random_tree(g, pick(g, 2, 10), 2, 3);
    const general_problem gp = validate_general_problem(d);
    const cluster_tree ct = validate_junction_tree(min_fill_decomposition(gp), gp);
    EXPECT_EQ(ct.width(), 1u);
    // every graph edge is a cluster, plus one singleton per leaf
    EXPECT_EQ(ct.cluster_count(), d.edges.size() + d.gamma.size());
  }
  const general_problem tri = validate_general_problem(cycle(3, 2, {0, 1, 2}, g));
  const auto jt = min_fill_decomposition(tri);
  EXPECT_EQ(jt.width(), 2u);
  EXPECT_EQ(jt.clusters.front(), (std::vector<index>{0, 1, 2}));
  EXPECT_EQ(jt.clusters.size(), 4u);

  const general_problem c4 = validate_general_problem(cycle(4, 2, {0, 2}, g));
  EXPECT_EQ(min_fill_decomposition(c4).width(), 2u);

  for (index q = 2; q <= 6; ++q) {
    const general_problem k = validate_general_problem(clique(q, 2, g));
    EXPECT_EQ(min_fill_decomposition(k).width(), q - 1);
  }
}

TEST(MinFill, RandomGraphsAreValid)
{
  std::mt19937_64 g(32);
  for (int trial = 0; trial < 500; ++trial) {
    const index m = pick(g, 2, 8);
    const general_problem gp = validate_general_problem(random_graph(g, m, 1, 3, pick(g, 0, 8), pick(g, 1, m)));
    const junction_tree jt = min_fill_decomposition(gp);
    const cluster_tree ct = validate_junction_tree(jt, gp);
    for (index k : gp.gamma()) {
      EXPECT_EQ(ct.cluster(ct.leaf_cluster(k)), std::vector<index>{k});
      EXPECT_EQ(ct.topology().degree(ct.leaf_cluster(k)), 1u);
    }
    // the cluster costs add up to the graph cost on every configuration
    if (m <= 6) {
      const auto dense = oracle::dense_cost(gp.data());
      std::vector<vector> cc;
      for (index c = 0; c < ct.cluster_count(); ++c) cc.push_back(cluster_cost(gp, ct, c));
      for_each_config(gp.data().support_sizes, [&](index flat, const std::vector<index>& x) {
        double s = 0.0;
        for (index c = 0; c < ct.cluster_count(); ++c) {
          index f = 0;
          for (index v : ct.cluster(c)) f = f * gp.support(v) + x[v];
          s += cc[c][f];
        }
        EXPECT_NEAR(s, dense.values[flat], 1e-12);
      });
    }
  }
}

TEST(ValidateJunctionTree, Errors)
{
  std::mt19937_64 g(33);
  problem_data path4;
  path4.m = 4;
  path4.support_sizes = {2, 2, 2, 2};
  for (index v = 0; v < 3; ++v) path4.edges.push_back({v, v + 1, random_cost(g, 2, 2)});
  path4.gamma = {0, 3};
  path4.marginals = {{0.5, 0.5}, {}, {}, {0.5, 0.5}};
  const general_problem p4 = validate_general_problem(path4);
  EXPECT_EQ(validation_error({{{0, 1}, {2, 3}}, {{0, 1}}, {}}, p4), error_kind::cost_not_covered);

  problem_data path3 = path_instance();
  const general_problem p3 = validate_general_problem(path3);
  // {1,2} - {3} - {2,3}: vertex 2 skips the middle cluster
  EXPECT_EQ(validation_error({{{0, 1}, {2}, {1, 2}}, {{0, 1}, {1, 2}}, {}}, p3),
            error_kind::running_intersection_violated);

  // edge 2-3 assigned to a cluster without vertex 3
  EXPECT_EQ(validation_error({{{0, 1}, {1, 2}, {0}, {2}}, {{0, 1}, {0, 2}, {1, 3}}, {0, 0}}, p3),
            error_kind::family_preservation_violated);
  EXPECT_NO_THROW(validate_junction_tree({{{0, 1}, {1, 2}, {0}, {2}}, {{0, 1}, {0, 2}, {1, 3}}, {0, 1}}, p3));

  // no singleton leaves at all
  EXPECT_EQ(validation_error({{{0, 1}, {1, 2}}, {{0, 1}}, {}}, p3), error_kind::leaf_not_singleton);
  // star centred at a constrained vertex whose singleton sits inside the cluster tree
  problem_data star;
  star.m = 3;
  star.support_sizes = {2, 2, 2};
  star.edges = {{0, 1, random_cost(g, 2, 2)}, {0, 2, random_cost(g, 2, 2)}};
  star.gamma = {0};
  star.marginals = {{0.5, 0.5}, {}, {}};
  const general_problem sp = validate_general_problem(star);
  EXPECT_EQ(validation_error({{{0, 1}, {0}, {0, 2}}, {{0, 1}, {1, 2}}, {}}, sp), error_kind::leaf_not_singleton);
  EXPECT_NO_THROW(validate_junction_tree({{{0, 1}, {0}, {0, 2}, {0}}, {{0, 1}, {1, 2}, {2, 3}}, {}}, sp));

  EXPECT_EQ(validation_error({{{0, 1}, {1, 2}, {0}, {2}}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, {}}, p3),
            error_kind::cyclic_graph);
  EXPECT_EQ(validation_error({{{0, 1}, {1, 2}, {0}, {2}}, {{0, 1}, {0, 2}}, {}}, p3), error_kind::disconnected);
}

TEST(ClusterBp, ProjectionsMatchDenseOracle)
{
  std::mt19937_64 g(34);
  for (int trial = 0; trial < 120; ++trial) {
    const index m = pick(g, 2, 6);
    const auto d = random_graph(g, m, 1, 3, pick(g, 0, 6), pick(g, 1, m), uniform(g, 0.2, 2.0));
    const general_problem gp = validate_general_problem(d);
    const cluster_tree ct = validate_junction_tree(min_fill_decomposition(gp), gp);
    const double eta = uniform(g, 0.1, 1.5);
    const auto log_u = random_log_u(g, d, 1.5);
    cluster_bp bp(gp, ct, eta);
    for (index k : gp.gamma()) bp.set_log_u(k, log_u[k]);
    bp.refresh_all();
    const auto dense = oracle::dense_plan(d, eta, log_u);
    for (index c = 0; c < ct.cluster_count(); ++c) {
      const vector ours = exp_of(bp.log_belief(c));
      const vector ref = dense_marginal(dense, ct.cluster(c));
      ASSERT_EQ(ours.size(), ref.size());
      for (index i = 0; i < ref.size(); ++i) EXPECT_TRUE(rel_close(ours[i], ref[i], 1e-9)) << ours[i] << " " << ref[i];
    }
    for (index k : gp.gamma()) {
      const vector ours = bp.leaf_projection(k), ref = oracle::dense_projection(dense, k);
      for (index i = 0; i < ref.size(); ++i) EXPECT_TRUE(rel_close(ours[i], ref[i], 1e-9));
    }
    EXPECT_TRUE(rel_close(bp.dual_objective(), oracle::dense_dual_objective(d, eta, log_u), 1e-9));
  }
}

TEST(ClusterBp, TreeInputMatchesTreeBp)
{
  std::mt19937_64 g(35);
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = random_tree(g, pick(g, 2, 9), 2, 4);
    const tree_problem tp = validate_tree_problem(d);
    const general_problem gp = validate_general_problem(d);
    const cluster_tree ct = validate_junction_tree(min_fill_decomposition(gp), gp);
    const auto log_u = random_log_u(g, d, 1.0);
    tree_bp a(tp, 0.3);
    cluster_bp b(gp, ct, 0.3);
    for (index k : d.gamma) {
      a.set_log_u(k, log_u[k]);
      b.set_log_u(k, log_u[k]);
    }
    a.refresh_all();
    b.refresh_all();
    for (index k : d.gamma) {
      const vector pa = a.leaf_projection(k), pb = b.leaf_projection(k);
      for (index x = 0; x < pa.size(); ++x) EXPECT_TRUE(rel_close(pa[x], pb[x], 1e-12));
    }
  }
}

TEST(SolveGeneralGraph, TreeInputAgreesWithTreePath)
{
  std::mt19937_64 g(36);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_tree(g, pick(g, 2, 7), 2, 3);
    const tree_problem tp = validate_tree_problem(d);
    const general_problem gp = validate_general_problem(d);
    for (double eps : {1.0, 0.5}) {
      const auto rule = update_rule::random(trial + 1);
      const auto a = solve_mot_eps(tp, eps, rule);
      const auto b = solve_general_graph(gp, eps, rule);
      EXPECT_EQ(a.log.tau, b.log.tau);
      EXPECT_NEAR(a.cost, b.cost, 1e-9);
      EXPECT_NEAR(a.rc_gamma, b.rc_gamma, 1e-15);
    }
  }
}

TEST(SolveGeneralGraph, TriangleAndFourCycleAgainstLp)
{
  std::mt19937_64 g(37);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tri = cycle(3, pick(g, 2, 3), {0, 1, 2}, g, 0.5);
    const auto c4 = cycle(4, pick(g, 2, 3), {0, 2}, g);
    for (const auto* d : {&tri, &c4}) {
      const general_problem gp = validate_general_problem(*d);
      const double opt = oracle::lp_solve_small(*d).optimum;
      for (double eps : {1.0, 0.5, 0.25}) {
        const auto r = solve_general_graph(gp, eps, update_rule::random(trial));
        EXPECT_LE(r.cost, opt + eps);
        EXPECT_GE(r.cost, opt - 1e-9);
        for (index k : d->gamma) {
          for (index e = 0; e < d->edges.size(); ++e) {
            const auto& edge = d->edges[e];
            if (edge.tail == k) { EXPECT_LE(l1_distance(r.plans.plans[e].row_sums(), d->marginals[k]), 1e-12); }
            if (edge.head == k) { EXPECT_LE(l1_distance(r.plans.plans[e].col_sums(), d->marginals[k]), 1e-12); }
          }
        }
      }
    }
  }
}

TEST(SolveGeneralGraph, FourCycleMatchesDensePipeline)
{
  std::mt19937_64 g(38);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = cycle(4, pick(g, 2, 3), {0, 2}, g);
    const general_problem gp = validate_general_problem(d);
    const auto r = solve_general_graph(gp, 0.5, update_rule::random(trial));
    const auto t = dense_pipeline(d, r.eta, r.log);
    EXPECT_NEAR(r.cost, dense_inner(oracle::dense_cost(d), t), 1e-6);
    for (index e = 0; e < d.edges.size(); ++e) {
      const matrix ref = oracle::dense_pairwise(t, d.edges[e].tail, d.edges[e].head);
      for (index i = 0; i < ref.size(); ++i) EXPECT_NEAR(r.plans.plans[e].flat()[i], ref.flat()[i], 1e-6);
    }
  }
}

TEST(SolveGeneralGraph, ZeroCostAtLeaves)
{
  std::mt19937_64 g(39);
  auto d = cycle(3, 2, {0, 1, 2}, g);
  for (auto& e : d.edges) e.entries = matrix(2, 2, 0.0);
  const general_problem gp = validate_general_problem(d);
  const auto r = solve_general_graph(gp, 0.5, update_rule::cyclic());
  EXPECT_EQ(r.log.tau, 0u);
  EXPECT_NEAR(r.cost, 0.0, 1e-15);
  EXPECT_LE(r.cost - 0.0, certificate(r));
}

} // namespace testing_support
