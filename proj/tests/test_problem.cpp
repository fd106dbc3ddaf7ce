#include <gtest/gtest.h>

#include "test_support.hpp"

namespace testing_support {

namespace {

error_kind kind_of(const problem_data& p)
{
  try {
    validate_tree_problem(p);
  } catch (const mot_error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a validation error";
  return error_kind::invalid_argument;
}

double dense_max(const problem_data& p)
{
  const auto c = oracle::dense_cost(p);
  return *std::max_element(c.values.begin(), c.values.end());
}

} // namespace

TEST(Validation, AcceptsMinimalPath)
{
  const auto p = validate_tree_problem(path_instance());
  EXPECT_EQ(p.m(), 3u);
  EXPECT_EQ(p.gamma(), (std::vector<index>{0, 2}));
  EXPECT_EQ(p.leaf_neighbor(0), 1u);
  EXPECT_EQ(p.leaf_neighbor(2), 1u);
}

TEST(Validation, TriangleIsCyclic)
{
  auto p = path_instance();
  p.edges.push_back({0, 2, matrix(2, 2, 0.0)});
  EXPECT_EQ(kind_of(p), error_kind::cyclic_graph);
  try {
    validate_tree_problem(p);
  } catch (const mot_error& e) {
    EXPECT_NE(std::string(e.what()).find("CyclicGraph"), std::string::npos);
  }
}

TEST(Validation, InternalVertexInGammaRejected)
{
  auto p = path_instance();
  p.gamma = {0, 1, 2};
  p.marginals[1] = {0.5, 0.5};
  EXPECT_EQ(kind_of(p), error_kind::gamma_not_leaves);
}

TEST(Validation, UnconstrainedLeafRejected)
{
  auto p = path_instance();
  p.gamma = {0};
  p.marginals[2].clear();
  EXPECT_EQ(kind_of(p), error_kind::gamma_not_leaves);
}

TEST(Validation, ForestIsDisconnected)
{
  problem_data p;
  p.m = 4;
  p.support_sizes = {2, 2, 2, 2};
  p.edges = {{0, 1, matrix(2, 2, 0.0)}, {2, 3, matrix(2, 2, 0.0)}};
  p.gamma = {0, 1, 2, 3};
  p.marginals.assign(4, {0.5, 0.5});
  EXPECT_EQ(kind_of(p), error_kind::disconnected);
}

TEST(Validation, ShapeAndProbabilityErrors)
{
  auto bad_cost = path_instance();
  bad_cost.edges[0].entries = matrix(3, 2, 0.0);
  EXPECT_EQ(kind_of(bad_cost), error_kind::shape_mismatch);

  auto bad_len = path_instance();
  bad_len.marginals[0] = {1.0};
  EXPECT_EQ(kind_of(bad_len), error_kind::shape_mismatch);

  auto bad_sum = path_instance();
  bad_sum.marginals[0] = {0.5, 0.4};
  EXPECT_EQ(kind_of(bad_sum), error_kind::not_a_probability);

  auto negative = path_instance();
  negative.marginals[2] = {1.5, -0.5};
  EXPECT_EQ(kind_of(negative), error_kind::not_a_probability);

  auto negative_cost = path_instance();
  negative_cost.edges[1].entries(0, 1) = -1.0;
  EXPECT_EQ(kind_of(negative_cost), error_kind::invalid_cost);
}

TEST(Validation, SumWithinTolerance)
{
  auto p = path_instance();
  p.marginals[0] = {0.5 + 4e-13, 0.5};
  EXPECT_NO_THROW(validate_tree_problem(p));
}

TEST(Barycenter, StarConstantsForFiveMarginals)
{
  std::mt19937_64 g(7);
  std::vector<vector> mus;
  for (int i = 0; i < 5; ++i) mus.push_back(random_marginal(g, 3));
  const auto p = build_barycenter_problem(mus, random_cost(g, 3, 3));
  const auto k = compute_constants(p);
  EXPECT_EQ(k.diameter, 2u);
  EXPECT_EQ(p.gamma().size(), 5u);
  EXPECT_EQ(p.m(), 6u);
  EXPECT_FALSE(p.in_gamma(5));
}

TEST(Barycenter, LeafConstantIsCostOverL)
{
  const matrix c(2, 2, {0, 4, 4, 0});
  const auto p = build_barycenter_problem({{0.5, 0.5}, {0.2, 0.8}}, c);
  EXPECT_EQ(compute_constants(p).rc_gamma, 2.0);

  std::mt19937_64 g(3);
  for (index L = 2; L <= 6; ++L) {
    std::vector<vector> mus;
    for (index i = 0; i < L; ++i) mus.push_back(random_marginal(g, 4));
    const matrix ground = random_cost(g, 4, 4, 10.0);
    const auto q = build_barycenter_problem(mus, ground);
    EXPECT_NEAR(compute_constants(q).rc_gamma * static_cast<double>(L), ground.max_abs(), 1e-12) << "L=" << L;
  }
}

TEST(Barycenter, SingleMarginalIsTwoVertexPath)
{
  const auto p = build_barycenter_problem({{0.25, 0.75}}, matrix(2, 2, {0, 1, 1, 0}));
  EXPECT_EQ(p.m(), 2u);
  EXPECT_EQ(p.gamma().size(), 2u);
  EXPECT_EQ(p.marginal(0), p.marginal(1));
}

TEST(Barycenter, ShapeMismatch)
{
  EXPECT_THROW(build_barycenter_problem({{0.5, 0.5}, {1.0}}, matrix(2, 2, 0.0)), mot_error);
  EXPECT_THROW(build_barycenter_problem({{0.5, 0.5}}, matrix(2, 3, 0.0)), mot_error);
}

TEST(Constants, PathInstance)
{
  const auto k = compute_constants(validate_tree_problem(path_instance()));
  EXPECT_EQ(k.rc_gamma, 1.0);
  EXPECT_EQ(k.diameter, 2u);
  EXPECT_EQ(k.c_inf, 2.0);
  EXPECT_EQ(k.rc_per_leaf.at(0), 1.0);
  EXPECT_EQ(k.rc_per_leaf.at(2), 1.0);
  EXPECT_EQ(k.avg_leaf_distance, 2.0);
  // brute force over the 8 tuples
  EXPECT_EQ(dense_max(path_instance()), 2.0);
}

TEST(Constants, ZeroCostEdge)
{
  problem_data p;
  p.m = 2;
  p.support_sizes = {2, 2};
  p.edges = {{0, 1, matrix(2, 2, 0.0)}};
  p.gamma = {0, 1};
  p.marginals = {{0.5, 0.5}, {0.5, 0.5}};
  const auto k = compute_constants(validate_tree_problem(p));
  EXPECT_EQ(k.rc_gamma, 0.0);
  EXPECT_EQ(k.c_inf, 0.0);
}

TEST(Constants, IdenticalSpokesPeakTogether)
{
  std::mt19937_64 g(11);
  for (index L = 2; L <= 3; ++L)
    for (index n = 2; n <= 3; ++n) {
      std::vector<vector> mus;
      for (index i = 0; i < L; ++i) mus.push_back(random_marginal(g, n));
      const matrix ground = random_cost(g, n, n, 3.0);
      const auto p = build_barycenter_problem(mus, ground);
      const auto k = compute_constants(p);
      EXPECT_NEAR(k.c_inf, dense_max(p.data()), 1e-12);
      EXPECT_NEAR(k.c_inf, ground.max_abs(), 1e-12);
      EXPECT_NEAR(k.rc_gamma, ground.max_abs() / static_cast<double>(L), 1e-15);
    }
}

TEST(Constants, StructuralMaxMatchesDenseTensor)
{
  std::mt19937_64 g(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto data = random_tree(g, pick(g, 2, 6), 1, 4, 5.0);
    index states = 1;
    for (index n : data.support_sizes) states *= n;
    if (states > 100000) continue;
    const auto p = validate_tree_problem(data);
    const auto k = compute_constants(p);
    EXPECT_NEAR(k.c_inf, dense_max(data), 1e-12);
    EXPECT_LE(k.rc_gamma, k.c_inf + 1e-12);
  }
}

TEST(CostOfPlan, Examples)
{
  problem_data zero;
  zero.m = 2;
  zero.support_sizes = {2, 2};
  zero.edges = {{0, 1, matrix(2, 2, 0.0)}};
  zero.gamma = {0, 1};
  zero.marginals = {{0.5, 0.5}, {0.5, 0.5}};
  EXPECT_EQ(cost_of_plan(zero, {{matrix(2, 2, {0.1, 0.2, 0.3, 0.4})}}), 0.0);

  auto single = zero;
  single.edges[0].entries = matrix(2, 2, {0, 1, 1, 0});
  EXPECT_EQ(cost_of_plan(single, {{matrix(2, 2, {0.5, 0, 0, 0.5})}}), 0.0);

  EXPECT_THROW(cost_of_plan(single, {{matrix(3, 2, 0.0)}}), mot_error);
  EXPECT_THROW(cost_of_plan(single, {}), mot_error);
}

TEST(CostOfPlan, PathOptimumFromExactPlan)
{
  const auto data = path_instance();
  const auto lp = oracle::lp_solve_small(data);
  edge_plan_set plans;
  plans.plans.push_back(oracle::dense_pairwise(lp.plan, 0, 1));
  plans.plans.push_back(oracle::dense_pairwise(lp.plan, 1, 2));
  EXPECT_NEAR(cost_of_plan(data, plans), 0.2, 1e-12);
}

TEST(Balanced, StarAndEqualSymmetricCosts)
{
  std::mt19937_64 g(5);
  std::vector<vector> mus;
  for (int i = 0; i < 4; ++i) mus.push_back(random_marginal(g, 3));
  EXPECT_TRUE(is_balanced(build_barycenter_problem(mus, random_cost(g, 3, 3)), 1.0));

  // equal symmetric costs on every edge of a random tree
  for (int trial = 0; trial < 20; ++trial) {
    auto data = random_tree(g, pick(g, 3, 8), 3, 3);
    matrix sym = random_cost(g, 3, 3);
    for (index i = 0; i < 3; ++i)
      for (index j = 0; j < i; ++j) sym(j, i) = sym(i, j);
    for (auto& e : data.edges) e.entries = sym;
    EXPECT_TRUE(is_balanced(validate_tree_problem(data), 1.0));
  }

  problem_data single;
  single.m = 2;
  single.support_sizes = {2, 2};
  single.edges = {{0, 1, matrix(2, 2, {0, 1, 1, 0})}};
  single.gamma = {0, 1};
  single.marginals = {{0.5, 0.5}, {0.5, 0.5}};
  EXPECT_FALSE(is_balanced(validate_tree_problem(single), 1.0));
}

TEST(GeneralProblem, AcceptsCyclesRejectsDisconnected)
{
  auto p = path_instance();
  p.edges.push_back({0, 2, matrix(2, 2, 1.0)});
  EXPECT_NO_THROW(validate_general_problem(p));

  problem_data split;
  split.m = 4;
  split.support_sizes = {2, 2, 2, 2};
  split.edges = {{0, 1, matrix(2, 2, 0.0)}, {2, 3, matrix(2, 2, 0.0)}};
  split.gamma = {0};
  split.marginals = {{0.5, 0.5}, {}, {}, {}};
  try {
    validate_general_problem(split);
    FAIL();
  } catch (const mot_error& e) {
    EXPECT_EQ(e.kind(), error_kind::disconnected);
  }
}

} // namespace testing_support
