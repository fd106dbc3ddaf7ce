#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "motgraph/bench.hpp"
#include "motgraph/io.hpp"
#include "test_support.hpp"

namespace testing_support {

namespace {

error_kind parse_error_of(const std::string& text)
{
  try {
    io::parse_problem(io::json::parse(text));
  } catch (const mot_error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a parse error";
  return error_kind::invalid_argument;
}

} // namespace

TEST(ProblemFile, RoundTrip)
{
  std::mt19937_64 g(51);
  const auto dir = std::filesystem::temp_directory_path() / "motgraph_io_test";
  std::filesystem::create_directories(dir);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = trial % 2 ? random_tree(g, pick(g, 2, 7), 1, 4, 3.0, true)
                             : random_graph(g, pick(g, 2, 6), 1, 4, 3, 2, 3.0);
    const std::string path = (dir / ("p" + std::to_string(trial) + ".json")).string();
    io::write_problem_file(path, d, trial % 2 ? io::graph_kind::tree : io::graph_kind::general);
    const auto back = io::read_problem_file(path);
    EXPECT_EQ(back.kind, trial % 2 ? io::graph_kind::tree : io::graph_kind::general);
    EXPECT_EQ(back.data.m, d.m);
    EXPECT_EQ(back.data.support_sizes, d.support_sizes);
    EXPECT_EQ(back.data.gamma, d.gamma);
    EXPECT_EQ(back.data.marginals, d.marginals);
    ASSERT_EQ(back.data.edges.size(), d.edges.size());
    for (index e = 0; e < d.edges.size(); ++e) {
      EXPECT_EQ(back.data.edges[e].tail, d.edges[e].tail);
      EXPECT_EQ(back.data.edges[e].head, d.edges[e].head);
      EXPECT_EQ(back.data.edges[e].entries, d.edges[e].entries); // bit-exact doubles
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(ProblemFile, NestedCostRowsAccepted)
{
  const auto f = io::parse_problem(io::json::parse(R"({
    "m": 2, "supports": [2, 3],
    "edges": [{"u": 1, "v": 2, "cost": [[0, 1, 2], [1, 0, 1]]}],
    "gamma": [{"vertex": 2, "marginal": [0.2, 0.3, 0.5]}, {"vertex": 1, "marginal": [0.5, 0.5]}]
  })"));
  EXPECT_EQ(f.data.edges[0].entries, matrix(2, 3, {0, 1, 2, 1, 0, 1}));
  EXPECT_EQ(f.data.gamma, (std::vector<index>{0, 1}));
  EXPECT_EQ(f.kind, io::graph_kind::automatic);
  EXPECT_NO_THROW(validate_tree_problem(f.data));
}

TEST(ProblemFile, Errors)
{
  EXPECT_EQ(parse_error_of(R"({"supports": [2], "edges": [], "gamma": []})"), error_kind::parse_error);
  EXPECT_EQ(parse_error_of(R"({"m": 2, "supports": [2, 2], "edges": [{"u": 1, "v": 3, "cost": [0,0,0,0]}], "gamma": []})"),
            error_kind::parse_error);
  EXPECT_EQ(parse_error_of(R"({"m": 2, "supports": [2, 2], "edges": [{"u": 1, "v": 2, "cost": [0,0,0]}], "gamma": []})"),
            error_kind::shape_mismatch);
  EXPECT_EQ(parse_error_of(R"({"m": 2, "supports": [2], "edges": [], "gamma": []})"), error_kind::shape_mismatch);
  EXPECT_EQ(parse_error_of(R"({"m": 2, "supports": [2, 2], "edges": [], "gamma": [{"vertex": 1, "marginal": [1, 0]},
            {"vertex": 1, "marginal": [1, 0]}]})"),
            error_kind::parse_error);
  EXPECT_EQ(parse_error_of(R"({"m": 2, "supports": [2, 2], "edges": [], "gamma": [], "graph_type": "dag"})"),
            error_kind::parse_error);
  EXPECT_EQ(parse_error_of(R"({"m": -2, "supports": [], "edges": [], "gamma": []})"), error_kind::parse_error);
  EXPECT_THROW(io::read_problem_file("/nonexistent/motgraph.json"), mot_error);
}

TEST(ProblemFile, TreeDetection)
{
  EXPECT_TRUE(io::is_tree_problem(path_instance()));
  auto tri = path_instance();
  tri.edges.push_back({0, 2, matrix(2, 2, 0.0)});
  EXPECT_FALSE(io::is_tree_problem(tri));
  auto internal = path_instance();
  internal.gamma = {0, 1, 2};
  internal.marginals[1] = {0.5, 0.5};
  EXPECT_FALSE(io::is_tree_problem(internal));
  // a tree with a bad marginal still goes to the tree path, which reports it
  auto bad = path_instance();
  bad.marginals[0] = {0.7, 0.7};
  EXPECT_TRUE(io::is_tree_problem(bad));
}

TEST(ResultFile, Fields)
{
  const tree_problem p = validate_tree_problem(path_instance());
  const auto r = solve_mot_eps(p, 0.5, update_rule::random(4));
  const auto j = io::result_to_json(p.data(), r);
  EXPECT_EQ(j.at("cost").get<double>(), r.cost);
  EXPECT_EQ(j.at("rule"), "random");
  EXPECT_EQ(j.at("seed"), 4);
  EXPECT_EQ(j.at("plans").size(), 2u);
  EXPECT_EQ(j.at("plans")[0].at("plan").size(), 4u);
  EXPECT_EQ(j.at("leaves").size(), 2u);
  EXPECT_EQ(j.at("leaves")[0].at("vertex"), 1);
  EXPECT_FALSE(j.contains("cluster_marginals"));
}

TEST(Transcript, PathNextToOutput)
{
  EXPECT_EQ(io::transcript_path("out/result.json"), "out/result.transcript.csv");
  EXPECT_EQ(io::transcript_path("result"), "result.transcript.csv");
  EXPECT_EQ(io::transcript_path("a.b/result"), "a.b/result.transcript.csv");
}

TEST(Bench, GeneratedInstancesAreValidTrees)
{
  for (const char* family : {"path", "star", "binary", "random"}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const bench::instance_spec s{family, 4, 3, seed};
      const auto d = bench::generate_instance(s);
      const tree_problem p = validate_tree_problem(d);
      if (std::string(family) == "star") {
        EXPECT_EQ(p.m(), 5u);
        EXPECT_EQ(p.gamma().size(), 4u);
      }
      if (std::string(family) == "binary") { EXPECT_EQ(p.m(), 31u); }
      for (index k : p.gamma())
        for (double x : p.marginal(k)) EXPECT_GT(x, 0.0);
      EXPECT_EQ(bench::generate_instance(s).edges[0].entries, d.edges[0].entries);
    }
  }
  EXPECT_THROW(bench::generate_instance({"ring", 4, 3, 0}), mot_error);
  EXPECT_THROW(bench::generate_instance({"path", 1, 3, 0}), mot_error);
}

TEST(Bench, RecordsAndSummary)
{
  bench::bench_config cfg;
  cfg.instances = {{"star", 3, 3, 1}, {"path", 4, 3, 2}};
  cfg.eps = {1.0, 0.5};
  cfg.seeds = 4;
  const auto records = bench::run_bench(cfg, 2);
  ASSERT_EQ(records.size(), 16u);
  EXPECT_EQ(records[0].instance, cfg.instances[0].id());
  EXPECT_EQ(records[0].seed, 1u);
  EXPECT_EQ(records[3].seed, 4u);
  EXPECT_EQ(records[4].eps, 0.5);
  for (const auto& r : records) {
    EXPECT_FALSE(r.capped);
    EXPECT_GE(r.tau, 1u);
    EXPECT_EQ(r.wall_ns > 0, true);
    EXPECT_NEAR(r.bound_probability / r.bound_expectation, 6.0 * std::log(10.0), 1e-9);
  }
  const auto summary = bench::summarize(records);
  ASSERT_EQ(summary.size(), 4u);
  double mean = 0.0;
  for (index i = 0; i < 4; ++i) mean += static_cast<double>(records[i].tau);
  EXPECT_NEAR(summary[0].mean_tau, mean / 4.0, 1e-12);
  EXPECT_EQ(summary[0].runs, 4u);
  for (const auto& s : summary) EXPECT_TRUE(s.mean_within_bound);

  const std::string csv = bench::to_csv(records, summary);
  EXPECT_EQ(csv.rfind("kind,instance,seed,rule,eps,eta,eps_prime,tau,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 16 + 4);
}

TEST(Bench, ThreadCountDoesNotChangeResults)
{
  bench::bench_config cfg;
  cfg.instances = {{"random", 6, 3, 9}};
  cfg.seeds = 8;
  const auto a = bench::run_bench(cfg, 1);
  const auto b = bench::run_bench(cfg, 4);
  ASSERT_EQ(a.size(), b.size());
  for (index i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].tau, b[i].tau);
    EXPECT_EQ(a[i].msgs, b[i].msgs);
  }
}

TEST(Bench, BoundQuadruplesWhenEpsHalves)
{
  bench::bench_config cfg;
  cfg.instances = {{"star", 3, 4, 5}};
  cfg.eps = {1.0, 0.5};
  cfg.seeds = 1;
  const auto r = bench::run_bench(cfg, 1);
  EXPECT_NEAR(r[1].bound_expectation / r[0].bound_expectation, 4.0, 1e-12);
}

TEST(Bench, ThreadsFromEnvironment)
{
  setenv("MOTGRAPH_THREADS", "3", 1);
  EXPECT_EQ(bench::thread_count(), 3u);
  setenv("MOTGRAPH_THREADS", "junk", 1);
  EXPECT_GE(bench::thread_count(), 1u);
  unsetenv("MOTGRAPH_THREADS");
  EXPECT_GE(bench::thread_count(), 1u);
}

TEST(Bench, ExceedanceAllowance)
{
  EXPECT_NEAR(bench::exceedance_allowance(0.1, 20), 0.1 + 3.0 * std::sqrt(0.09 / 20.0), 1e-15);
}

} // namespace testing_support
