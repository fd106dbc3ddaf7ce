// Command-line front end: solve, barycenter, bench, oracle-check, validate.
//
// Exit codes: 0 success, 1 invalid input (the message names the violated
// invariant), 2 iteration cap reached (partial output written), 3 a check failed.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "motgraph/bench.hpp"
#include "motgraph/io.hpp"
#include "motgraph/motgraph.hpp"
#include "motgraph/oracle.hpp"

namespace {

using namespace motgraph;
using motgraph::index;
using io::json;

constexpr int exit_ok = 0;
constexpr int exit_input = 1;
constexpr int exit_capped = 2;
constexpr int exit_check = 3;

struct solver_flags {
  double eps = 0.5;
  std::string rule = "random";
  std::uint64_t seed = 0;
  index max_iters = 0;
  std::string out;
  bool timing = false;

  update_rule to_rule() const { return {parse_rule_kind(rule), seed}; }
  solve_options options() const { return {max_iters, 0, timing}; }
};

void add_solver_flags(CLI::App* cmd, solver_flags& f)
{
  cmd->add_option("--eps", f.eps, "target accuracy")->check(CLI::PositiveNumber);
  cmd->add_option("--rule", f.rule, "marginal selection rule")->check(CLI::IsMember({"random", "cyclic", "greedy"}));
  cmd->add_option("--seed", f.seed, "seed of the random rule");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap (0: ten times the delta = 0.01 bound)");
  cmd->add_flag("--timing", f.timing, "record wall time per iteration in the transcript");
}

struct solved {
  approx_result result;
  problem_data data;
};

/// Tree path when the file says so or when the graph is a tree with Γ = leaves.
solved solve_file(const std::string& path, const solver_flags& f)
{
  io::problem_file file = io::read_problem_file(path);
  const bool tree = file.kind == io::graph_kind::tree ||
                    (file.kind == io::graph_kind::automatic && io::is_tree_problem(file.data));
  if (tree) {
    const tree_problem p = validate_tree_problem(file.data);
    return {solve_mot_eps(p, f.eps, f.to_rule(), f.options()), p.data()};
  }
  const general_problem g = validate_general_problem(file.data);
  return {solve_general_graph(g, f.eps, f.to_rule(), f.options()), g.data()};
}

void write_partial(const solver_flags& f, const max_iters_exceeded& e)
{
  if (f.out.empty()) return;
  json j{{"status", "max_iters_exceeded"}, {"last_error", e.last_error()}, {"iterations", e.partial().tau}};
  io::write_text(f.out, j.dump(2) + "\n");
  io::write_text(io::transcript_path(f.out), io::transcript_csv(e.partial()));
}

void write_result(const solver_flags& f, json j, const transcript& log)
{
  j["status"] = "ok";
  if (f.out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  io::write_text(f.out, j.dump(2) + "\n");
  io::write_text(io::transcript_path(f.out), io::transcript_csv(log));
}

int cmd_solve(const std::string& path, const solver_flags& f)
{
  const solved s = solve_file(path, f);
  write_result(f, io::result_to_json(s.data, s.result), s.result.log);
  std::fprintf(stderr, "cost %.12g  certificate %.6g  tau %zu\n", s.result.cost, certificate(s.result), s.result.log.tau);
  return exit_ok;
}

vector read_vector(const json& j)
{
  vector out;
  for (const auto& x : j) out.push_back(x.get<double>());
  return out;
}

int cmd_barycenter(const std::string& marginals_path, const std::string& cost_path, const solver_flags& f)
{
  const json mj = io::read_json_file(marginals_path);
  const json& mlist = mj.is_object() ? mj.at("marginals") : mj;
  std::vector<vector> marginals;
  for (const auto& m : mlist) marginals.push_back(read_vector(m));
  const json cj = io::read_json_file(cost_path);
  const json& rows = cj.is_object() ? cj.at("cost") : cj;
  const index n = rows.size();
  const matrix ground = io::detail::read_matrix(rows, n, n, "ground cost");

  const tree_problem p = build_barycenter_problem(marginals, ground);
  const auto constants = compute_constants(p);
  const approx_result r = solve_mot_eps(p, f.eps, f.to_rule(), f.options());

  // the spokes share the center's marginal after rounding; with L = 1 the
  // "center" is the pinned copy of the single input
  const vector center = marginals.size() == 1 ? p.marginal(1) : r.plans.plans[0].row_sums();
  json j = io::result_to_json(p.data(), r);
  j["barycenter"] = center;
  j["m"] = p.m();
  j["gamma_size"] = p.gamma().size();
  j["diameter"] = constants.diameter;
  write_result(f, j, r.log);
  std::fprintf(stderr, "cost %.12g  certificate %.6g  tau %zu  rc_gamma %.17g\n", r.cost, certificate(r), r.log.tau,
               r.rc_gamma);
  return exit_ok;
}

int cmd_bench(const std::string& config_path, const std::string& out, std::optional<double> delta,
              std::optional<std::string> rule, std::optional<index> max_iters)
{
  const json j = io::read_json_file(config_path);
  bench::bench_config cfg;
  try {
    for (const auto& s : j.at("instances"))
      cfg.instances.push_back({s.at("family").get<std::string>(), s.at("size").get<index>(), s.at("n").get<index>(),
                               s.value("seed", std::uint64_t{0})});
    if (j.contains("eps")) cfg.eps = j.at("eps").get<std::vector<double>>();
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.first_seed = j.value("first_seed", cfg.first_seed);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.max_iters = j.value("max_iters", cfg.max_iters);
    if (j.contains("rule")) cfg.rule = parse_rule_kind(j.at("rule").get<std::string>());
  } catch (const json::exception& e) {
    throw mot_error(error_kind::parse_error, config_path + ": " + e.what());
  }
  if (delta) cfg.delta = *delta;
  if (rule) cfg.rule = parse_rule_kind(*rule);
  if (max_iters) cfg.max_iters = *max_iters;

  const auto records = bench::run_bench(cfg);
  const auto summary = bench::summarize(records);
  const std::string csv = bench::to_csv(records, summary);
  if (out.empty()) std::cout << csv;
  else io::write_text(out, csv);

  bool ok = true;
  for (const auto& s : summary) {
    const bool share_ok = s.frac_over_probability <= bench::exceedance_allowance(cfg.delta, s.runs);
    std::fprintf(stderr, "%-28s eps %-6g mean tau %10.1f  bound %12.4g  over-delta share %.3f  %s\n",
                 s.instance.c_str(), s.eps, s.mean_tau, s.bound_expectation, s.frac_over_probability,
                 s.mean_within_bound && share_ok ? "ok" : "VIOLATION");
    ok = ok && s.mean_within_bound && share_ok;
  }
  return ok ? exit_ok : exit_check;
}

int cmd_oracle_check(const std::string& path, const solver_flags& f)
{
  const solved s = solve_file(path, f);
  const auto lp = oracle::lp_solve_small(s.data);
  const double gap = s.result.cost - lp.optimum;
  const double cert = certificate(s.result);
  const bool pass = gap <= f.eps && gap <= cert;
  std::printf("cost %.12g\nopt %.12g\ngap %.6g\neps %.6g\ncertificate %.6g\n%s\n", s.result.cost, lp.optimum, gap,
              f.eps, cert, pass ? "PASS" : "FAIL");
  if (!f.out.empty()) {
    json j = io::result_to_json(s.data, s.result);
    j["opt"] = lp.optimum;
    j["gap"] = gap;
    write_result(f, j, s.result.log);
  }
  return pass ? exit_ok : exit_check;
}

int cmd_validate(const std::string& path)
{
  const io::problem_file file = io::read_problem_file(path);
  const bool tree = file.kind == io::graph_kind::tree ||
                    (file.kind == io::graph_kind::automatic && io::is_tree_problem(file.data));
  if (tree) {
    const tree_problem p = validate_tree_problem(file.data);
    const auto k = compute_constants(p);
    std::printf("valid tree problem: m %zu, |gamma| %zu, rc_gamma %.17g, c_inf %.17g, diameter %zu, "
                "avg leaf distance %.6g, balanced(c=1) %s\n",
                p.m(), p.gamma().size(), k.rc_gamma, k.c_inf, k.diameter, k.avg_leaf_distance,
                is_balanced(p, 1.0) ? "yes" : "no");
    return exit_ok;
  }
  const general_problem g = validate_general_problem(file.data);
  const cluster_tree ct = validate_junction_tree(min_fill_decomposition(g), g);
  std::printf("valid general problem: m %zu, |gamma| %zu, clusters %zu, width %zu\n", g.m(), g.gamma().size(),
              ct.cluster_count(), ct.width());
  return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Multi-marginal optimal transport on graph-structured costs"};
  app.require_subcommand(1);

  solver_flags flags;
  std::string file, marginals_path, cost_path, config_path;
  std::optional<double> delta;
  std::optional<std::string> bench_rule;
  std::optional<motgraph::index> bench_max_iters;

  auto* solve = app.add_subcommand("solve", "solve a problem file to accuracy eps");
  solve->add_option("file", file, "problem JSON")->required();
  add_solver_flags(solve, flags);
  solve->add_option("--out", flags.out, "result JSON; the transcript CSV is written alongside");

  auto* bary = app.add_subcommand("barycenter", "fixed-support barycenter of L marginals");
  bary->add_option("marginals", marginals_path, "JSON array of marginals")->required();
  bary->add_option("cost", cost_path, "JSON square ground cost")->required();
  add_solver_flags(bary, flags);
  bary->add_option("--out", flags.out, "result JSON; the transcript CSV is written alongside");

  auto* bench_cmd = app.add_subcommand("bench", "iteration counts against the expectation and tail bounds");
  bench_cmd->add_option("config", config_path, "bench configuration JSON")->required();
  bench_cmd->add_option("--out", flags.out, "CSV output (stdout if omitted)");
  bench_cmd->add_option("--delta", delta, "failure probability of the tail bound column");
  bench_cmd->add_option("--rule", bench_rule)->check(CLI::IsMember({"random", "cyclic", "greedy"}));
  bench_cmd->add_option("--max-iters", bench_max_iters);

  auto* check = app.add_subcommand("oracle-check", "solve and compare against the exact LP optimum");
  check->add_option("file", file, "problem JSON")->required();
  add_solver_flags(check, flags);
  check->add_option("--out", flags.out, "optional result JSON");

  auto* validate = app.add_subcommand("validate", "check a problem file and print its constants");
  validate->add_option("file", file, "problem JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // bad arguments are input errors like any other; --help still exits 0
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }

  try {
    if (solve->parsed()) return cmd_solve(file, flags);
    if (bary->parsed()) return cmd_barycenter(marginals_path, cost_path, flags);
    if (bench_cmd->parsed()) return cmd_bench(config_path, flags.out, delta, bench_rule, bench_max_iters);
    if (check->parsed()) return cmd_oracle_check(file, flags);
    if (validate->parsed()) return cmd_validate(file);
  } catch (const max_iters_exceeded& e) {
    write_partial(flags, e);
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_capped;
  } catch (const mot_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_input;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_input;
  }
  return exit_input;
}
