#pragma once

// Iteration-count benchmark: random tree families, many seeds, and the
// expectation / high-probability iteration bounds next to the measured tau.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "pipeline.hpp"
#include "problem.hpp"
#include "sinkhorn.hpp"
#include "tree_bp.hpp"

namespace motgraph::bench {

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

/// family: "path" (size = vertices), "star" (size = leaves), "binary"
/// (size = depth of a complete binary tree), "random" (size = vertices).
struct instance_spec {
  std::string family = "star";
  index size = 3;
  index n = 4;
  std::uint64_t seed = 0;

  std::string id() const { return family + "-" + std::to_string(size) + "-n" + std::to_string(n) + "-s" + std::to_string(seed); }
};

/// Random costs in [0, 1) on every edge and marginals bounded away from zero.
inline problem_data generate_instance(const instance_spec& spec)
{
  std::mt19937_64 gen(spec.seed);
  std::vector<std::pair<index, index>> edges;
  index m = 0;
  if (spec.family == "path") {
    m = spec.size;
    for (index v = 0; v + 1 < m; ++v) edges.emplace_back(v, v + 1);
  } else if (spec.family == "star") {
    m = spec.size + 1;
    for (index l = 0; l < spec.size; ++l) edges.emplace_back(spec.size, l);
  } else if (spec.family == "binary") {
    m = (index{2} << spec.size) - 1;
    for (index v = 1; v < m; ++v) edges.emplace_back((v - 1) / 2, v);
  } else if (spec.family == "random") {
    m = spec.size;
    for (index v = 1; v < m; ++v) edges.emplace_back(uniform_below(gen, v), v);
  } else {
    throw mot_error(error_kind::invalid_argument, "unknown instance family '" + spec.family + "'");
  }
  if (m < 2) throw mot_error(error_kind::invalid_argument, "instance needs at least two vertices");

  problem_data p;
  p.m = m;
  p.support_sizes.assign(m, spec.n);
  std::vector<index> degree(m, 0);
  for (auto [a, b] : edges) {
    matrix c(spec.n, spec.n);
    for (double& x : c.flat()) x = uniform01(gen);
    p.edges.push_back({a, b, std::move(c)});
    ++degree[a];
    ++degree[b];
  }
  p.marginals.assign(m, {});
  for (index v = 0; v < m; ++v) {
    if (degree[v] != 1) continue;
    p.gamma.push_back(v);
    vector w(spec.n);
    for (double& x : w) x = 0.1 + uniform01(gen);
    const double s = sum_of(w);
    for (double& x : w) x /= s;
    p.marginals[v] = std::move(w);
  }
  return p;
}

struct bench_config {
  std::vector<instance_spec> instances;
  std::vector<double> eps{0.5};
  index seeds = 20;
  std::uint64_t first_seed = 1;
  update_rule::kind rule = update_rule::kind::random;
  double delta = 0.1;
  index max_iters = 0; // 0: default cap
};

struct bench_record {
  std::string instance;
  std::uint64_t seed = 0;
  update_rule::kind rule = update_rule::kind::random;
  double eps = 0.0;
  double eta = 0.0;
  double eps_prime = 0.0;
  index tau = 0;
  double bound_expectation = 0.0;
  double bound_probability = 0.0;
  double delta = 0.1;
  std::int64_t wall_ns = 0;
  index msgs = 0;
  index diameter = 0;
  double avg_leaf_distance = 0.0;
  index gamma_size = 0;
  bool capped = false;
};

struct bench_summary {
  std::string instance;
  double eps = 0.0;
  index runs = 0;
  double mean_tau = 0.0;
  double bound_expectation = 0.0;
  double bound_probability = 0.0;
  double frac_over_probability = 0.0;
  bool mean_within_bound = false;
};

/// Worker count: MOTGRAPH_THREADS if set and positive, otherwise the hardware count.
inline index thread_count()
{
  if (const char* env = std::getenv("MOTGRAPH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<index>(v);
  }
  return std::max<index>(1, std::thread::hardware_concurrency());
}

/// Sinkhorn loop only, with the exact error checked after every update so
/// that tau is the first iteration below eps'.
inline bench_record measure(const tree_problem& p, const problem_constants& k, const std::string& id, double eps,
                            update_rule rule, double delta, index max_iters)
{
  bench_record r;
  r.instance = id;
  r.seed = rule.seed;
  r.rule = rule.variant;
  r.eps = eps;
  r.delta = delta;
  r.eta = regularization_for(eps, p.m(), p.max_support());
  r.eps_prime = eps / (8.0 * k.rc_gamma);
  r.gamma_size = p.gamma().size();
  r.bound_expectation = expectation_bound(r.gamma_size, k.rc_gamma, r.eta, r.eps_prime);
  r.bound_probability = probability_bound(r.gamma_size, k.rc_gamma, r.eta, r.eps_prime, delta);
  r.diameter = k.diameter;
  r.avg_leaf_distance = k.avg_leaf_distance;

  tree_bp engine(p, r.eta);
  solver_config cfg;
  cfg.eps_prime = r.eps_prime;
  cfg.error_refresh_period = 1;
  cfg.max_iters = max_iters ? max_iters : default_max_iters(r.gamma_size, k.rc_gamma, r.eta, r.eps_prime);
  const auto start = std::chrono::steady_clock::now();
  try {
    r.tau = run(engine, rule, cfg).log.tau;
  } catch (const max_iters_exceeded&) {
    r.tau = cfg.max_iters;
    r.capped = true;
  }
  r.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  r.msgs = engine.messages_updated();
  return r;
}

/// One record per (instance, eps, seed), in that order regardless of threading.
inline std::vector<bench_record> run_bench(const bench_config& cfg, index threads = thread_count())
{
  struct job {
    index inst, eps, seed;
  };
  std::vector<tree_problem> problems;
  std::vector<problem_constants> constants;
  for (const auto& s : cfg.instances) {
    problems.push_back(validate_tree_problem(generate_instance(s)));
    constants.push_back(compute_constants(problems.back()));
    if (constants.back().rc_gamma <= 0.0)
      throw mot_error(error_kind::invalid_argument, "instance " + s.id() + " has zero leaf cost");
  }
  std::vector<job> jobs;
  for (index i = 0; i < cfg.instances.size(); ++i)
    for (index e = 0; e < cfg.eps.size(); ++e)
      for (index s = 0; s < cfg.seeds; ++s) jobs.push_back({i, e, s});

  std::vector<bench_record> out(jobs.size());
  std::atomic<index> next{0};
  auto worker = [&] {
    for (index j = next++; j < jobs.size(); j = next++) {
      const auto& jb = jobs[j];
      const update_rule rule{cfg.rule, cfg.first_seed + jb.seed};
      out[j] = measure(problems[jb.inst], constants[jb.inst], cfg.instances[jb.inst].id(), cfg.eps[jb.eps], rule,
                       cfg.delta, cfg.max_iters);
    }
  };
  const index n = std::max<index>(1, std::min(threads, jobs.size()));
  std::vector<std::thread> pool;
  for (index t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

/// Per (instance, eps): mean tau against the expectation bound and the share
/// of seeds above the high-probability bound.
inline std::vector<bench_summary> summarize(const std::vector<bench_record>& records)
{
  std::vector<bench_summary> out;
  std::map<std::pair<std::string, double>, index> slot;
  for (const auto& r : records) {
    auto [it, fresh] = slot.try_emplace({r.instance, r.eps}, out.size());
    if (fresh) out.push_back({r.instance, r.eps, 0, 0.0, r.bound_expectation, r.bound_probability, 0.0, false});
    auto& s = out[it->second];
    ++s.runs;
    s.mean_tau += static_cast<double>(r.tau);
    if (static_cast<double>(r.tau) > r.bound_probability) s.frac_over_probability += 1.0;
  }
  for (auto& s : out) {
    s.mean_tau /= static_cast<double>(s.runs);
    s.frac_over_probability /= static_cast<double>(s.runs);
    s.mean_within_bound = s.mean_tau <= s.bound_expectation;
  }
  return out;
}

/// Allowed share of seeds over the delta bound: delta plus three binomial standard deviations.
inline double exceedance_allowance(double delta, index runs)
{
  return delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(runs));
}

inline std::string to_csv(const std::vector<bench_record>& records, const std::vector<bench_summary>& summary)
{
  std::ostringstream os;
  char buf[512];
  os << "kind,instance,seed,rule,eps,eta,eps_prime,tau,bound_expectation,bound_probability,delta,wall_ns,msgs,"
        "diameter,avg_leaf_distance,runs,mean_tau,frac_over_probability,mean_within_bound\n";
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "record,%s,%llu,%s,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%lld,%zu,%zu,%.17g,,,,\n",
                  r.instance.c_str(), static_cast<unsigned long long>(r.seed), std::string(to_string(r.rule)).c_str(),
                  r.eps, r.eta, r.eps_prime, r.tau, r.bound_expectation, r.bound_probability, r.delta,
                  static_cast<long long>(r.wall_ns), r.msgs, r.diameter, r.avg_leaf_distance);
    os << buf;
  }
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "summary,%s,,,%.17g,,,,%.17g,%.17g,,,,,,%zu,%.17g,%.17g,%d\n", s.instance.c_str(),
                  s.eps, s.bound_expectation, s.bound_probability, s.runs, s.mean_tau, s.frac_over_probability,
                  s.mean_within_bound ? 1 : 0);
    os << buf;
  }
  return os.str();
}

} // namespace motgraph::bench
