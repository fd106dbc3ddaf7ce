#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace motgraph {

/// Marginal-selection rule for the Sinkhorn loop.
struct update_rule {
  enum class kind { random, cyclic, greedy };

  kind variant = kind::random;
  std::uint64_t seed = 0;

  static update_rule random(std::uint64_t seed) { return {kind::random, seed}; }
  static update_rule cyclic() { return {kind::cyclic, 0}; }
  static update_rule greedy() { return {kind::greedy, 0}; }
};

inline std::string_view to_string(update_rule::kind k)
{
  switch (k) {
    case update_rule::kind::random: return "random";
    case update_rule::kind::cyclic: return "cyclic";
    case update_rule::kind::greedy: return "greedy";
  }
  return "random";
}

inline update_rule::kind parse_rule_kind(std::string_view s)
{
  if (s == "random") return update_rule::kind::random;
  if (s == "cyclic") return update_rule::kind::cyclic;
  if (s == "greedy") return update_rule::kind::greedy;
  throw mot_error(error_kind::invalid_argument, "unknown update rule '" + std::string(s) + "'");
}

/// Uniform draw from [0, n) by rejection on raw mt19937_64 output, so the
/// sequence does not depend on the standard library's distributions.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n)
{
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do x = gen(); while (x >= limit);
  return x % n;
}

struct transcript_row {
  index t = 0;
  index k = 0;       // vertex updated at t (0-indexed); meaningless for t = 0
  double e = 0.0;    // Σ_k ||P_k - mu_k||_1, exact when `exact` is set
  double psi = 0.0;
  index msgs = 0;    // messages recomputed during this iteration
  std::int64_t wall_ns = 0;
  bool exact = false;
};

struct transcript {
  std::vector<transcript_row> rows;
  index tau = 0;
  update_rule rule;

  /// CSV with header `t,k,e_t,psi,msgs,wall_ns`; k is 1-indexed, 0 on the initial row.
  void write_csv(std::ostream& os) const
  {
    os << "t,k,e_t,psi,msgs,wall_ns\n";
    char buf[64];
    for (const auto& r : rows) {
      os << r.t << ',' << (r.t == 0 ? 0 : r.k + 1) << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.e);
      os << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.psi);
      os << buf << ',' << r.msgs << ',' << r.wall_ns << '\n';
    }
  }
};

struct solver_config {
  double eps_prime = 1e-3;
  index max_iters = 1'000'000;
  index error_refresh_period = 0; // 0 means |Γ|
  bool record_wall_time = false;
};

/// Expected-iteration bound 8|Γ|² R / (eta eps').
inline double expectation_bound(index gamma_size, double rc_gamma, double eta, double eps_prime)
{
  const double g = static_cast<double>(gamma_size);
  return 8.0 * g * g * rc_gamma / (eta * eps_prime);
}

/// High-probability bound 48|Γ|² R / (eta eps') log(1/delta).
inline double probability_bound(index gamma_size, double rc_gamma, double eta, double eps_prime, double delta)
{
  const double g = static_cast<double>(gamma_size);
  return 48.0 * g * g * rc_gamma / (eta * eps_prime) * std::log(1.0 / delta);
}

/// Ten times the delta = 0.01 high-probability bound, at least 1.
inline index default_max_iters(index gamma_size, double rc_gamma, double eta, double eps_prime)
{
  const double cap = 10.0 * probability_bound(gamma_size, rc_gamma, eta, eps_prime, 0.01);
  if (!(cap >= 1.0)) return 1;
  return cap > 1e12 ? index{1'000'000'000'000} : static_cast<index>(std::ceil(cap));
}

class max_iters_exceeded : public mot_error {
public:
  max_iters_exceeded(transcript partial, double last_error)
  : mot_error(error_kind::max_iters_exceeded,
              "no convergence within " + std::to_string(partial.rows.empty() ? 0 : partial.rows.back().t) +
              " iterations, last error " + std::to_string(last_error))
  , partial_(std::move(partial))
  , last_error_(last_error) {}

  const transcript& partial() const { return partial_; }
  double last_error() const { return last_error_; }

private:
  transcript partial_;
  double last_error_;
};

/// Quantities observed by one exact block update.
struct step_info {
  index k = 0;
  vector projection_before; // P_k(B(Λ^{(t-1)}))
  double l1_before = 0.0;   // ||mu_k - P_k||_1 before the update
  double kl = 0.0;          // generalized KL(mu_k || P_k) before the update
  double l1_after = 0.0;
  double mass_after = 0.0;  // P(B(Λ^{(t)})), read at k
};

/// One Sinkhorn update at leaf k: log u_k <- -log m_{l_k -> k}, after which
/// P_k(B) = mu_k. Requires the message into k to be current.
template<typename Engine>
step_info sinkhorn_step(Engine& engine, index k)
{
  const vector msg = engine.leaf_log_message(k);
  const auto& mu = engine.marginal(k);
  step_info info;
  info.k = k;
  info.projection_before = engine.leaf_projection(k);
  info.l1_before = l1_distance(mu, info.projection_before);
  // log(mu / P_k) = -log u_k - log m on supp(mu); the linear P_k may underflow
  const vector& log_u = engine.log_u(k);
  for (index x = 0; x < mu.size(); ++x) {
    if (mu[x] > 0.0) info.kl += mu[x] * (-log_u[x] - msg[x]) - mu[x];
    info.kl += info.projection_before[x];
  }

  vector next(msg.size());
  for (index x = 0; x < msg.size(); ++x) next[x] = -msg[x];
  engine.set_log_u(k, std::move(next));

  const vector after = engine.leaf_projection(k);
  info.l1_after = l1_distance(mu, after);
  info.mass_after = sum_of(after);
  return info;
}

/// max_x lambda_k - min_x lambda_k with lambda_k = eta log u_k.
template<typename Engine>
double lambda_range(const Engine& engine, index k)
{
  if (engine.state().updates.at(k) == 0)
    throw mot_error(error_kind::never_updated, "vertex " + std::to_string(k + 1) + " has not been updated");
  const auto& lu = engine.log_u(k);
  const auto [lo, hi] = std::minmax_element(lu.begin(), lu.end());
  return engine.eta() * (*hi - *lo);
}

struct run_result {
  transcript log;
  double error = 0.0;    // exact e_tau
  vector leaf_errors;    // ||P_k - mu_k||_1 per entry of Γ at termination
};

struct no_observer {
  template<typename Engine>
  void operator()(index, const step_info&, const Engine&) const {}
};

/// The Sinkhorn loop: initialise with a full message pass, then alternate
/// path refresh and block update until the exact error drops below eps'.
///
/// The exact error needs every leaf's incoming message, so it is evaluated by a
/// full pass every `error_refresh_period` iterations and whenever the running
/// estimate (exact at the leaf just updated, last known elsewhere) falls
/// below eps'. Termination is declared only on an exact evaluation.
template<typename Engine, typename Observer = no_observer>
run_result run(Engine& engine, const update_rule& rule, const solver_config& cfg, Observer&& observe = {})
{
  using clock = std::chrono::steady_clock;
  if (!(cfg.eps_prime > 0.0)) throw mot_error(error_kind::invalid_argument, "eps_prime must be positive");
  if (cfg.max_iters < 1) throw mot_error(error_kind::invalid_argument, "max_iters must be at least 1");

  const auto& gamma = engine.gamma();
  const index g = gamma.size();
  const index period = cfg.error_refresh_period ? cfg.error_refresh_period : g;
  std::mt19937_64 gen(rule.seed);

  run_result result;
  result.log.rule = rule;
  result.leaf_errors.assign(g, 0.0);

  auto exact_errors = [&] {
    for (index i = 0; i < g; ++i)
      result.leaf_errors[i] = l1_distance(engine.marginal(gamma[i]), engine.leaf_projection(gamma[i]));
    return sum_of(result.leaf_errors);
  };

  auto start = clock::now();
  transcript_row row;
  row.msgs = engine.refresh_all();
  row.e = exact_errors();
  row.psi = engine.dual_objective();
  row.exact = true;
  if (cfg.record_wall_time)
    row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count();
  result.log.rows.push_back(row);
  result.error = row.e;
  if (row.e < cfg.eps_prime) return result;

  index prev = 0; // position in gamma of k^{(t-1)}
  index since_refresh = 0;
  for (index t = 1; t <= cfg.max_iters; ++t) {
    start = clock::now();
    row = transcript_row{};
    row.t = t;

    index next = 0;
    switch (rule.variant) {
      case update_rule::kind::random:
        if (g > 1) {
          next = static_cast<index>(uniform_below(gen, g - 1));
          if (next >= prev) ++next;
        }
        break;
      case update_rule::kind::cyclic:
        next = (prev + 1) % g;
        break;
      case update_rule::kind::greedy:
        row.msgs += engine.refresh_all();
        exact_errors();
        for (index i = 1; i < g; ++i)
          if (result.leaf_errors[i] > result.leaf_errors[next]) next = i;
        break;
    }

    const index k = gamma[next];
    if (rule.variant != update_rule::kind::greedy) row.msgs += engine.refresh_path(gamma[prev], k);
    const step_info info = sinkhorn_step(engine, k);
    observe(t, info, static_cast<const Engine&>(engine));
    result.leaf_errors[next] = info.l1_after;
    ++since_refresh;

    if (sum_of(result.leaf_errors) < cfg.eps_prime || since_refresh >= period) {
      row.msgs += engine.refresh_all();
      exact_errors();
      since_refresh = 0;
      row.exact = true;
    }
    row.k = k;
    row.e = sum_of(result.leaf_errors);
    row.psi = engine.eta() * info.mass_after - engine.linear_term();
    if (cfg.record_wall_time)
      row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count();
    result.log.rows.push_back(row);
    prev = next;

    if (row.exact && row.e < cfg.eps_prime) {
      result.log.tau = t;
      result.error = row.e;
      return result;
    }
  }
  result.log.tau = cfg.max_iters;
  throw max_iters_exceeded(std::move(result.log), sum_of(result.leaf_errors));
}

} // namespace motgraph
