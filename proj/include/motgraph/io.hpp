#pragma once

// JSON problem files and result documents. Vertices are 1-indexed on disk.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "pipeline.hpp"
#include "problem.hpp"

namespace motgraph::io {

using json = nlohmann::json;

enum class graph_kind { automatic, tree, general };

struct problem_file {
  problem_data data;
  graph_kind kind = graph_kind::automatic;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& what) { throw mot_error(error_kind::parse_error, what); }

inline const json& field(const json& j, const char* key)
{
  if (!j.is_object() || !j.contains(key)) parse_fail(std::string("missing key '") + key + "'");
  return j.at(key);
}

inline index read_index(const json& j, const char* what)
{
  if (!j.is_number_integer() || j.get<long long>() < 0) parse_fail(std::string(what) + " must be a nonnegative integer");
  return j.get<index>();
}

inline vector read_numbers(const json& j, const char* what)
{
  if (!j.is_array()) parse_fail(std::string(what) + " must be an array of numbers");
  vector out;
  for (const auto& x : j) {
    if (!x.is_number()) parse_fail(std::string(what) + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

/// Accepts a flat row-major array or an array of rows.
inline matrix read_matrix(const json& j, index rows, index cols, const char* what)
{
  vector flat;
  if (j.is_array() && !j.empty() && j.front().is_array()) {
    if (j.size() != rows) throw mot_error(error_kind::shape_mismatch, std::string(what) + " has the wrong number of rows");
    for (const auto& r : j) {
      const vector row = read_numbers(r, what);
      if (row.size() != cols) throw mot_error(error_kind::shape_mismatch, std::string(what) + " has a row of the wrong length");
      flat.insert(flat.end(), row.begin(), row.end());
    }
  } else {
    flat = read_numbers(j, what);
    if (flat.size() != rows * cols)
      throw mot_error(error_kind::shape_mismatch, std::string(what) + " has " + std::to_string(flat.size()) +
                                                  " entries, expected " + std::to_string(rows * cols));
  }
  return matrix(rows, cols, std::move(flat));
}

inline json::array_t flat_array(const matrix& m) { return json::array_t(m.data().begin(), m.data().end()); }

} // namespace detail

inline problem_file parse_problem(const json& j)
{
  problem_file out;
  auto& p = out.data;
  p.m = detail::read_index(detail::field(j, "m"), "m");
  for (const auto& n : detail::field(j, "supports")) p.support_sizes.push_back(detail::read_index(n, "supports"));
  if (p.support_sizes.size() != p.m)
    throw mot_error(error_kind::shape_mismatch, "supports must list one size per vertex");

  auto vertex = [&](const json& v) {
    const index x = detail::read_index(v, "vertex id");
    if (x < 1 || x > p.m) detail::parse_fail("vertex id " + std::to_string(x) + " outside 1.." + std::to_string(p.m));
    return x - 1;
  };
  for (const auto& e : detail::field(j, "edges")) {
    cost_matrix c;
    c.tail = vertex(detail::field(e, "u"));
    c.head = vertex(detail::field(e, "v"));
    c.entries = detail::read_matrix(detail::field(e, "cost"), p.support_sizes[c.tail], p.support_sizes[c.head], "cost");
    p.edges.push_back(std::move(c));
  }
  p.marginals.assign(p.m, {});
  for (const auto& g : detail::field(j, "gamma")) {
    const index k = vertex(detail::field(g, "vertex"));
    if (std::find(p.gamma.begin(), p.gamma.end(), k) != p.gamma.end())
      detail::parse_fail("vertex " + std::to_string(k + 1) + " listed twice in gamma");
    p.gamma.push_back(k);
    p.marginals[k] = detail::read_numbers(detail::field(g, "marginal"), "marginal");
  }
  std::sort(p.gamma.begin(), p.gamma.end());

  if (j.contains("graph_type")) {
    const auto& t = j.at("graph_type");
    if (t == "tree") out.kind = graph_kind::tree;
    else if (t == "general") out.kind = graph_kind::general;
    else detail::parse_fail("graph_type must be \"tree\" or \"general\"");
  }
  return out;
}

inline json problem_to_json(const problem_data& p, graph_kind kind = graph_kind::automatic)
{
  json j;
  j["m"] = p.m;
  j["supports"] = p.support_sizes;
  j["edges"] = json::array();
  for (const auto& e : p.edges)
    j["edges"].push_back({{"u", e.tail + 1}, {"v", e.head + 1}, {"cost", detail::flat_array(e.entries)}});
  j["gamma"] = json::array();
  for (index k : p.gamma) j["gamma"].push_back({{"vertex", k + 1}, {"marginal", p.marginals[k]}});
  if (kind == graph_kind::tree) j["graph_type"] = "tree";
  if (kind == graph_kind::general) j["graph_type"] = "general";
  return j;
}

inline json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw mot_error(error_kind::parse_error, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw mot_error(error_kind::parse_error, path + ": " + e.what());
  }
}

inline problem_file read_problem_file(const std::string& path)
{
  try {
    return parse_problem(read_json_file(path));
  } catch (const json::exception& e) {
    throw mot_error(error_kind::parse_error, path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mot_error(error_kind::invalid_argument, "cannot write " + path);
  out << text;
}

/// Doubles are written in the shortest form that reads back to the same value.
inline void write_problem_file(const std::string& path, const problem_data& p, graph_kind kind = graph_kind::automatic)
{
  write_text(path, problem_to_json(p, kind).dump(2) + "\n");
}

/// True when the edges form a tree whose leaves are exactly Γ.
inline bool is_tree_problem(const problem_data& p)
{
  if (p.edges.size() + 1 != p.m) return false;
  try {
    validate_tree_problem(p);
    return true;
  } catch (const mot_error& e) {
    return e.kind() != error_kind::cyclic_graph && e.kind() != error_kind::disconnected &&
           e.kind() != error_kind::gamma_not_leaves;
  }
}

inline json result_to_json(const problem_data& p, const approx_result& r)
{
  json j;
  j["cost"] = r.cost;
  j["certificate"] = certificate(r);
  j["eta"] = r.eta;
  j["eps_prime"] = r.eps_prime;
  j["tau"] = r.log.tau;
  j["rc_gamma"] = r.rc_gamma;
  j["rule"] = std::string(to_string(r.log.rule.variant));
  j["seed"] = r.log.rule.seed;
  j["plans"] = json::array();
  for (index e = 0; e < p.edges.size(); ++e)
    j["plans"].push_back({{"u", p.edges[e].tail + 1},
                          {"v", p.edges[e].head + 1},
                          {"rows", r.plans.plans[e].rows()},
                          {"cols", r.plans.plans[e].cols()},
                          {"plan", detail::flat_array(r.plans.plans[e])}});
  json leaves = json::array();
  for (const auto& [k, l1] : r.report.per_leaf_l1)
    leaves.push_back({{"vertex", k + 1}, {"l1_before_rounding", l1}, {"rc", r.rc_per_leaf.at(k)}});
  j["leaves"] = leaves;
  j["cost_before_rounding"] = r.report.cost_before;
  if (!r.cluster_marginals.empty()) j["cluster_marginals"] = r.cluster_marginals;
  return j;
}

/// `result.json` -> `result.transcript.csv`.
inline std::string transcript_path(const std::string& out)
{
  const auto dot = out.rfind('.');
  const auto slash = out.find_last_of("/\\");
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + ".transcript.csv";
}

inline std::string transcript_csv(const transcript& t)
{
  std::ostringstream os;
  t.write_csv(os);
  return os.str();
}

} // namespace motgraph::io
