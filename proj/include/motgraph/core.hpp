#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace motgraph {

using index = std::size_t;
using vector = std::vector<double>;

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// Row-major dense matrix of doubles.
class matrix {
public:
  matrix() = default;
  matrix(index rows, index cols, double fill = 0.0)
  : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  matrix(index rows, index cols, std::vector<double> data)
  : rows_(rows), cols_(cols), data_(std::move(data))
  {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("matrix: data length does not match shape");
  }

  index rows() const { return rows_; }
  index cols() const { return cols_; }
  index size() const { return data_.size(); }

  double& operator()(index i, index j) { assert(i < rows_ && j < cols_); return data_[i * cols_ + j]; }
  double operator()(index i, index j) const { assert(i < rows_ && j < cols_); return data_[i * cols_ + j]; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  matrix transposed() const
  {
    matrix t(cols_, rows_);
    for (index i = 0; i < rows_; ++i)
      for (index j = 0; j < cols_; ++j)
        t(j, i) = (*this)(i, j);
    return t;
  }

  vector row_sums() const
  {
    vector s(rows_, 0.0);
    for (index i = 0; i < rows_; ++i)
      for (index j = 0; j < cols_; ++j)
        s[i] += (*this)(i, j);
    return s;
  }

  vector col_sums() const
  {
    vector s(cols_, 0.0);
    for (index i = 0; i < rows_; ++i)
      for (index j = 0; j < cols_; ++j)
        s[j] += (*this)(i, j);
    return s;
  }

  double sum() const
  {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  double max_abs() const
  {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const matrix&, const matrix&) = default;

private:
  index rows_ = 0;
  index cols_ = 0;
  std::vector<double> data_;
};

enum class error_kind {
  cyclic_graph,
  disconnected,
  gamma_not_leaves,
  shape_mismatch,
  not_a_probability,
  invalid_cost,
  invalid_argument,
  stale_dependency,
  max_iters_exceeded,
  never_updated,
  inconsistent,
  too_large,
  infeasible,
  family_preservation_violated,
  running_intersection_violated,
  leaf_not_singleton,
  cost_not_covered,
  parse_error,
};

inline std::string_view to_string(error_kind k)
{
  switch (k) {
    case error_kind::cyclic_graph: return "CyclicGraph";
    case error_kind::disconnected: return "Disconnected";
    case error_kind::gamma_not_leaves: return "GammaNotLeaves";
    case error_kind::shape_mismatch: return "ShapeMismatch";
    case error_kind::not_a_probability: return "NotAProbability";
    case error_kind::invalid_cost: return "InvalidCost";
    case error_kind::invalid_argument: return "InvalidArgument";
    case error_kind::stale_dependency: return "StaleDependency";
    case error_kind::max_iters_exceeded: return "MaxItersExceeded";
    case error_kind::never_updated: return "NeverUpdated";
    case error_kind::inconsistent: return "Inconsistent";
    case error_kind::too_large: return "TooLarge";
    case error_kind::infeasible: return "Infeasible";
    case error_kind::family_preservation_violated: return "FamilyPreservationViolated";
    case error_kind::running_intersection_violated: return "RunningIntersectionViolated";
    case error_kind::leaf_not_singleton: return "LeafNotSingleton";
    case error_kind::cost_not_covered: return "CostNotCovered";
    case error_kind::parse_error: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library. what() starts with the kind name.
class mot_error : public std::runtime_error {
public:
  mot_error(error_kind kind, const std::string& detail)
  : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  error_kind kind() const { return kind_; }

private:
  error_kind kind_;
};

/// log(sum(exp(v))) with max shift; an empty or all -inf input yields -inf.
inline double log_sum_exp(std::span<const double> v)
{
  double mx = neg_inf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == neg_inf) return neg_inf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : neg_inf; }

inline vector log_of(std::span<const double> v)
{
  vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), safe_log);
  return out;
}

inline vector exp_of(std::span<const double> v)
{
  vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b)
{
  assert(a.size() == b.size());
  double s = 0.0;
  for (index i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double sum_of(std::span<const double> v)
{
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Generalized KL divergence sum p log(p/q) - p + q for nonnegative, not
/// necessarily normalized vectors. Terms with p = 0 contribute q.
inline double kl_divergence(std::span<const double> p, std::span<const double> q)
{
  assert(p.size() == q.size());
  double s = 0.0;
  for (index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0)
      s += p[i] * (std::log(p[i]) - std::log(q[i])) - p[i] + q[i];
    else
      s += q[i];
  }
  return s;
}

/// Calls f(flat, x) for every multi-index x over `shape` in row-major order
/// (last position fastest).
template<typename F>
void for_each_config(const std::vector<index>& shape, F&& f)
{
  index total = 1;
  for (index n : shape) total *= n;
  std::vector<index> x(shape.size(), 0);
  for (index flat = 0; flat < total; ++flat) {
    f(flat, static_cast<const std::vector<index>&>(x));
    for (index d = shape.size(); d-- > 0;) {
      if (++x[d] < shape[d]) break;
      x[d] = 0;
    }
  }
}

} // namespace motgraph
