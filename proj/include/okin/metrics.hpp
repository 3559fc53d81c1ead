#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "okin/model.hpp"

namespace okin {

// ---------------------------------------------------------------------------
// Discrete probability measures on the line
// ---------------------------------------------------------------------------

// Atoms sorted by value; total mass must be 1 within 1e-12. Equal values may
// appear as separate atoms (the transport sweep is insensitive to that).
struct WeightedSample1D {
  std::vector<double> value;
  std::vector<double> weight;

  WeightedSample1D() = default;

  WeightedSample1D(std::vector<double> v, std::vector<double> wt)
      : value(std::move(v)), weight(std::move(wt)) {
    if (value.size() != weight.size() || value.empty())
      throw std::invalid_argument("weighted sample: size mismatch or empty");
    double total = 0.0;
    for (double x : weight) {
      if (!(x >= 0.0))
        throw std::invalid_argument("weighted sample: negative weight");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("weighted sample: mass not 1");
    if (!std::is_sorted(value.begin(), value.end())) {
      std::vector<std::size_t> order(value.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return value[a] < value[b];
      });
      std::vector<double> v2(value.size()), w2(value.size());
      for (std::size_t k = 0; k < order.size(); ++k) {
        v2[k] = value[order[k]];
        w2[k] = weight[order[k]];
      }
      value = std::move(v2);
      weight = std::move(w2);
    }
  }

  // Equal-weight empirical measure. Constructed directly (mass is 1 by
  // construction; the checking constructor would reject large samples whose
  // accumulated weight drifts a few ulp from 1).
  static WeightedSample1D from_values(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("weighted sample: empty");
    WeightedSample1D s;
    std::sort(v.begin(), v.end());
    const double wt = 1.0 / static_cast<double>(v.size());
    s.weight.assign(v.size(), wt);
    s.value = std::move(v);
    return s;
  }

  static WeightedSample1D dirac(double c) {
    WeightedSample1D s;
    s.value = {c};
    s.weight = {1.0};
    return s;
  }
};

// Exact 1-D optimal transport cost between discrete measures:
// integral of |F_mu(x) - F_nu(x)| dx via one merged sweep over the atoms.
inline double w1(const WeightedSample1D& mu, const WeightedSample1D& nu) {
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0;  // CDFs just left of the sweep point
  double dist = 0.0;
  double x_prev = 0.0;
  bool started = false;
  while (i < mu.value.size() || j < nu.value.size()) {
    double x;
    if (j >= nu.value.size() ||
        (i < mu.value.size() && mu.value[i] <= nu.value[j]))
      x = mu.value[i];
    else
      x = nu.value[j];
    if (started) dist += std::abs(fa - fb) * (x - x_prev);
    while (i < mu.value.size() && mu.value[i] == x) fa += mu.weight[i++];
    while (j < nu.value.size() && nu.value[j] == x) fb += nu.weight[j++];
    x_prev = x;
    started = true;
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Moments over populations
// ---------------------------------------------------------------------------

enum class Subset { All, Flexible, Stubborn };

namespace detail {

template <class Fn>
inline void for_subset(const PopulationState& s, Subset which, Fn&& fn) {
  const std::size_t stub_end = s.group_begin[s.n_stubborn_groups];
  std::size_t lo = 0, hi = s.size();
  if (which == Subset::Stubborn) hi = stub_end;
  if (which == Subset::Flexible) lo = stub_end;
  for (std::size_t k = lo; k < hi; ++k) fn(k);
}

}  // namespace detail

// Persuasion-weighted mean opinion: sum(p*w) / sum(p) over the subset.
inline double weighted_mean_opinion(const PopulationState& s,
                                    Subset which = Subset::All) {
  double pw = 0.0, p = 0.0;
  detail::for_subset(s, which, [&](std::size_t k) {
    pw += s.p[k] * s.w[k];
    p += s.p[k];
  });
  if (!(p > 0.0)) throw std::invalid_argument("zero total persuasion");
  return pw / p;
}

inline double weighted_mean_opinion(const std::vector<double>& w,
                                    const std::vector<double>& p) {
  double pw = 0.0, pt = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    pw += p[k] * w[k];
    pt += p[k];
  }
  if (!(pt > 0.0)) throw std::invalid_argument("zero total persuasion");
  return pw / pt;
}

// Mass-weighted sum over flexible groups of W1(group empirical law, dirac at
// m00). For a Dirac target the per-group transport cost collapses to the
// mean absolute deviation, so the whole statistic is a single O(n) pass.
// group_weights are the flexible weights (within-component, sum 1).
inline double w1_to_limit(const PopulationState& s, double m00,
                          const std::vector<double>& group_weights) {
  const std::size_t n_flex_groups = s.n_groups() - s.n_stubborn_groups;
  if (group_weights.size() != n_flex_groups)
    throw std::invalid_argument("w1_to_limit: group weight count mismatch");
  double total = 0.0;
  for (std::size_t g = 0; g < n_flex_groups; ++g) {
    const std::size_t b = s.group_begin[s.n_stubborn_groups + g];
    const std::size_t e = s.group_begin[s.n_stubborn_groups + g + 1];
    double acc = 0.0;
    for (std::size_t k = b; k < e; ++k) acc += std::abs(s.w[k] - m00);
    total += group_weights[g] * acc / static_cast<double>(e - b);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Exponential-decay fitting
// ---------------------------------------------------------------------------

struct RateFit {
  double rate = 0.0;       // |slope| of the log-linear fit
  double prefactor = 0.0;  // exp(intercept)
  double r2 = 0.0;
  std::size_t n_used = 0;
};

// Least squares on (t, log d) restricted to d > floor. Points at or below
// the floor are sampling noise and would bias the rate toward zero.
inline RateFit fit_decay_rate(const std::vector<double>& t,
                              const std::vector<double>& d, double floor) {
  if (t.size() != d.size())
    throw std::invalid_argument("fit_decay_rate: size mismatch");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (d[k] > floor) {
      x.push_back(t[k]);
      y.push_back(std::log(d[k]));
    }
  }
  if (x.size() < 3)
    throw std::invalid_argument("insufficient points above floor");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (double v : x) sx += v;
  for (double v : y) sy += v;
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument("fit_decay_rate: degenerate abscissae");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  RateFit fit;
  fit.rate = std::abs(slope);
  fit.prefactor = std::exp(intercept);
  const double ss_res = syy - sxy * sxy / sxx;
  fit.r2 = (syy > 0.0) ? 1.0 - ss_res / syy : 1.0;
  fit.n_used = x.size();
  return fit;
}

// ---------------------------------------------------------------------------
// Recorded observables
// ---------------------------------------------------------------------------

struct TimeSeriesRow {
  double tau = 0.0;
  double m_t = 0.0;                 // persuasion-weighted mean, all agents
  double max_abs_mean_error = 0.0;  // max_i |mean_g{i} - m00|
  double w1_to_limit = 0.0;
  double min_w = 0.0;
  double max_w = 0.0;
  std::vector<double> group_mean;  // flexible groups, declaration order
  std::vector<double> group_diam;
};

struct TimeSeries {
  std::vector<TimeSeriesRow> rows;

  std::vector<double> taus() const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.tau);
    return v;
  }
  std::vector<double> w1s() const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.w1_to_limit);
    return v;
  }
};

}  // namespace okin
