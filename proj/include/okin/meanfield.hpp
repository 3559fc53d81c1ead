#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "okin/model.hpp"

namespace okin {

// ---------------------------------------------------------------------------
// The linear system for flexible group means
// ---------------------------------------------------------------------------

// M'(t) = A M(t) + B over the flexible group means, with
//   A_ij = q_i (1-alpha0) alpha_j p_j          (j != i)
//   A_ii = q_i ((1-alpha0) alpha_i p_i - <p>)
//   B_i  = alpha0 <p>_stub m00 q_i
// Two identities hold exactly and are validated on assembly:
//   A (1,...,1)^T = -alpha0 <p>_stub (q_1,...,q_n)^T
//   A (-m00 (1,...,1)^T) = B        (so the equilibrium is m00 1 without
//                                    ever forming a matrix inverse)
// Flexible groups sharing exactly the same (p,q) follow identical dynamics,
// so they are merged into one row (weights summed); row_of_group maps the
// original flexible group order onto rows.
struct MeanFieldSystem {
  std::size_t n = 0;
  std::vector<double> weight;  // per row, sums to 1
  std::vector<double> p;
  std::vector<double> q;
  double alpha0 = 0.0;
  double mean_p_stubborn = 0.0;
  double mean_p = 0.0;
  double m00 = 0.0;
  double eps0 = 0.0;
  std::vector<double> A;  // n*n, row-major
  std::vector<double> B;  // n
  std::vector<std::size_t> row_of_group;

  // Guaranteed decay rate of max_i |M_i(t) - m00|.
  double rate_exponent() const { return eps0 * alpha0 * mean_p_stubborn; }

  double a_inf_norm() const {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += std::abs(A[i * n + j]);
      best = std::max(best, row);
    }
    return best;
  }

  // Fixed RK4 step: comfortably inside the stability region of the
  // dissipative RHS while small enough that time-discretization error is
  // negligible against the tolerances used downstream.
  double default_dt() const {
    const double nrm = a_inf_norm();
    return nrm > 0.0 ? std::min(0.01, 0.25 / nrm) : 0.01;
  }

  void apply(const std::vector<double>& m, std::vector<double>& out) const {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = B[i];
      const double* row = A.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * m[j];
      out[i] = acc;
    }
  }
};

inline MeanFieldSystem assemble(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.alpha0 == 0.0) throw std::invalid_argument("alpha0 zero");
  const ScenarioStats stats = scenario_stats(cfg);

  MeanFieldSystem sys;
  sys.alpha0 = cfg.alpha0;
  sys.mean_p_stubborn = stats.mean_p_stubborn;
  sys.mean_p = stats.mean_p;
  sys.m00 = *stats.m00;
  sys.eps0 = stats.eps0;

  // Merge flexible groups with identical (p,q): their mean ODEs coincide,
  // and the mass-weighted average of their means satisfies the merged row
  // exactly (the coupling enters only through sum_j alpha_j p_j M_j).
  std::map<std::pair<double, double>, std::size_t> row_of;
  for (const auto& g : cfg.flexible_groups) {
    const auto key = std::make_pair(g.p, g.q);
    auto it = row_of.find(key);
    if (it == row_of.end()) {
      row_of.emplace(key, sys.n);
      sys.row_of_group.push_back(sys.n);
      sys.weight.push_back(g.weight);
      sys.p.push_back(g.p);
      sys.q.push_back(g.q);
      ++sys.n;
    } else {
      sys.row_of_group.push_back(it->second);
      sys.weight[it->second] += g.weight;
    }
  }

  const std::size_t n = sys.n;
  sys.A.assign(n * n, 0.0);
  sys.B.assign(n, 0.0);
  const double off = 1.0 - cfg.alpha0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      sys.A[i * n + j] = sys.q[i] * off * sys.weight[j] * sys.p[j];
    sys.A[i * n + i] = sys.q[i] * (off * sys.weight[i] * sys.p[i] - sys.mean_p);
    sys.B[i] = cfg.alpha0 * sys.mean_p_stubborn * sys.m00 * sys.q[i];
  }

  // Exact identities; a violation indicates a construction bug, not data.
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0, row_dot_limit = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_sum += sys.A[i * n + j];
      row_dot_limit += sys.A[i * n + j] * (-sys.m00);
    }
    const double id1 = row_sum + cfg.alpha0 * sys.mean_p_stubborn * sys.q[i];
    const double id2 = row_dot_limit - sys.B[i];
    if (std::abs(id1) > 1e-12 || std::abs(id2) > 1e-12)
      throw std::logic_error("assemble: exact identity violated");
  }
  return sys;
}

// Initial condition for the merged rows: mass-weighted average of the
// initial opinion means of the groups merged into each row.
inline std::vector<double> initial_means(const ScenarioConfig& cfg,
                                         const MeanFieldSystem& sys) {
  std::vector<double> m0(sys.n, 0.0), mass(sys.n, 0.0);
  for (std::size_t g = 0; g < cfg.flexible_groups.size(); ++g) {
    const std::size_t r = sys.row_of_group[g];
    m0[r] += cfg.flexible_groups[g].weight * cfg.flexible_groups[g].w0.mean();
    mass[r] += cfg.flexible_groups[g].weight;
  }
  for (std::size_t r = 0; r < sys.n; ++r) m0[r] /= mass[r];
  return m0;
}

// Population-wide weighted mean opinion induced by row means M.
inline double mean_opinion(const MeanFieldSystem& sys,
                           const std::vector<double>& m) {
  double flex = 0.0;
  for (std::size_t j = 0; j < sys.n; ++j)
    flex += sys.weight[j] * sys.p[j] * m[j];
  return (sys.alpha0 * sys.mean_p_stubborn * sys.m00 +
          (1.0 - sys.alpha0) * flex) /
         sys.mean_p;
}

// ---------------------------------------------------------------------------
// RK4 integration of the mean system
// ---------------------------------------------------------------------------

struct MeanTrajectory {
  double dt = 0.0;                      // actual uniform step used
  std::vector<double> times;            // 0, dt, ..., t_end
  std::vector<std::vector<double>> M;   // one row-mean vector per time
  std::vector<double> m_t;              // weighted mean opinion per time

  // Piecewise-linear interpolation of m_t (clamped at the ends).
  double m_at(double t) const {
    if (times.size() == 1 || t <= times.front()) return m_t.front();
    if (t >= times.back()) return m_t.back();
    const double pos = t / dt;
    auto k = static_cast<std::size_t>(pos);
    k = std::min(k, times.size() - 2);
    const double frac = (t - times[k]) / dt;
    return m_t[k] + frac * (m_t[k + 1] - m_t[k]);
  }
};

inline MeanTrajectory solve_means(const MeanFieldSystem& sys,
                                  std::vector<double> m0, double t_end,
                                  double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_means: dt must be > 0");
  if (m0.size() != sys.n)
    throw std::invalid_argument("solve_means: initial size mismatch");
  for (double v : m0)
    if (std::abs(v) > 1.0 + 1e-12)
      throw std::invalid_argument("solve_means: initial mean outside [-1,1]");
  if (!(t_end >= 0.0))
    throw std::invalid_argument("solve_means: t_end must be >= 0");

  const auto n_steps =
      t_end > 0.0 ? static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9))
                  : std::size_t{0};
  const double h = n_steps > 0 ? t_end / static_cast<double>(n_steps) : dt;

  MeanTrajectory out;
  out.dt = h;
  out.times.reserve(n_steps + 1);
  out.M.reserve(n_steps + 1);
  out.m_t.reserve(n_steps + 1);

  std::vector<double> m = std::move(m0);
  std::vector<double> k1(sys.n), k2(sys.n), k3(sys.n), k4(sys.n),
      tmp(sys.n);
  auto record = [&](double t) {
    out.times.push_back(t);
    out.M.push_back(m);
    out.m_t.push_back(sys.n > 0 ? mean_opinion(sys, m)
                                : sys.m00);  // all-stubborn: constant
  };
  record(0.0);
  for (std::size_t s = 1; s <= n_steps; ++s) {
    sys.apply(m, k1);
    for (std::size_t i = 0; i < sys.n; ++i) tmp[i] = m[i] + 0.5 * h * k1[i];
    sys.apply(tmp, k2);
    for (std::size_t i = 0; i < sys.n; ++i) tmp[i] = m[i] + 0.5 * h * k2[i];
    sys.apply(tmp, k3);
    for (std::size_t i = 0; i < sys.n; ++i) tmp[i] = m[i] + h * k3[i];
    sys.apply(tmp, k4);
    for (std::size_t i = 0; i < sys.n; ++i) {
      m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (std::abs(m[i]) > 1.0 + 1e-6)
        throw std::runtime_error("unstable step");
    }
    record(h * static_cast<double>(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quantile characteristics
// ---------------------------------------------------------------------------

// Shared grid: R midpoints r_j = (j - 1/2)/R plus the endpoint r = 1, which
// tracks the supremum characteristic (needed for diameter bounds). Group
// means are reconstructed from the midpoints alone (midpoint rule).
struct QuantileGrid {
  std::size_t R = 0;
  std::vector<double> r;  // size R + 1

  static QuantileGrid make(std::size_t R) {
    if (R < 2) throw std::invalid_argument("quantile grid: R must be >= 2");
    QuantileGrid g;
    g.R = R;
    g.r.reserve(R + 1);
    for (std::size_t j = 1; j <= R; ++j)
      g.r.push_back((static_cast<double>(j) - 0.5) / static_cast<double>(R));
    g.r.push_back(1.0);
    return g;
  }
};

// One set of quantile values per flexible group (profiles are per original
// group, not per merged row: groups sharing (p,q) may still differ in their
// initial opinion law).
struct QuantileProfiles {
  QuantileGrid grid;
  std::vector<double> q;     // openness per profile
  std::vector<double> mass;  // flexible weight per profile, sums to 1
  std::vector<std::vector<double>> x;  // per profile: grid.r.size() values

  std::size_t n_profiles() const { return x.size(); }

  double profile_mean(std::size_t i) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.R; ++j) acc += x[i][j];
    return acc / static_cast<double>(grid.R);
  }

  // X_i(1) - X_i(r_j): mass beyond r_j collapses at this scale.
  double diameter_above(std::size_t i, std::size_t j) const {
    return x[i].back() - x[i][j];
  }
};

inline QuantileProfiles initial_profiles(const ScenarioConfig& cfg,
                                         std::size_t R) {
  QuantileProfiles prof;
  prof.grid = QuantileGrid::make(R);
  for (const auto& g : cfg.flexible_groups) {
    prof.q.push_back(g.q);
    prof.mass.push_back(g.weight);
    std::vector<double> vals;
    vals.reserve(prof.grid.r.size());
    for (double r : prof.grid.r) vals.push_back(g.w0.quantile(r));
    prof.x.push_back(std::move(vals));
  }
  return prof;
}

// Flow the quantile nodes along dX/dt = q_i <p> (m(t) - X) with classical
// RK4 per node, m(t) linearly interpolated from the mean trajectory.
// Snapshots are taken exactly at the requested times (the integrator lands
// on them with shortened uniform substeps). Monotonicity in r is checked
// after every step; the exact flow is order-preserving, so a violation is a
// numerical failure.
inline std::vector<QuantileProfiles> flow_quantiles_path(
    const MeanFieldSystem& sys, QuantileProfiles prof,
    const MeanTrajectory& m_of_t, const std::vector<double>& sample_times,
    double dt) {
  if (!(dt > 0.0))
    throw std::invalid_argument("flow_quantiles: dt must be > 0");
  if (!std::is_sorted(sample_times.begin(), sample_times.end()))
    throw std::invalid_argument("flow_quantiles: sample times unsorted");

  std::vector<QuantileProfiles> out;
  out.reserve(sample_times.size());
  double t = 0.0;

  auto check_monotone = [&] {
    for (const auto& xs : prof.x)
      for (std::size_t j = 0; j + 1 < xs.size(); ++j)
        if (xs[j] > xs[j + 1] + 1e-12)
          throw std::runtime_error("monotonicity violated");
  };
  check_monotone();

  for (double target : sample_times) {
    if (target < t - 1e-12)
      throw std::invalid_argument("flow_quantiles: sample time in the past");
    const double span = std::max(0.0, target - t);
    const auto n_steps =
        span > 0.0 ? static_cast<std::size_t>(std::ceil(span / dt - 1e-9))
                   : std::size_t{0};
    const double h = n_steps > 0 ? span / static_cast<double>(n_steps) : 0.0;
    for (std::size_t s = 0; s < n_steps; ++s) {
      const double m0 = m_of_t.m_at(t);
      const double mh = m_of_t.m_at(t + 0.5 * h);
      const double m1 = m_of_t.m_at(t + h);
      for (std::size_t i = 0; i < prof.n_profiles(); ++i) {
        const double a = prof.q[i] * sys.mean_p;
        for (double& xv : prof.x[i]) {
          const double k1 = a * (m0 - xv);
          const double k2 = a * (mh - (xv + 0.5 * h * k1));
          const double k3 = a * (mh - (xv + 0.5 * h * k2));
          const double k4 = a * (m1 - (xv + h * k3));
          xv += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
      }
      t += h;
      check_monotone();
    }
    t = target;  // absorb accumulated rounding at the landing point
    out.push_back(prof);
  }
  return out;
}

inline QuantileProfiles flow_quantiles(const MeanFieldSystem& sys,
                                       QuantileProfiles prof,
                                       const MeanTrajectory& m_of_t,
                                       double t_end, double dt) {
  auto path =
      flow_quantiles_path(sys, std::move(prof), m_of_t, {t_end}, dt);
  return std::move(path.back());
}

// ---------------------------------------------------------------------------
// The long-time limit
// ---------------------------------------------------------------------------

// Stubborn component unchanged; every flexible group collapses onto a Dirac
// at m00 while keeping its (p,q) marginal. The approach is exponential with
// guaranteed exponent eps0 * alpha0 * <p>_stub and prefactor 4.
struct LimitDistribution {
  double alpha0 = 0.0;
  double m00 = 0.0;
  double rate_exponent = 0.0;
  double prefactor = 4.0;
  std::vector<GroupSpec> stubborn;
  std::vector<GroupSpec> flexible;  // w0 replaced by Point(m00)

  // Upper bound 4 e^{-rate t} on W1(f_t restricted to flexible, limit).
  double bound(double t) const {
    if (flexible.empty()) return 0.0;
    return prefactor * std::exp(-rate_exponent * t);
  }
};

inline LimitDistribution limit_distribution(const ScenarioConfig& cfg) {
  cfg.validate();
  const ScenarioStats stats = scenario_stats(cfg);
  if (!stats.m00) throw std::invalid_argument("no stubborn mass");
  LimitDistribution lim;
  lim.alpha0 = cfg.alpha0;
  lim.m00 = *stats.m00;
  lim.rate_exponent =
      cfg.flexible_groups.empty() ? 0.0 : stats.eps0 * cfg.alpha0 *
                                              stats.mean_p_stubborn;
  lim.stubborn = cfg.stubborn_groups;
  for (const auto& g : cfg.flexible_groups) {
    GroupSpec d = g;
    d.w0 = OpinionDist::point(std::clamp(lim.m00, -1.0, 1.0));
    lim.flexible.push_back(d);
  }
  return lim;
}

// ---------------------------------------------------------------------------
// Exact-identity verification
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_err = 0.0;
  std::string detail;
};

// Matrix-level checks, applicable to any (possibly hand-corrupted) system.
inline std::vector<CheckResult> verify_system(const MeanFieldSystem& sys) {
  std::vector<CheckResult> out;
  const std::size_t n = sys.n;

  double e1 = 0.0, e2 = 0.0, e3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0, abs_off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_sum += sys.A[i * n + j];
      if (j != i) abs_off += std::abs(sys.A[i * n + j]);
    }
    e1 = std::max(e1, std::abs(row_sum + sys.alpha0 * sys.mean_p_stubborn *
                                             sys.q[i]));
    e2 = std::max(e2, std::abs(row_sum * (-sys.m00) - sys.B[i]));
    const double gersh = sys.A[i * n + i] + abs_off;
    e3 = std::max(e3, std::abs(gersh + sys.q[i] * sys.mean_p_stubborn *
                                           sys.alpha0));
  }
  out.push_back({"A·1 identity", e1 <= 1e-12, e1,
                 "A(1,...,1)^T + alpha0 <p>_stub (q_1,...,q_n)^T"});
  out.push_back({"A^{-1}B identity", e2 <= 1e-12, e2,
                 "A(-m00 (1,...,1)^T) - B"});
  out.push_back({"Gerschgorin row sums", e3 <= 1e-12, e3,
                 "a_ii + sum_{k!=i}|a_ik| + q_i <p>_stub alpha0"});
  return out;
}

}  // namespace okin
