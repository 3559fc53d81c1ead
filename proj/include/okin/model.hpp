#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "okin/rng.hpp"

namespace okin {

// ---------------------------------------------------------------------------
// Self-influence damping D(|w|) applied to the noise term. All three choices
// vanish at the boundary |w| = 1 so noise cannot push an agent out of the
// opinion interval when the perturbation is admissible.
// ---------------------------------------------------------------------------

enum class NoiseKind { Quadratic, Linear, SqrtQuad };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Quadratic: return "quadratic";
    case NoiseKind::Linear: return "linear";
    case NoiseKind::SqrtQuad: return "sqrtquad";
  }
  return "?";
}

inline double noise_damping(NoiseKind k, double w) {
  const double a = std::abs(w);
  switch (k) {
    case NoiseKind::Quadratic: return 1.0 - w * w;
    case NoiseKind::Linear: return 1.0 - a;
    case NoiseKind::SqrtQuad: return std::sqrt(std::max(0.0, 1.0 - w * w));
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Agents and pairwise interaction
// ---------------------------------------------------------------------------

// w: opinion in [-1,1]; p: persuasiveness in [0,1]; q: openness in [0,1].
// Stubborn agents have q = 0 exactly and never move.
struct Agent {
  double w = 0.0;
  double p = 0.0;
  double q = 0.0;
};

// One binary exchange. Each side moves toward the other proportionally to its
// own openness and the partner's persuasiveness, plus a damped noise kick:
//
//   w_a' = w_a + gamma * q_a * p_b * (w_b - w_a) + eta_a * q_a * D(|w_a|)
//   w_b' = w_b + gamma * q_b * p_a * (w_a - w_b) + eta_b * q_b * D(|w_b|)
//
// Callers are responsible for drawing eta_* and re-drawing when the update
// would leave [-1,1] (see collision.hpp); interact itself is a pure formula.
inline std::pair<double, double> interact(const Agent& a, const Agent& b,
                                          double gamma, double eta_a,
                                          double eta_b, NoiseKind kind) {
  const double wa = a.w + gamma * a.q * b.p * (b.w - a.w) +
                    eta_a * a.q * noise_damping(kind, a.w);
  const double wb = b.w + gamma * b.q * a.p * (a.w - b.w) +
                    eta_b * b.q * noise_damping(kind, b.w);
  return {wa, wb};
}

// ---------------------------------------------------------------------------
// Initial opinion distributions
// ---------------------------------------------------------------------------

// Point(a) or Uniform(a, b) on [-1, 1]. Enough to express every scenario in
// scope while keeping quantile functions in closed form.
class OpinionDist {
 public:
  static OpinionDist point(double a) {
    check_bounds(a, a);
    return OpinionDist{a, a};
  }

  static OpinionDist uniform(double a, double b) {
    check_bounds(a, b);
    return OpinionDist{a, b};
  }

  bool is_point() const { return lo_ == hi_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  double mean() const { return 0.5 * (lo_ + hi_); }

  double sample(Rng& rng) const {
    return is_point() ? lo_ : rng.uniform(lo_, hi_);
  }

  // Generalized inverse CDF evaluated at r in [0,1].
  double quantile(double r) const { return lo_ + r * (hi_ - lo_); }

  bool operator==(const OpinionDist&) const = default;

 private:
  OpinionDist(double lo, double hi) : lo_(lo), hi_(hi) {}

  static void check_bounds(double a, double b) {
    if (!(a <= b)) throw std::invalid_argument("opinion interval reversed");
    if (!(a >= -1.0) || !(b <= 1.0))
      throw std::invalid_argument("opinion support outside [-1,1]");
  }

  double lo_;
  double hi_;
};

// ---------------------------------------------------------------------------
// Scenario description
// ---------------------------------------------------------------------------

// One homogeneous sub-population: a mass fraction *within its component*
// (stubborn weights sum to 1, flexible weights sum to 1), shared (p, q), and
// an initial opinion law.
struct GroupSpec {
  double weight = 0.0;
  double p = 0.0;
  double q = 0.0;
  OpinionDist w0 = OpinionDist::point(0.0);

  bool operator==(const GroupSpec&) const = default;
};

struct ScenarioConfig {
  std::size_t n_agents = 0;
  double alpha0 = 0.0;  // stubborn mass fraction in [0,1]
  double gamma = 0.0;   // compromise strength in (0, 1/2)
  double sigma = 0.0;   // noise amplitude, eta = sigma * Y
  NoiseKind noise = NoiseKind::Quadratic;
  double tau_end = 0.0;       // horizon in slow time tau = gamma * t
  double record_every = 0.0;  // recording cadence in tau
  std::uint64_t seed = 0;
  std::size_t quantile_points = 1024;  // R for transport quantile grids
  double dt_meanfield = 0.01;          // RK4 step cap for the mean system
  std::vector<GroupSpec> stubborn_groups;
  std::vector<GroupSpec> flexible_groups;

  void validate() const;

  // Smallest flexible openness; +inf when there are no flexible groups.
  double eps0() const {
    double e = std::numeric_limits<double>::infinity();
    for (const auto& g : flexible_groups) e = std::min(e, g.q);
    return e;
  }

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline void validate_component(const std::vector<GroupSpec>& groups,
                               bool stubborn, const char* label) {
  double wsum = 0.0;
  for (const auto& g : groups) {
    if (!(g.weight > 0.0) || !(g.weight <= 1.0))
      throw std::invalid_argument(std::string(label) +
                                  " group weight outside (0,1]");
    if (!(g.p >= 0.0) || !(g.p <= 1.0))
      throw std::invalid_argument(std::string(label) +
                                  " persuasiveness outside [0,1]");
    if (stubborn) {
      if (g.q != 0.0)
        throw std::invalid_argument("stubborn group with nonzero openness");
    } else {
      if (!(g.q > 0.0) || !(g.q <= 1.0))
        throw std::invalid_argument("flexible openness outside (0,1]");
    }
    wsum += g.weight;
  }
  if (!groups.empty() && std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(label) +
                                " group weights do not sum to 1");
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
  if (n_agents < 2) throw std::invalid_argument("n_agents must be >= 2");
  if (!(gamma > 0.0) || !(gamma < 0.5))
    throw std::invalid_argument("gamma out of (0,0.5)");
  if (!(alpha0 >= 0.0) || !(alpha0 <= 1.0))
    throw std::invalid_argument("alpha0 outside [0,1]");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (!(tau_end >= 0.0)) throw std::invalid_argument("tau_end must be >= 0");
  if (!(record_every > 0.0))
    throw std::invalid_argument("record_every must be > 0");
  if (quantile_points < 2)
    throw std::invalid_argument("quantile_points must be >= 2");
  if (!(dt_meanfield > 0.0))
    throw std::invalid_argument("dt_meanfield must be > 0");

  if (alpha0 > 0.0 && stubborn_groups.empty())
    throw std::invalid_argument("no stubborn mass");
  if (alpha0 < 1.0 && flexible_groups.empty())
    throw std::invalid_argument("no flexible groups");
  detail::validate_component(stubborn_groups, /*stubborn=*/true, "stubborn");
  detail::validate_component(flexible_groups, /*stubborn=*/false, "flexible");

  // Admissibility of the bounded noise: with Y supported on
  // [-sqrt(3), sqrt(3)], |eta| <= sigma*sqrt(3) must not exceed the static
  // threshold that keeps single kicks inside [-1,1]. The square-root damping
  // has no static threshold and relies on resampling alone.
  if (sigma > 0.0) {
    constexpr double sqrt3 = 1.7320508075688772;
    const double eta_max = sigma * sqrt3;
    if (noise == NoiseKind::Linear && eta_max > 1.0 - gamma)
      throw std::invalid_argument("sigma too large for linear damping");
    if (noise == NoiseKind::Quadratic && eta_max > 0.5 * (1.0 - gamma))
      throw std::invalid_argument("sigma too large for quadratic damping");
  }
}

// ---------------------------------------------------------------------------
// Closed-form scenario aggregates
// ---------------------------------------------------------------------------

struct ScenarioStats {
  double mean_p = 0.0;           // population-wide <p>
  double mean_p_stubborn = 0.0;  // <p> restricted to the stubborn component
  double eps0 = 0.0;             // min flexible openness
  // Persuasion-weighted stubborn mean opinion; absent when alpha0 = 0.
  std::optional<double> m00;
};

inline ScenarioStats scenario_stats(const ScenarioConfig& cfg) {
  ScenarioStats s;
  double pw = 0.0;
  for (const auto& g : cfg.stubborn_groups) {
    s.mean_p_stubborn += g.weight * g.p;
    pw += g.weight * g.p * g.w0.mean();
  }
  double mean_p_flex = 0.0;
  for (const auto& g : cfg.flexible_groups) mean_p_flex += g.weight * g.p;
  s.mean_p = cfg.alpha0 * s.mean_p_stubborn + (1.0 - cfg.alpha0) * mean_p_flex;
  s.eps0 = cfg.eps0();
  if (cfg.alpha0 > 0.0) {
    if (!(s.mean_p_stubborn > 0.0))
      throw std::invalid_argument("zero total persuasion");
    s.m00 = pw / s.mean_p_stubborn;
  }
  return s;
}

// The opinion every flexible agent is driven to; requires stubborn mass.
inline double limit_opinion(const ScenarioConfig& cfg) {
  const auto s = scenario_stats(cfg);
  if (!s.m00) throw std::invalid_argument("no stubborn mass");
  return *s.m00;
}

// Guaranteed exponential rate eps0 * alpha0 * <p>_stubborn for the approach
// of every flexible mean to the limit opinion (slow-time units).
inline double guaranteed_rate(const ScenarioConfig& cfg) {
  const auto s = scenario_stats(cfg);
  return s.eps0 * cfg.alpha0 * s.mean_p_stubborn;
}

// ---------------------------------------------------------------------------
// Finite population
// ---------------------------------------------------------------------------

// Structure-of-arrays agent storage. Groups are laid out contiguously,
// stubborn groups first in declaration order, then flexible groups;
// group_begin has one entry per group plus a terminating end offset.
struct PopulationState {
  std::vector<double> w;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<std::size_t> group_begin;
  std::size_t n_stubborn_groups = 0;
  double gamma = 0.0;
  double dt_event = 0.0;  // kinetic time advanced per event: 2/N
  Rng rng{0};
  std::uint64_t n_events = 0;
  std::uint64_t noise_resamples = 0;  // rejected noise pairs, re-drawn
  std::uint64_t noise_fallbacks = 0;  // events forced to eta = 0

  std::size_t size() const { return w.size(); }
  std::size_t n_groups() const { return group_begin.size() - 1; }
  double t() const { return static_cast<double>(n_events) * dt_event; }
  double tau() const { return gamma * t(); }

  Agent agent(std::size_t i) const { return {w[i], p[i], q[i]}; }
};

namespace detail {

// Deterministic apportionment of `total` slots proportional to weights:
// floor the quotas, then hand the remaining slots to the largest fractional
// parts (ties broken by lower index).
inline std::vector<std::size_t> largest_remainder(
    const std::vector<double>& weights, std::size_t total) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> counts(n, 0);
  if (n == 0) return counts;
  std::vector<double> frac(n, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    frac[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned)
    ++counts[order[k % n]];
  return counts;
}

}  // namespace detail

// Realize a scenario as N agents. Head counts per component follow
// round(alpha0*N); within a component, largest-remainder apportionment keeps
// group fractions within 1/N of their weights. Every declared group must
// receive at least one agent. Opinions are sampled (or copied, for point
// laws) group by group in layout order, so a given seed pins the whole
// population byte-for-byte.
inline PopulationState build_population(const ScenarioConfig& cfg, Rng rng) {
  cfg.validate();
  const std::size_t n = cfg.n_agents;
  const auto n_stub = static_cast<std::size_t>(
      std::llround(cfg.alpha0 * static_cast<double>(n)));
  const std::size_t n_flex = n - n_stub;

  const bool use_stub = cfg.alpha0 > 0.0;
  const bool use_flex = cfg.alpha0 < 1.0;

  std::vector<double> wt_stub, wt_flex;
  if (use_stub)
    for (const auto& g : cfg.stubborn_groups) wt_stub.push_back(g.weight);
  if (use_flex)
    for (const auto& g : cfg.flexible_groups) wt_flex.push_back(g.weight);

  const auto counts_stub = detail::largest_remainder(wt_stub, n_stub);
  const auto counts_flex = detail::largest_remainder(wt_flex, n_flex);
  for (std::size_t c : counts_stub)
    if (c == 0) throw std::invalid_argument("group starved");
  for (std::size_t c : counts_flex)
    if (c == 0) throw std::invalid_argument("group starved");

  PopulationState s;
  s.w.reserve(n);
  s.p.reserve(n);
  s.q.reserve(n);
  s.group_begin.push_back(0);
  s.n_stubborn_groups = counts_stub.size();
  s.gamma = cfg.gamma;
  s.dt_event = 2.0 / static_cast<double>(n);

  auto emit_group = [&](const GroupSpec& g, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) {
      s.w.push_back(g.w0.sample(rng));
      s.p.push_back(g.p);
      s.q.push_back(g.q);
    }
    s.group_begin.push_back(s.w.size());
  };
  if (use_stub)
    for (std::size_t i = 0; i < cfg.stubborn_groups.size(); ++i)
      emit_group(cfg.stubborn_groups[i], counts_stub[i]);
  if (use_flex)
    for (std::size_t i = 0; i < cfg.flexible_groups.size(); ++i)
      emit_group(cfg.flexible_groups[i], counts_flex[i]);

  s.rng = rng;
  return s;
}

inline PopulationState build_population(const ScenarioConfig& cfg) {
  return build_population(cfg, Rng(cfg.seed));
}

}  // namespace okin
