#pragma once

// Shared scenario builders for the test suites. sec4_config() mirrors
// scenarios/paper_sec4.cfg arithmetic exactly (same expressions the parser
// evaluates), so parsed and programmatic configs compare equal.

#include <cstddef>
#include <string>
#include <vector>

#include "okin/model.hpp"
#include "okin/rng.hpp"

#ifndef OKIN_SCENARIO_DIR
#define OKIN_SCENARIO_DIR "scenarios"
#endif

namespace testutil {

inline std::string scenario_path(const std::string& name) {
  return std::string(OKIN_SCENARIO_DIR) + "/" + name;
}

// The reference scenario: two opposing stubborn camps plus a 16-bin
// flexible continuum with p = 1 - q.
inline okin::ScenarioConfig sec4_config() {
  okin::ScenarioConfig cfg;
  cfg.n_agents = 10000;
  cfg.alpha0 = 0.6;
  cfg.gamma = 0.01;
  cfg.sigma = 0.0;
  cfg.noise = okin::NoiseKind::Quadratic;
  cfg.tau_end = 300.0;
  cfg.record_every = 0.5;
  cfg.seed = 20240817;
  cfg.quantile_points = 1024;
  cfg.dt_meanfield = 0.01;
  cfg.stubborn_groups = {
      {1.0 / 3.0, 0.6, 0.0, okin::OpinionDist::uniform(-0.8, -0.6)},
      {2.0 / 3.0, 0.2, 0.0, okin::OpinionDist::uniform(0.4, 0.8)},
  };
  const std::size_t bins = 16;
  const double qa = 0.2, qb = 1.0;
  for (std::size_t k = 0; k < bins; ++k) {
    okin::GroupSpec g;
    g.weight = 1.0 / static_cast<double>(bins);
    g.q = qa + (qb - qa) * (static_cast<double>(k) + 0.5) /
                   static_cast<double>(bins);
    g.p = 1.0 - g.q;
    g.w0 = okin::OpinionDist::uniform(0.3, 1.0);
    cfg.flexible_groups.push_back(g);
  }
  return cfg;
}

/// A small single-flexible-group scenario with closed-form dynamics:
// A = [-q1 * alpha0 * <p>_stub], equilibrium at m00.
inline okin::ScenarioConfig scalar_config(double alpha0, double p_stub,
                                          double m00_target, double q1,
                                          double p1) {
  okin::ScenarioConfig cfg;
  cfg.n_agents = 1000;
  cfg.alpha0 = alpha0;
  cfg.gamma = 0.05;
  cfg.tau_end = 5.0;
  cfg.record_every = 0.5;
  cfg.seed = 7;
  cfg.stubborn_groups = {
      {1.0, p_stub, 0.0, okin::OpinionDist::point(m00_target)}};
  cfg.flexible_groups = {{1.0, p1, q1, okin::OpinionDist::uniform(0.0, 1.0)}};
  return cfg;
}

inline okin::OpinionDist random_dist(okin::Rng& rng) {
  const double a = rng.uniform(-1.0, 1.0);
  if (rng.u01() < 0.3) return okin::OpinionDist::point(a);
  const double b = rng.uniform(-1.0, 1.0);
  return okin::OpinionDist::uniform(std::min(a, b), std::max(a, b));
}

// Random valid scenario; flexible (p,q) pairs are kept distinct so the
// mean-field system has one row per group.
inline okin::ScenarioConfig random_config(okin::Rng& rng,
                                          std::size_t max_flex_groups) {
  okin::ScenarioConfig cfg;
  cfg.n_agents = 2000;
  cfg.alpha0 = rng.uniform(0.1, 0.9);
  cfg.gamma = rng.uniform(0.01, 0.3);
  cfg.tau_end = 2.0;
  cfg.record_every = 0.5;
  cfg.seed = rng.raw();

  const std::size_t n_stub = 1 + rng.below(3);
  std::vector<double> wt(n_stub);
  double total = 0.0;
  for (double& x : wt) {
    x = rng.uniform(0.2, 1.0);
    total += x;
  }
  for (std::size_t i = 0; i < n_stub; ++i)
    cfg.stubborn_groups.push_back(
        {wt[i] / total, rng.uniform(0.05, 1.0), 0.0, random_dist(rng)});

  const std::size_t n_flex = 1 + rng.below(max_flex_groups);
  wt.assign(n_flex, 0.0);
  total = 0.0;
  for (double& x : wt) {
    x = rng.uniform(0.2, 1.0);
    total += x;
  }
  std::vector<double> qs;
  for (std::size_t i = 0; i < n_flex; ++i) {
    double q = rng.uniform(0.05, 1.0);
    while (std::find(qs.begin(), qs.end(), q) != qs.end())
      q = rng.uniform(0.05, 1.0);
    qs.push_back(q);
    cfg.flexible_groups.push_back(
        {wt[i] / total, rng.uniform(0.0, 1.0), q, random_dist(rng)});
  }
  return cfg;
}

}  // namespace testutil
