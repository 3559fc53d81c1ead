#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "okin/metrics.hpp"
#include "okin/model.hpp"
#include "oracle_lp.hpp"
#include "util.hpp"

using namespace okin;

namespace {

// Random discrete probability measure with 1..max_atoms atoms in [-1,1].
// The last weight absorbs rounding so the total is exactly 1.
WeightedSample1D random_measure(Rng& rng, std::size_t max_atoms = 8) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_atoms));
  std::vector<double> v(n), w(n);
  double tot = 0.0;
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  for (auto& x : w) {
    x = rng.uniform(0.01, 1.0);
    tot += x;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    w[k] /= tot;
    acc += w[k];
  }
  w[n - 1] = 1.0 - acc;
  return WeightedSample1D(std::move(v), std::move(w));
}

// Piecewise-linear function with |slope| <= 1 everywhere and f(lo) = 0.
struct LipschitzWitness {
  std::vector<double> knots;   // sorted; spans the support
  std::vector<double> slopes;  // one per segment

  double operator()(double x) const {
    double f = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      const double seg =
          std::min(x, knots[k + 1]) - std::max(knots[k], knots.front());
      if (seg > 0.0) f += slopes[k] * seg;
    }
    return f;
  }
};

LipschitzWitness random_witness(Rng& rng) {
  LipschitzWitness f;
  f.knots = {-1.001, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 1.001};
  std::sort(f.knots.begin(), f.knots.end());
  for (std::size_t k = 0; k + 1 < f.knots.size(); ++k)
    f.slopes.push_back(rng.uniform(-1.0, 1.0));
  return f;
}

double expectation(const WeightedSample1D& mu, const LipschitzWitness& f) {
  double e = 0.0;
  for (std::size_t k = 0; k < mu.value.size(); ++k)
    e += mu.weight[k] * f(mu.value[k]);
  return e;
}

}  // namespace

TEST_CASE("transport distance: hand-checked cases") {
  CHECK(w1(WeightedSample1D::dirac(0.0), WeightedSample1D::dirac(0.5)) == 0.5);
  CHECK(w1(WeightedSample1D::dirac(-0.3), WeightedSample1D::dirac(-0.3)) ==
        0.0);

  const WeightedSample1D half({0.0, 1.0}, {0.5, 0.5});
  CHECK(w1(half, WeightedSample1D::dirac(0.5)) ==
        Catch::Approx(0.5).margin(1e-15));
  CHECK(w1(half, half) == 0.0);

  const WeightedSample1D tri({-1.0, 0.0, 1.0}, {0.25, 0.25, 0.5});
  CHECK(w1(tri, WeightedSample1D::dirac(0.0)) ==
        Catch::Approx(0.75).margin(1e-15));

  // Disjoint supports: everything travels the gap.
  const WeightedSample1D left({-0.9, -0.8}, {0.5, 0.5});
  const WeightedSample1D right({0.8, 0.9}, {0.5, 0.5});
  CHECK(w1(left, right) == Catch::Approx(1.7).margin(1e-15));
}

TEST_CASE("transport distance agrees with the LP oracle") {
  Rng rng(0x0a11ce);
  double worst = 0.0;
  for (int it = 0; it < 150; ++it) {
    const auto mu = random_measure(rng);
    const auto nu = random_measure(rng);
    const double fast = w1(mu, nu);
    const double exact = oracle::w1_lp(mu.value, mu.weight, nu.value, nu.weight);
    worst = std::max(worst, std::abs(fast - exact));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("transport distance is a metric") {
  Rng rng(0xbead);
  for (int it = 0; it < 100; ++it) {
    const auto a = random_measure(rng);
    const auto b = random_measure(rng);
    const auto c = random_measure(rng);
    const double ab = w1(a, b), ba = w1(b, a);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) <= 1e-14);
    CHECK(w1(a, a) == 0.0);
    CHECK(w1(a, c) <= ab + w1(b, c) + 1e-12);
  }
}

TEST_CASE("transport distance dominates every Lipschitz witness") {
  Rng rng(0xd0a1);
  for (int it = 0; it < 100; ++it) {
    const auto mu = random_measure(rng);
    const auto nu = random_measure(rng);
    const double dist = w1(mu, nu);
    for (int jt = 0; jt < 5; ++jt) {
      const auto f = random_witness(rng);
      CHECK(expectation(mu, f) - expectation(nu, f) <= dist + 1e-12);
    }
  }
}

TEST_CASE("transport to a point mass is the mean absolute deviation") {
  Rng rng(0xface);
  for (int it = 0; it < 100; ++it) {
    const auto mu = random_measure(rng);
    const double c = rng.uniform(-1.0, 1.0);
    double mad = 0.0;
    for (std::size_t k = 0; k < mu.value.size(); ++k)
      mad += mu.weight[k] * std::abs(mu.value[k] - c);
    CHECK(w1(mu, WeightedSample1D::dirac(c)) ==
          Catch::Approx(mad).margin(1e-12));
  }
}

TEST_CASE("transport distance scales with the line") {
  Rng rng(0x5ca1e);
  for (int it = 0; it < 50; ++it) {
    const auto mu = random_measure(rng);
    const auto nu = random_measure(rng);
    const double a = rng.uniform(0.1, 2.0), b = rng.uniform(-0.5, 0.5);
    auto map = [&](const WeightedSample1D& s) {
      WeightedSample1D out = s;
      for (auto& x : out.value) x = a * x + b;
      return out;
    };
    CHECK(std::abs(w1(map(mu), map(nu)) - a * w1(mu, nu)) <= 1e-10);
  }
}

TEST_CASE("weighted samples: construction and validation") {
  // Unsorted input is sorted with weights carried along.
  const WeightedSample1D s({0.5, -0.5, 0.0}, {0.2, 0.3, 0.5});
  CHECK(s.value == std::vector<double>{-0.5, 0.0, 0.5});
  CHECK(s.weight == std::vector<double>{0.3, 0.5, 0.2});

  const auto e = WeightedSample1D::from_values({3.0, 1.0, 2.0, 0.0});
  CHECK(e.value == std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(e.weight[0] == 0.25);

  CHECK_THROWS_AS(WeightedSample1D({0.0}, {0.9}), std::invalid_argument);
  CHECK_THROWS_AS(WeightedSample1D({0.0, 1.0}, {1.5, -0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(WeightedSample1D({0.0}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(WeightedSample1D(std::vector<double>{}, std::vector<double>{}),
                  std::invalid_argument);

  // Large equal-weight samples must not trip the unit-mass tolerance.
  std::vector<double> big(100000);
  for (std::size_t k = 0; k < big.size(); ++k)
    big[k] = static_cast<double>(k) / 100000.0;
  CHECK_NOTHROW(WeightedSample1D::from_values(std::move(big)));
}

TEST_CASE("decay fitting recovers exact exponentials") {
  std::vector<double> t, d;
  for (int k = 0; k <= 10; ++k) {
    t.push_back(static_cast<double>(k));
    d.push_back(std::exp(-0.5 * t.back()));
  }
  auto fit = fit_decay_rate(t, d, 0.0);
  CHECK(fit.rate == Catch::Approx(0.5).margin(1e-12));
  CHECK(fit.prefactor == Catch::Approx(1.0).margin(1e-12));
  CHECK(fit.r2 == Catch::Approx(1.0).margin(1e-12));
  CHECK(fit.n_used == 11);

  t.clear();
  d.clear();
  for (int k = 0; k <= 20; ++k) {
    t.push_back(10.0 * k);
    d.push_back(3.0 * std::exp(-0.04 * t.back()));
  }
  fit = fit_decay_rate(t, d, 0.0);
  CHECK(fit.rate == Catch::Approx(0.04).margin(1e-12));
  CHECK(fit.prefactor == Catch::Approx(3.0).margin(1e-10));
}

TEST_CASE("decay fitting ignores the sampling-noise plateau") {
  std::vector<double> t, d;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.1 * k);
    d.push_back(std::max(std::exp(-t.back()), 0.01));  // floors at t ~ 4.6
  }
  // Unfiltered fit is badly biased by the plateau; the floor restores it.
  const auto biased = fit_decay_rate(t, d, 0.0);
  CHECK(biased.rate < 0.8);
  const auto clean = fit_decay_rate(t, d, 0.012);
  CHECK(clean.rate == Catch::Approx(1.0).epsilon(0.02));
  CHECK(clean.n_used < t.size());

  CHECK_THROWS_WITH(fit_decay_rate(t, d, 1e9),
                    "insufficient points above floor");
  CHECK_THROWS_AS(fit_decay_rate({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_decay_rate({1.0}, {1.0, 2.0}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("persuasion-weighted means over populations and vectors") {
  CHECK(weighted_mean_opinion({1.0, -1.0, 0.5}, {1.0, 1.0, 2.0}) ==
        Catch::Approx(0.25).margin(1e-15));
  CHECK_THROWS_WITH(weighted_mean_opinion({1.0}, {0.0}),
                    "zero total persuasion");

  ScenarioConfig cfg;
  cfg.n_agents = 10;
  cfg.alpha0 = 0.5;
  cfg.gamma = 0.1;
  cfg.tau_end = 1.0;
  cfg.record_every = 0.5;
  cfg.stubborn_groups = {{1.0, 0.6, 0.0, OpinionDist::point(-0.5)}};
  cfg.flexible_groups = {{1.0, 0.2, 0.5, OpinionDist::point(0.5)}};
  const auto s = build_population(cfg);
  CHECK(weighted_mean_opinion(s, Subset::All) ==
        Catch::Approx(-0.25).margin(1e-15));
  CHECK(weighted_mean_opinion(s, Subset::Stubborn) ==
        Catch::Approx(-0.5).margin(1e-15));
  CHECK(weighted_mean_opinion(s, Subset::Flexible) ==
        Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("distance to the limit point, group by group") {
  ScenarioConfig cfg;
  cfg.n_agents = 8;
  cfg.alpha0 = 0.0;
  cfg.gamma = 0.1;
  cfg.tau_end = 1.0;
  cfg.record_every = 0.5;
  cfg.flexible_groups = {{0.25, 0.5, 0.5, OpinionDist::point(0.2)},
                         {0.75, 0.5, 0.6, OpinionDist::point(0.8)}};
  const auto s = build_population(cfg);
  CHECK(w1_to_limit(s, 0.0, {0.25, 0.75}) ==
        Catch::Approx(0.25 * 0.2 + 0.75 * 0.8).margin(1e-15));
  CHECK(w1_to_limit(s, 0.2, {0.25, 0.75}) ==
        Catch::Approx(0.75 * 0.6).margin(1e-15));
  CHECK_THROWS_AS(w1_to_limit(s, 0.0, {1.0}), std::invalid_argument);
}
