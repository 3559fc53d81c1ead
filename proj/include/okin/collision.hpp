#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "okin/metrics.hpp"
#include "okin/model.hpp"

namespace okin {

// ---------------------------------------------------------------------------
// One collision event
// ---------------------------------------------------------------------------

// Pick a uniformly random unordered pair (with replacement across events, no
// self-pairing), apply the exchange rule, advance the event clock by
// dt = 2/N so each agent participates once per unit kinetic time on average.
//
// Noise handling realizes the admissibility kernel by rejection: a noise
// pair that would push either opinion out of [-1,1] is re-drawn, up to 100
// attempts, after which the event proceeds with eta = eta* = 0 (counted in
// noise_fallbacks; unreachable for amplitudes accepted by
// ScenarioConfig::validate, which bounds single kicks a priori).
inline void step_event(PopulationState& s, double gamma, double sigma,
                       NoiseKind noise) {
  const std::size_t n = s.size();
  const std::size_t i = s.rng.below(n);
  std::size_t j = s.rng.below(n - 1);
  if (j >= i) ++j;

  const double wi = s.w[i], wj = s.w[j];
  const double drift_i = gamma * s.q[i] * s.p[j] * (wj - wi);
  const double drift_j = gamma * s.q[j] * s.p[i] * (wi - wj);

  double nwi, nwj;
  if (sigma == 0.0) {
    nwi = wi + drift_i;
    nwj = wj + drift_j;
  } else {
    const double di = s.q[i] * noise_damping(noise, wi);
    const double dj = s.q[j] * noise_damping(noise, wj);
    bool accepted = false;
    nwi = wi + drift_i;
    nwj = wj + drift_j;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double cand_i = wi + drift_i + sigma * s.rng.symmetric_unit() * di;
      const double cand_j = wj + drift_j + sigma * s.rng.symmetric_unit() * dj;
      if (cand_i >= -1.0 && cand_i <= 1.0 && cand_j >= -1.0 &&
          cand_j <= 1.0) {
        nwi = cand_i;
        nwj = cand_j;
        accepted = true;
        break;
      }
      ++s.noise_resamples;
    }
    if (!accepted) ++s.noise_fallbacks;
  }

  assert(nwi >= -1.0 && nwi <= 1.0 && nwj >= -1.0 && nwj <= 1.0);
  s.w[i] = nwi;
  s.w[j] = nwj;
  ++s.n_events;
}

// ---------------------------------------------------------------------------
// Event loop with periodic recording
// ---------------------------------------------------------------------------

namespace detail {

inline TimeSeriesRow observe(const PopulationState& s,
                             const ScenarioConfig& cfg,
                             const ScenarioStats& stats) {
  TimeSeriesRow row;
  row.tau = s.tau();
  row.m_t = weighted_mean_opinion(s);
  double min_w = s.w.empty() ? 0.0 : s.w[0];
  double max_w = min_w;
  for (double x : s.w) {
    min_w = std::min(min_w, x);
    max_w = std::max(max_w, x);
  }
  row.min_w = min_w;
  row.max_w = max_w;

  const std::size_t n_flex_groups = s.n_groups() - s.n_stubborn_groups;
  row.group_mean.resize(n_flex_groups);
  row.group_diam.resize(n_flex_groups);
  double max_err = 0.0;
  double w1_acc = 0.0;
  const double m00 = stats.m00.value_or(
      std::numeric_limits<double>::quiet_NaN());
  for (std::size_t g = 0; g < n_flex_groups; ++g) {
    const std::size_t b = s.group_begin[s.n_stubborn_groups + g];
    const std::size_t e = s.group_begin[s.n_stubborn_groups + g + 1];
    double sum = 0.0, lo = s.w[b], hi = s.w[b], dev = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      const double x = s.w[k];
      sum += x;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      dev += std::abs(x - m00);
    }
    const double inv = 1.0 / static_cast<double>(e - b);
    row.group_mean[g] = sum * inv;
    row.group_diam[g] = hi - lo;
    max_err = std::max(max_err, std::abs(row.group_mean[g] - m00));
    w1_acc += cfg.flexible_groups[g].weight * dev * inv;
  }
  row.max_abs_mean_error = max_err;
  row.w1_to_limit = w1_acc;
  return row;
}

}  // namespace detail

// Execute collision events until tau >= cfg.tau_end, recording a TimeSeries
// row at tau = 0 and then at each crossing of a multiple of
// cfg.record_every (plus a final row at the stopping time if the horizon is
// not a multiple of the cadence). The recorder callback receives a read-only
// state snapshot together with the row just produced; it must not retain
// references past the call.
template <class Recorder>
TimeSeries run(PopulationState& s, const ScenarioConfig& cfg,
               Recorder&& recorder) {
  const ScenarioStats stats = scenario_stats(cfg);
  TimeSeries ts;
  auto emit = [&] {
    ts.rows.push_back(detail::observe(s, cfg, stats));
    recorder(static_cast<const PopulationState&>(s), ts.rows.back());
  };
  emit();
  if (cfg.tau_end <= 0.0) return ts;

  std::uint64_t mark = 1;  // next record point is mark * record_every
  while (s.tau() < cfg.tau_end) {
    step_event(s, cfg.gamma, cfg.sigma, cfg.noise);
    if (s.tau() >= cfg.record_every * static_cast<double>(mark)) {
      emit();
      do {
        ++mark;
      } while (cfg.record_every * static_cast<double>(mark) <= s.tau());
    }
  }
  if (ts.rows.back().tau < s.tau()) emit();
  return ts;
}

inline TimeSeries run(PopulationState& s, const ScenarioConfig& cfg) {
  return run(s, cfg, [](const PopulationState&, const TimeSeriesRow&) {});
}

// ---------------------------------------------------------------------------
// Opinion-openness histograms
// ---------------------------------------------------------------------------

// Uniform bins over [-1,1] x [0,1]; each agent in the subset adds mass 1/N
// (N = full population), so the grid total equals the subset fraction.
// Interior bins are left-closed; the final bin along each axis is
// right-closed so boundary points are kept.
struct DensityGrid {
  std::size_t n_w = 0;
  std::size_t n_q = 0;
  std::vector<double> mass;  // row-major, w index major: mass[iw*n_q + iq]

  double& at(std::size_t iw, std::size_t iq) { return mass[iw * n_q + iq]; }
  double at(std::size_t iw, std::size_t iq) const {
    return mass[iw * n_q + iq];
  }
};

inline DensityGrid density_grid(const PopulationState& s, std::size_t n_w,
                                std::size_t n_q, Subset subset) {
  if (n_w < 1 || n_q < 1)
    throw std::invalid_argument("density_grid: need at least one bin");
  DensityGrid grid;
  grid.n_w = n_w;
  grid.n_q = n_q;
  grid.mass.assign(n_w * n_q, 0.0);
  const double unit = 1.0 / static_cast<double>(s.size());
  auto bin_index = [](double x, double lo, double hi, std::size_t nb) {
    const double t = (x - lo) / (hi - lo) * static_cast<double>(nb);
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(t)));
    return std::min(k, nb - 1);
  };
  detail::for_subset(s, subset, [&](std::size_t k) {
    const std::size_t iw = bin_index(s.w[k], -1.0, 1.0, n_w);
    const std::size_t iq = bin_index(s.q[k], 0.0, 1.0, n_q);
    grid.mass[iw * n_q + iq] += unit;
  });
  return grid;
}

}  // namespace okin
