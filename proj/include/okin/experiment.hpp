#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "okin/collision.hpp"
#include "okin/config_format.hpp"
#include "okin/meanfield.hpp"
#include "okin/metrics.hpp"
#include "okin/model.hpp"
#include "okin/version.hpp"

namespace okin {

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

namespace detail {

// Write-then-rename so concurrent sweep workers never expose partial files.
inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Nominal recording grid implied by (tau_end, record_every): tau = 0, every
// multiple of record_every up to tau_end, and tau_end itself when the
// horizon is not a multiple. run() emits exactly one TimeSeries row per
// entry (the row's actual tau may exceed the nominal time by at most one
// event increment gamma*2/N).
inline std::vector<double> expected_record_times(const ScenarioConfig& cfg) {
  std::vector<double> t{0.0};
  if (cfg.tau_end <= 0.0) return t;
  const double re = cfg.record_every;
  const auto marks =
      static_cast<std::uint64_t>(std::floor(cfg.tau_end / re + 1e-9));
  for (std::uint64_t k = 1; k <= marks; ++k)
    t.push_back(re * static_cast<double>(k));
  if (re * static_cast<double>(marks) <
      cfg.tau_end - 1e-9 * std::max(1.0, cfg.tau_end))
    t.push_back(cfg.tau_end);
  return t;
}

// ---------------------------------------------------------------------------
// CSV emission (17 significant digits: lossless double round trip)
// ---------------------------------------------------------------------------

inline std::string timeseries_csv(const TimeSeries& ts) {
  std::ostringstream out;
  const std::size_t n_groups =
      ts.rows.empty() ? 0 : ts.rows.front().group_mean.size();
  out << "tau,m_t,max_abs_mean_error,w1_to_limit,min_w,max_w";
  for (std::size_t g = 1; g <= n_groups; ++g)
    out << ",mean_g" << g << ",diam_g" << g;
  out << "\n";
  for (const auto& r : ts.rows) {
    out << detail::fmt17(r.tau) << ',' << detail::fmt17(r.m_t) << ','
        << detail::fmt17(r.max_abs_mean_error) << ','
        << detail::fmt17(r.w1_to_limit) << ',' << detail::fmt17(r.min_w)
        << ',' << detail::fmt17(r.max_w);
    for (std::size_t g = 0; g < n_groups; ++g)
      out << ',' << detail::fmt17(r.group_mean[g]) << ','
          << detail::fmt17(r.group_diam[g]);
    out << "\n";
  }
  return out.str();
}

inline std::string density_csv(const DensityGrid& grid, double tau,
                               const char* subset_name) {
  std::ostringstream out;
  out << "# tau=" << detail::fmt17(tau) << " subset=" << subset_name
      << " n_w=" << grid.n_w << " n_q=" << grid.n_q << "\n";
  for (std::size_t iw = 0; iw < grid.n_w; ++iw) {
    for (std::size_t iq = 0; iq < grid.n_q; ++iq) {
      if (iq) out << ',';
      out << detail::fmt17(grid.at(iw, iq));
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string version = kToolkitVersion;
  std::uint64_t seed = 0;
  double duration_seconds = 0.0;
  std::uint64_t events = 0;
  std::uint64_t noise_resamples = 0;
  std::uint64_t noise_fallbacks = 0;
  std::vector<std::pair<std::string, std::string>> extra;
  std::string config_echo;

  std::string to_text() const {
    std::ostringstream out;
    out << "command: " << command << "\n";
    out << "toolkit_version: " << version << "\n";
    out << "seed: " << seed << "\n";
    out << "duration_seconds: " << detail::fmt17(duration_seconds) << "\n";
    out << "events: " << events << "\n";
    out << "noise_resamples: " << noise_resamples << "\n";
    out << "noise_fallbacks: " << noise_fallbacks << "\n";
    for (const auto& [k, v] : extra) out << k << ": " << v << "\n";
    out << "config:\n";
    std::istringstream lines(config_echo);
    std::string line;
    while (std::getline(lines, line)) out << "  " << line << "\n";
    return out.str();
  }
};

namespace detail {

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate: Monte Carlo run with time series and density snapshots
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDensityBinsW = 64;
inline constexpr std::size_t kDensityBinsQ = 16;

inline void cmd_simulate(const ScenarioConfig& cfg,
                         const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  detail::WallClock clock;

  // Five density snapshots spread over the recording grid.
  const std::size_t n_rows = expected_record_times(cfg).size();
  std::vector<std::size_t> snap_rows;
  for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto idx = static_cast<std::size_t>(
        std::llround(f * static_cast<double>(n_rows - 1)));
    if (snap_rows.empty() || snap_rows.back() != idx) snap_rows.push_back(idx);
  }

  PopulationState state = build_population(cfg);
  std::vector<std::pair<double, DensityGrid>> snaps;
  std::size_t row_idx = 0;
  const TimeSeries ts =
      run(state, cfg, [&](const PopulationState& s, const TimeSeriesRow& r) {
        if (std::find(snap_rows.begin(), snap_rows.end(), row_idx) !=
            snap_rows.end())
          snaps.emplace_back(
              r.tau, density_grid(s, kDensityBinsW, kDensityBinsQ,
                                  Subset::Flexible));
        ++row_idx;
      });

  detail::write_file(out_dir / "timeseries.csv", timeseries_csv(ts));
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "density_%04zu.csv", k);
    detail::write_file(out_dir / name,
                       density_csv(snaps[k].second, snaps[k].first,
                                   "flexible"));
  }

  RunManifest man;
  man.command = "simulate";
  man.seed = cfg.seed;
  man.events = state.n_events;
  man.noise_resamples = state.noise_resamples;
  man.noise_fallbacks = state.noise_fallbacks;
  man.config_echo = emit_config(cfg);
  man.duration_seconds = clock.seconds();
  detail::write_file(out_dir / "manifest.txt", man.to_text());
}

// ---------------------------------------------------------------------------
// meanfield: deterministic transport solution
// ---------------------------------------------------------------------------

inline void cmd_meanfield(const ScenarioConfig& cfg,
                          const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  detail::WallClock clock;

  const MeanFieldSystem sys = assemble(cfg);
  const LimitDistribution lim = limit_distribution(cfg);
  const double dt = std::min(cfg.dt_meanfield, sys.default_dt());
  const MeanTrajectory traj =
      solve_means(sys, initial_means(cfg, sys), cfg.tau_end, dt);

  const std::vector<double> times = expected_record_times(cfg);
  std::ostringstream csv;
  csv << "t,m_t,bound";
  for (std::size_t i = 1; i <= sys.n; ++i) csv << ",M_g" << i;
  csv << "\n";
  for (double t : times) {
    const auto idx = std::min(
        traj.times.size() - 1,
        static_cast<std::size_t>(std::llround(t / traj.dt)));
    csv << detail::fmt17(traj.times[idx]) << ','
        << detail::fmt17(traj.m_t[idx]) << ','
        << detail::fmt17(lim.bound(traj.times[idx]));
    for (std::size_t i = 0; i < sys.n; ++i)
      csv << ',' << detail::fmt17(traj.M[idx][i]);
    csv << "\n";
  }
  detail::write_file(out_dir / "meanfield.csv", csv.str());

  std::ostringstream limit_txt;
  limit_txt << "m00 = " << detail::fmt17(lim.m00) << "\n";
  limit_txt << "rate_exponent = " << detail::fmt17(lim.rate_exponent) << "\n";
  detail::write_file(out_dir / "limit.txt", limit_txt.str());

  // Self-check: flowing the quantile profiles must reproduce the row means.
  double quantile_err = 0.0;
  if (sys.n > 0 && cfg.tau_end > 0.0) {
    const double flow_dt = std::min(0.05, dt * 5.0);
    const QuantileProfiles prof =
        flow_quantiles(sys, initial_profiles(cfg, cfg.quantile_points), traj,
                       cfg.tau_end, flow_dt);
    std::vector<double> row_mean(sys.n, 0.0), row_mass(sys.n, 0.0);
    for (std::size_t g = 0; g < prof.n_profiles(); ++g) {
      const std::size_t r = sys.row_of_group[g];
      row_mean[r] += prof.mass[g] * prof.profile_mean(g);
      row_mass[r] += prof.mass[g];
    }
    for (std::size_t r = 0; r < sys.n; ++r)
      quantile_err = std::max(
          quantile_err, std::abs(row_mean[r] / row_mass[r] -
                                 traj.M.back()[r]));
  }

  RunManifest man;
  man.command = "meanfield";
  man.seed = cfg.seed;
  man.extra.emplace_back("solver_dt", detail::fmt17(dt));
  man.extra.emplace_back("quantile_mean_max_abs_err",
                         detail::fmt17(quantile_err));
  man.config_echo = emit_config(cfg);
  man.duration_seconds = clock.seconds();
  detail::write_file(out_dir / "manifest.txt", man.to_text());
}

// ---------------------------------------------------------------------------
// compare: Monte Carlo marginals against the transport limit as gamma -> 0
// ---------------------------------------------------------------------------

enum class SigmaScaling { Zero, Gamma15 };

// Mean-field reference: per recording time, per flexible group, the R
// midpoint quantile values as an equal-weight sample.
struct CompareReference {
  std::vector<double> times;
  std::vector<double> masses;  // flexible group weights
  // sample[time][group] -> sorted atoms
  std::vector<std::vector<WeightedSample1D>> sample;
};

inline CompareReference compare_reference(const ScenarioConfig& cfg) {
  CompareReference ref;
  ref.times = expected_record_times(cfg);
  for (const auto& g : cfg.flexible_groups) ref.masses.push_back(g.weight);

  const MeanFieldSystem sys = assemble(cfg);
  const double dt = std::min(cfg.dt_meanfield, sys.default_dt());
  const MeanTrajectory traj =
      solve_means(sys, initial_means(cfg, sys), cfg.tau_end, dt);
  const double flow_dt = std::min(0.05, dt * 5.0);
  const auto snaps =
      flow_quantiles_path(sys, initial_profiles(cfg, cfg.quantile_points),
                          traj, ref.times, flow_dt);
  for (const auto& snap : snaps) {
    std::vector<WeightedSample1D> per_group;
    per_group.reserve(snap.n_profiles());
    for (std::size_t g = 0; g < snap.n_profiles(); ++g) {
      // Midpoint nodes only: the r=1 endpoint carries no quadrature mass.
      std::vector<double> atoms(snap.x[g].begin(),
                                snap.x[g].begin() + snap.grid.R);
      per_group.push_back(WeightedSample1D::from_values(std::move(atoms)));
    }
    ref.sample.push_back(std::move(per_group));
  }
  return ref;
}

// Mass-weighted sum over flexible groups of W1(group empirical opinions,
// reference sample for that group).
inline double mixture_w1(const PopulationState& s,
                         const std::vector<WeightedSample1D>& ref,
                         const std::vector<double>& masses) {
  double acc = 0.0;
  const std::size_t n_flex = s.n_groups() - s.n_stubborn_groups;
  for (std::size_t g = 0; g < n_flex; ++g) {
    const std::size_t b = s.group_begin[s.n_stubborn_groups + g];
    const std::size_t e = s.group_begin[s.n_stubborn_groups + g + 1];
    auto emp = WeightedSample1D::from_values(
        std::vector<double>(s.w.begin() + b, s.w.begin() + e));
    acc += masses[g] * w1(emp, ref[g]);
  }
  return acc;
}

inline void cmd_compare(const ScenarioConfig& base,
                        const std::vector<double>& gammas,
                        const std::filesystem::path& out_dir,
                        std::size_t n_seeds, SigmaScaling scaling) {
  base.validate();
  if (gammas.size() < 2)
    throw std::invalid_argument("compare needs at least two gammas");
  for (std::size_t k = 0; k + 1 < gammas.size(); ++k)
    if (!(gammas[k] >= gammas[k + 1]))
      throw std::invalid_argument("gammas must be descending");
  if (n_seeds < 1) throw std::invalid_argument("need at least one seed");
  std::filesystem::create_directories(out_dir);
  detail::WallClock clock;

  // The transport limit does not depend on gamma: one reference serves all.
  const CompareReference ref = compare_reference(base);

  std::uint64_t total_events = 0, total_resamples = 0, total_fallbacks = 0;
  std::ostringstream csv;
  csv << "gamma,sigma,n_agents,seed,sup_w1\n";
  for (double gamma : gammas) {
    ScenarioConfig cfg = base;
    cfg.gamma = gamma;
    cfg.sigma =
        scaling == SigmaScaling::Zero ? 0.0 : std::pow(gamma, 0.75);
    cfg.validate();
    for (std::size_t k = 0; k < n_seeds; ++k) {
      cfg.seed = base.seed + k;
      PopulationState state = build_population(cfg);
      double sup = 0.0;
      std::size_t row_idx = 0;
      run(state, cfg, [&](const PopulationState& s, const TimeSeriesRow&) {
        if (row_idx < ref.sample.size())
          sup = std::max(sup,
                         mixture_w1(s, ref.sample[row_idx], ref.masses));
        ++row_idx;
      });
      csv << detail::fmt17(cfg.gamma) << ',' << detail::fmt17(cfg.sigma)
          << ',' << cfg.n_agents << ',' << cfg.seed << ','
          << detail::fmt17(sup) << "\n";
      total_events += state.n_events;
      total_resamples += state.noise_resamples;
      total_fallbacks += state.noise_fallbacks;
    }
  }
  detail::write_file(out_dir / "grazing.csv", csv.str());

  RunManifest man;
  man.command = "compare";
  man.seed = base.seed;
  man.events = total_events;
  man.noise_resamples = total_resamples;
  man.noise_fallbacks = total_fallbacks;
  std::ostringstream gl;
  for (std::size_t k = 0; k < gammas.size(); ++k)
    gl << (k ? "," : "") << detail::fmt17(gammas[k]);
  man.extra.emplace_back("gammas", gl.str());
  man.extra.emplace_back("seeds", std::to_string(n_seeds));
  man.extra.emplace_back(
      "sigma_scaling",
      scaling == SigmaScaling::Zero ? "zero" : "gamma15");
  man.config_echo = emit_config(base);
  man.duration_seconds = clock.seconds();
  detail::write_file(out_dir / "manifest.txt", man.to_text());
}

// ---------------------------------------------------------------------------
// sweep: convergence time and fitted rate across a parameter range
// ---------------------------------------------------------------------------

inline constexpr double kDefaultConvergenceThreshold = 0.05;

// tau_star sentinel when w1_to_limit never drops below the threshold within
// the horizon ("never converged within tau_end").
inline constexpr double kNeverConverged = -1.0;

inline void cmd_sweep(const ScenarioConfig& base, const std::string& param,
                      const std::vector<double>& values,
                      const std::filesystem::path& out_dir,
                      std::size_t n_seeds, double threshold) {
  if (values.empty()) throw std::invalid_argument("sweep needs values");
  if (n_seeds < 1) throw std::invalid_argument("need at least one seed");
  if (!(threshold > 0.0))
    throw std::invalid_argument("threshold must be > 0");
  auto apply = [&](ScenarioConfig& cfg, double v) {
    if (param == "alpha0")
      cfg.alpha0 = v;
    else if (param == "gamma")
      cfg.gamma = v;
    else if (param == "sigma")
      cfg.sigma = v;
    else if (param == "n_agents")
      cfg.n_agents = static_cast<std::size_t>(std::llround(v));
    else
      throw std::invalid_argument("unknown sweep parameter: " + param);
  };
  std::filesystem::create_directories(out_dir);
  detail::WallClock clock;

  std::uint64_t total_events = 0, total_resamples = 0, total_fallbacks = 0;
  std::ostringstream csv;
  csv << "param,value,seed,tau_star,fitted_rate,guaranteed_rate\n";
  for (double v : values) {
    ScenarioConfig cfg = base;
    apply(cfg, v);
    cfg.validate();
    const double guaranteed = guaranteed_rate(cfg);
    for (std::size_t k = 0; k < n_seeds; ++k) {
      cfg.seed = base.seed + k;
      PopulationState state = build_population(cfg);
      const std::size_t n_flex =
          state.size() - state.group_begin[state.n_stubborn_groups];
      const TimeSeries ts = run(state, cfg);

      double tau_star = kNeverConverged;
      for (const auto& row : ts.rows)
        if (row.w1_to_limit < threshold) {
          tau_star = row.tau;
          break;
        }
      double fitted = std::numeric_limits<double>::quiet_NaN();
      try {
        const double floor_val =
            2.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(
                      n_flex, 1)));
        fitted = fit_decay_rate(ts.taus(), ts.w1s(), floor_val).rate;
      } catch (const std::invalid_argument&) {
        // Fewer than three points above the noise floor: leave NaN.
      }
      csv << param << ',' << detail::fmt17(v) << ',' << cfg.seed << ','
          << detail::fmt17(tau_star) << ',' << detail::fmt17(fitted) << ','
          << detail::fmt17(guaranteed) << "\n";
      total_events += state.n_events;
      total_resamples += state.noise_resamples;
      total_fallbacks += state.noise_fallbacks;
    }
  }
  detail::write_file(out_dir / "sweep.csv", csv.str());

  RunManifest man;
  man.command = "sweep";
  man.seed = base.seed;
  man.events = total_events;
  man.noise_resamples = total_resamples;
  man.noise_fallbacks = total_fallbacks;
  std::ostringstream vl;
  for (std::size_t k = 0; k < values.size(); ++k)
    vl << (k ? "," : "") << detail::fmt17(values[k]);
  man.extra.emplace_back("param", param);
  man.extra.emplace_back("values", vl.str());
  man.extra.emplace_back("seeds", std::to_string(n_seeds));
  man.extra.emplace_back("threshold", detail::fmt17(threshold));
  man.config_echo = emit_config(base);
  man.duration_seconds = clock.seconds();
  detail::write_file(out_dir / "manifest.txt", man.to_text());
}

// ---------------------------------------------------------------------------
// verify: exact-identity and metric self-checks
// ---------------------------------------------------------------------------

namespace detail {

inline WeightedSample1D random_measure(Rng& rng) {
  const std::size_t n = 1 + rng.below(6);
  std::vector<double> v(n), wt(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = rng.uniform(-1.0, 1.0);
    wt[k] = rng.uniform(0.1, 1.0);
    total += wt[k];
  }
  for (double& x : wt) x /= total;
  return WeightedSample1D(std::move(v), std::move(wt));
}

inline CheckResult check_m00_arithmetic(const ScenarioConfig& cfg) {
  const ScenarioStats stats = scenario_stats(cfg);
  long double pw = 0.0L, p = 0.0L;
  for (const auto& g : cfg.stubborn_groups) {
    pw += static_cast<long double>(g.weight) * g.p *
          (0.5L * (static_cast<long double>(g.w0.lo()) + g.w0.hi()));
    p += static_cast<long double>(g.weight) * g.p;
  }
  const double reference = static_cast<double>(pw / p);
  const double err = std::abs(*stats.m00 - reference);
  return {"m00 arithmetic", err <= 1e-14, err,
          "closed form vs extended-precision recomputation"};
}

inline CheckResult check_w1_metric() {
  Rng rng(0x5eedd157);
  double worst = 0.0;
  for (int it = 0; it < 300; ++it) {
    const auto a = random_measure(rng);
    const auto b = random_measure(rng);
    const auto c = random_measure(rng);
    worst = std::max(worst, std::abs(w1(a, b) - w1(b, a)));  // symmetry
    worst = std::max(worst, w1(a, a));                       // identity
    worst = std::max(worst, w1(a, c) - (w1(a, b) + w1(b, c)));  // triangle
    const double point = rng.uniform(-1.0, 1.0);  // Dirac closed form
    double direct = 0.0;
    for (std::size_t k = 0; k < a.value.size(); ++k)
      direct += a.weight[k] * std::abs(a.value[k] - point);
    worst = std::max(worst,
                     std::abs(w1(a, WeightedSample1D::dirac(point)) - direct));
  }
  return {"W1 metric properties", worst <= 1e-10, worst,
          "symmetry, identity, triangle, Dirac closed form (300 cases)"};
}

}  // namespace detail

inline int cmd_verify(const ScenarioConfig& cfg, std::ostream& out) {
  std::vector<CheckResult> checks;
  try {
    cfg.validate();
    const MeanFieldSystem sys = assemble(cfg);
    checks = verify_system(sys);
    checks.push_back(detail::check_m00_arithmetic(cfg));
  } catch (const std::exception& e) {
    checks.push_back({"assemble", false, 0.0, e.what()});
  }
  checks.push_back(detail::check_w1_metric());

  int failures = 0;
  for (const auto& c : checks) {
    if (c.pass) {
      out << "PASS " << c.name << " (max_err=" << detail::fmt17(c.max_err)
          << ")\n";
    } else {
      ++failures;
      out << "FAIL " << c.name << ": " << c.detail
          << " (max_err=" << detail::fmt17(c.max_err) << ")\n";
    }
  }
  out << (failures == 0 ? "ALL CHECKS PASSED" : "CHECKS FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace okin
