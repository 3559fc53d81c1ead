#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "okin/model.hpp"

namespace okin {

// ---------------------------------------------------------------------------
// Line-oriented scenario files
//
//   # full-line comments and blank lines are ignored
//   n_agents = 10000
//   alpha0 = 0.6
//   ...
//   [stubborn]            # repeatable section blocks
//   weight = 0.5
//   p = 0.6
//   w_dist = uniform(-0.8,-0.6)
//   [flexible]
//   weight = 1
//   p = 1-q                # persuasion tied to openness
//   q = uniform(0.2,1)     # continuum, discretized into flexible_q_bins
//   w_dist = uniform(0.3,1)
//
// Top-level keys: n_agents, alpha0, gamma, sigma, noise, tau_end,
// record_every, seed, quantile_points, dt_meanfield, flexible_q_bins.
// Required: n_agents, alpha0, gamma, tau_end, record_every, seed.
// ---------------------------------------------------------------------------

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
  ConfigError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || t.empty())
    throw ConfigError(line, "not a number: '" + t + "'");
  if (!std::isfinite(v)) throw ConfigError(line, "non-finite value");
  return v;
}

inline std::uint64_t parse_uint(const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(line, "not a nonnegative integer: '" + t + "'");
  return std::strtoull(t.c_str(), nullptr, 10);
}

// point(a) or uniform(a,b)
inline OpinionDist parse_w_dist(const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  auto args_of = [&](const std::string& head) -> std::optional<std::string> {
    if (t.rfind(head + "(", 0) != 0 || t.back() != ')') return std::nullopt;
    return t.substr(head.size() + 1, t.size() - head.size() - 2);
  };
  try {
    if (auto args = args_of("point")) return OpinionDist::point(
        parse_double(*args, line));
    if (auto args = args_of("uniform")) {
      const auto comma = args->find(',');
      if (comma == std::string::npos)
        throw ConfigError(line, "uniform(a,b) takes two arguments");
      return OpinionDist::uniform(parse_double(args->substr(0, comma), line),
                                  parse_double(args->substr(comma + 1), line));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(line, e.what());
  }
  throw ConfigError(line, "w_dist must be point(a) or uniform(a,b)");
}

struct RawSection {
  bool stubborn = false;
  std::size_t line = 0;  // of the section header
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
};

}  // namespace detail

inline ScenarioConfig parse_config(const std::string& text) {
  using detail::RawSection;
  std::map<std::string, std::pair<std::string, std::size_t>> top;
  std::vector<RawSection> sections;

  static const std::vector<std::string> kTopKeys = {
      "n_agents",   "alpha0", "gamma",           "sigma",
      "noise",      "tau_end", "record_every",   "seed",
      "quantile_points", "dt_meanfield", "flexible_q_bins"};
  static const std::vector<std::string> kSectionKeys = {"weight", "p", "q",
                                                        "w_dist"};

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  RawSection* current = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line == "[stubborn]" || line == "[flexible]") {
        sections.push_back(RawSection{line == "[stubborn]", line_no, {}});
        current = &sections.back();
        continue;
      }
      throw ConfigError(line_no, "unknown section: " + line);
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(line_no, "empty value for " + key);
    const auto& allowed = current ? kSectionKeys : kTopKeys;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(line_no, "unknown key: " + key);
    auto& dest = current ? current->kv : top;
    if (dest.count(key)) throw ConfigError(line_no, "duplicate key: " + key);
    dest[key] = {value, line_no};
  }

  // Required keys, reported in canonical order.
  for (const char* req :
       {"n_agents", "alpha0", "gamma", "tau_end", "record_every", "seed"})
    if (!top.count(req))
      throw ConfigError(std::string("missing required key: ") + req);

  ScenarioConfig cfg;
  auto top_line = [&](const char* key) { return top.at(key).second; };
  cfg.n_agents = static_cast<std::size_t>(
      detail::parse_uint(top.at("n_agents").first, top_line("n_agents")));
  cfg.alpha0 = detail::parse_double(top.at("alpha0").first, top_line("alpha0"));
  cfg.gamma = detail::parse_double(top.at("gamma").first, top_line("gamma"));
  cfg.tau_end =
      detail::parse_double(top.at("tau_end").first, top_line("tau_end"));
  cfg.record_every = detail::parse_double(top.at("record_every").first,
                                          top_line("record_every"));
  cfg.seed = detail::parse_uint(top.at("seed").first, top_line("seed"));
  if (top.count("sigma"))
    cfg.sigma = detail::parse_double(top.at("sigma").first, top_line("sigma"));
  if (top.count("quantile_points"))
    cfg.quantile_points = static_cast<std::size_t>(detail::parse_uint(
        top.at("quantile_points").first, top_line("quantile_points")));
  if (top.count("dt_meanfield"))
    cfg.dt_meanfield = detail::parse_double(top.at("dt_meanfield").first,
                                            top_line("dt_meanfield"));
  std::size_t q_bins = 16;
  if (top.count("flexible_q_bins")) {
    q_bins = static_cast<std::size_t>(detail::parse_uint(
        top.at("flexible_q_bins").first, top_line("flexible_q_bins")));
    if (q_bins < 1)
      throw ConfigError(top_line("flexible_q_bins"),
                        "flexible_q_bins must be >= 1");
  }
  if (top.count("noise")) {
    const std::string v = top.at("noise").first;
    if (v == "quadratic")
      cfg.noise = NoiseKind::Quadratic;
    else if (v == "linear")
      cfg.noise = NoiseKind::Linear;
    else if (v == "sqrtquad")
      cfg.noise = NoiseKind::SqrtQuad;
    else
      throw ConfigError(top_line("noise"),
                        "noise must be quadratic|linear|sqrtquad");
  }

  // Early range checks with line context (validate() would catch them too,
  // but without knowing where in the file they came from).
  if (!(cfg.gamma > 0.0) || !(cfg.gamma < 0.5))
    throw ConfigError(top_line("gamma"), "gamma out of (0,0.5)");
  if (!(cfg.alpha0 >= 0.0) || !(cfg.alpha0 <= 1.0))
    throw ConfigError(top_line("alpha0"), "alpha0 out of [0,1]");

  // Sections.
  for (const auto& sec : sections) {
    auto need = [&](const char* key) -> const std::pair<std::string,
                                                        std::size_t>& {
      auto it = sec.kv.find(key);
      if (it == sec.kv.end())
        throw ConfigError(sec.line, std::string(sec.stubborn ? "[stubborn]"
                                                             : "[flexible]") +
                                        " section missing key: " + key);
      return it->second;
    };
    GroupSpec g;
    const auto& weight_kv = need("weight");
    g.weight = detail::parse_double(weight_kv.first, weight_kv.second);
    const auto& wdist_kv = need("w_dist");
    g.w0 = detail::parse_w_dist(wdist_kv.first, wdist_kv.second);

    if (sec.stubborn) {
      if (sec.kv.count("q")) {
        const auto& q_kv = sec.kv.at("q");
        if (detail::parse_double(q_kv.first, q_kv.second) != 0.0)
          throw ConfigError(q_kv.second, "q<eps0 declaration mismatch");
      }
      g.q = 0.0;
      const auto& p_kv = need("p");
      if (detail::trim(p_kv.first) == "1-q")
        g.p = 1.0;
      else
        g.p = detail::parse_double(p_kv.first, p_kv.second);
      cfg.stubborn_groups.push_back(g);
      continue;
    }

    const auto& q_kv = need("q");
    const auto& p_kv = need("p");
    const std::string q_text = detail::trim(q_kv.first);
    const std::string p_text = detail::trim(p_kv.first);
    const bool p_tied = (p_text == "1-q");

    if (q_text.rfind("uniform(", 0) == 0) {
      // Continuum of openness values: split into equal-mass bins at the bin
      // midpoints (mean openness is preserved exactly).
      const std::string args = q_text.substr(8, q_text.size() - 9);
      if (q_text.back() != ')' || args.find(',') == std::string::npos)
        throw ConfigError(q_kv.second, "uniform(a,b) takes two arguments");
      const auto comma = args.find(',');
      const double qa = detail::parse_double(args.substr(0, comma),
                                             q_kv.second);
      const double qb = detail::parse_double(args.substr(comma + 1),
                                             q_kv.second);
      if (!(qa > 0.0) || !(qb <= 1.0) || !(qa < qb))
        throw ConfigError(q_kv.second, "q<eps0 declaration mismatch");
      const double p_scalar =
          p_tied ? 0.0 : detail::parse_double(p_text, p_kv.second);
      for (std::size_t k = 0; k < q_bins; ++k) {
        GroupSpec bin = g;
        bin.weight = g.weight / static_cast<double>(q_bins);
        bin.q = qa + (qb - qa) * (static_cast<double>(k) + 0.5) /
                         static_cast<double>(q_bins);
        bin.p = p_tied ? 1.0 - bin.q : p_scalar;
        cfg.flexible_groups.push_back(bin);
      }
    } else {
      g.q = detail::parse_double(q_text, q_kv.second);
      if (!(g.q > 0.0))
        throw ConfigError(q_kv.second, "q<eps0 declaration mismatch");
      g.p = p_tied ? 1.0 - g.q : detail::parse_double(p_text, p_kv.second);
      cfg.flexible_groups.push_back(g);
    }
  }

  // Component-level diagnostics with file context, then the full model
  // validation as a backstop.
  auto check_weight_sum = [&](const std::vector<GroupSpec>& groups,
                              const char* label) {
    if (groups.empty()) return;
    double sum = 0.0;
    for (const auto& g : groups) sum += g.weight;
    if (std::abs(sum - 1.0) > 1e-12) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", sum);
      throw ConfigError(std::string(label) + " group weights sum to " + buf +
                        ", expected 1");
    }
  };
  check_weight_sum(cfg.stubborn_groups, "stubborn");
  check_weight_sum(cfg.flexible_groups, "flexible");

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Emission (lossless round trip: parse_config(emit_config(cfg)) == cfg)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void emit_dist(std::ostringstream& out, const OpinionDist& d) {
  if (d.is_point())
    out << "point(" << fmt17(d.lo()) << ")";
  else
    out << "uniform(" << fmt17(d.lo()) << "," << fmt17(d.hi()) << ")";
}

}  // namespace detail

inline std::string emit_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out << "n_agents = " << cfg.n_agents << "\n";
  out << "alpha0 = " << detail::fmt17(cfg.alpha0) << "\n";
  out << "gamma = " << detail::fmt17(cfg.gamma) << "\n";
  out << "sigma = " << detail::fmt17(cfg.sigma) << "\n";
  out << "noise = " << to_string(cfg.noise) << "\n";
  out << "tau_end = " << detail::fmt17(cfg.tau_end) << "\n";
  out << "record_every = " << detail::fmt17(cfg.record_every) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "quantile_points = " << cfg.quantile_points << "\n";
  out << "dt_meanfield = " << detail::fmt17(cfg.dt_meanfield) << "\n";
  auto emit_group = [&](const GroupSpec& g, bool stubborn) {
    out << "\n[" << (stubborn ? "stubborn" : "flexible") << "]\n";
    out << "weight = " << detail::fmt17(g.weight) << "\n";
    out << "p = " << detail::fmt17(g.p) << "\n";
    if (!stubborn) out << "q = " << detail::fmt17(g.q) << "\n";
    out << "w_dist = ";
    detail::emit_dist(out, g.w0);
    out << "\n";
  };
  for (const auto& g : cfg.stubborn_groups) emit_group(g, true);
  for (const auto& g : cfg.flexible_groups) emit_group(g, false);
  return out.str();
}

}  // namespace okin
