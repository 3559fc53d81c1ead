#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "okin/config_format.hpp"
#include "okin/model.hpp"
#include "util.hpp"

using namespace okin;
using Catch::Matchers::ContainsSubstring;

namespace {

// Smallest config that parses cleanly; tests mutate single lines.
const char* kValid =
    "n_agents = 100\n"
    "alpha0 = 0.5\n"
    "gamma = 0.1\n"
    "tau_end = 1\n"
    "record_every = 0.5\n"
    "seed = 1\n"
    "\n"
    "[stubborn]\n"
    "weight = 1\n"
    "p = 0.5\n"
    "w_dist = point(-0.5)\n"
    "\n"
    "[flexible]\n"
    "weight = 1\n"
    "p = 0.5\n"
    "q = 0.5\n"
    "w_dist = point(0.2)\n";

std::string replaced(std::string text, const std::string& from,
                     const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("shipped scenario files parse to the canonical configs") {
  const auto parsed = parse_config_file(testutil::scenario_path("paper_sec4.cfg"));
  CHECK(parsed == testutil::sec4_config());

  auto scaled = testutil::sec4_config();
  scaled.n_agents = 100000;
  scaled.tau_end = 20.0;
  CHECK(parse_config_file(testutil::scenario_path("grazing.cfg")) == scaled);

  CHECK_THROWS_WITH(parse_config_file(testutil::scenario_path("nope.cfg")),
                    ContainsSubstring("cannot open config file"));
}

TEST_CASE("minimal config parses with documented defaults") {
  const auto cfg = parse_config(kValid);
  CHECK(cfg.n_agents == 100);
  CHECK(cfg.sigma == 0.0);
  CHECK(cfg.noise == NoiseKind::Quadratic);
  CHECK(cfg.quantile_points == 1024);
  CHECK(cfg.dt_meanfield == 0.01);
  REQUIRE(cfg.stubborn_groups.size() == 1);
  REQUIRE(cfg.flexible_groups.size() == 1);
  CHECK(cfg.stubborn_groups[0].q == 0.0);
  CHECK(cfg.flexible_groups[0].w0 == OpinionDist::point(0.2));
}

TEST_CASE("whitespace, comments, and CRLF endings are tolerated") {
  std::string text = kValid;
  text = replaced(text, "gamma = 0.1", "   gamma   =   0.1   ");
  text = replaced(text, "alpha0 = 0.5", "# a comment\nalpha0 = 0.5");
  text = replaced(text, "seed = 1\n", "seed = 1\r\n");
  CHECK(parse_config(text) == parse_config(kValid));
}

TEST_CASE("required keys are reported in canonical order") {
  CHECK_THROWS_WITH(parse_config(""), "missing required key: n_agents");
  CHECK_THROWS_WITH(parse_config("n_agents = 100\n"),
                    "missing required key: alpha0");
  CHECK_THROWS_WITH(
      parse_config("n_agents = 100\nalpha0 = 0.5\ngamma = 0.1\n"),
      "missing required key: tau_end");
}

TEST_CASE("range errors carry the offending line") {
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "gamma = 0.1", "gamma = 0.7")),
                    "line 3: gamma out of (0,0.5)");
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "gamma = 0.1", "gamma = 0")),
                    "line 3: gamma out of (0,0.5)");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "alpha0 = 0.5", "alpha0 = 1.5")),
      "line 2: alpha0 out of [0,1]");
}

TEST_CASE("malformed lines and keys are rejected with context") {
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "gamma = 0.1", "gamma 0.1")),
                    "line 3: expected 'key = value'");
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "gamma = 0.1", "gamma =")),
                    "line 3: empty value for gamma");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "gamma = 0.1", "gamma = fast")),
      "line 3: not a number: 'fast'");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "seed = 1", "seed = -1")),
      "line 6: not a nonnegative integer: '-1'");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "gamma = 0.1", "speed = 0.1")),
      ContainsSubstring("unknown key: speed"));
  CHECK_THROWS_WITH(
      parse_config("gamma = 0.2\n" + std::string(kValid)),
      ContainsSubstring("duplicate key: gamma"));
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "[flexible]", "[fluid]")),
      "line 13: unknown section: [fluid]");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "w_dist = point(-0.5)\n", "")),
      ContainsSubstring("[stubborn] section missing key: w_dist"));
}

TEST_CASE("noise kinds parse by name") {
  auto with_noise = [&](const std::string& v) {
    return parse_config("noise = " + v + "\nsigma = 0.1\n" +
                        std::string(kValid));
  };
  CHECK(with_noise("quadratic").noise == NoiseKind::Quadratic);
  CHECK(with_noise("linear").noise == NoiseKind::Linear);
  CHECK(with_noise("sqrtquad").noise == NoiseKind::SqrtQuad);
  CHECK_THROWS_WITH(with_noise("cubic"),
                    ContainsSubstring("noise must be quadratic|linear|sqrtquad"));
}

TEST_CASE("opinion law syntax") {
  CHECK(parse_config(replaced(kValid, "w_dist = point(0.2)",
                              "w_dist = uniform(-0.25,0.25)"))
            .flexible_groups[0]
            .w0 == OpinionDist::uniform(-0.25, 0.25));
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "w_dist = point(0.2)",
                                          "w_dist = uniform(0.5)")),
                    "line 17: uniform(a,b) takes two arguments");
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "w_dist = point(0.2)",
                                          "w_dist = gaussian(0,1)")),
                    "line 17: w_dist must be point(a) or uniform(a,b)");
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "w_dist = point(0.2)",
                                          "w_dist = point(1.5)")),
                    "line 17: opinion support outside [-1,1]");
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "w_dist = point(0.2)",
                                          "w_dist = uniform(0.5,0.1)")),
                    "line 17: opinion interval reversed");
}

TEST_CASE("openness declarations: stubborn zero, flexible positive") {
  // An explicit q = 0 in a stubborn section is redundant but legal.
  CHECK_NOTHROW(parse_config(
      replaced(kValid, "[stubborn]\nweight = 1",
               "[stubborn]\nq = 0\nweight = 1")));
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "[stubborn]\nweight = 1",
                            "[stubborn]\nq = 0.3\nweight = 1")),
      "line 9: q<eps0 declaration mismatch");
  CHECK_THROWS_WITH(parse_config(replaced(kValid, "q = 0.5", "q = 0")),
                    "line 16: q<eps0 declaration mismatch");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "q = 0.5", "q = uniform(0,0.5)")),
      "line 16: q<eps0 declaration mismatch");
  CHECK_THROWS_WITH(
      parse_config(replaced(kValid, "q = 0.5", "q = uniform(0.5,0.2)")),
      "line 16: q<eps0 declaration mismatch");
}

TEST_CASE("an openness continuum expands into equal-mass midpoint bins") {
  const std::string text = "flexible_q_bins = 4\n" +
                           replaced(kValid, "q = 0.5", "q = uniform(0.2,1)");
  const auto cfg = parse_config(text);
  REQUIRE(cfg.flexible_groups.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& g = cfg.flexible_groups[k];
    CHECK(g.weight == 0.25);
    CHECK(g.q == Catch::Approx(0.2 + 0.8 * (k + 0.5) / 4.0).margin(1e-15));
    CHECK(g.p == 0.5);  // scalar p is shared by every bin
    CHECK(g.w0 == OpinionDist::point(0.2));
  }

  // Tied persuasion: p = 1 - q per bin.
  std::string tied = replaced(text, "p = 0.5\nq = uniform(0.2,1)",
                              "p = 1-q\nq = uniform(0.2,1)");
  const auto cfg2 = parse_config(tied);
  for (const auto& g : cfg2.flexible_groups)
    CHECK(g.p == Catch::Approx(1.0 - g.q).margin(1e-15));

  CHECK_THROWS_WITH(parse_config("flexible_q_bins = 0\n" + text),
                    ContainsSubstring("duplicate key"));
  CHECK_THROWS_WITH(
      parse_config(replaced(text, "flexible_q_bins = 4",
                            "flexible_q_bins = 0")),
      ContainsSubstring("flexible_q_bins must be >= 1"));
}

TEST_CASE("weight diagnostics report the actual sum") {
  const std::string text = replaced(
      std::string(kValid), "[stubborn]\nweight = 1\np = 0.5",
      "[stubborn]\nweight = 0.5\np = 0.5\nw_dist = point(0)\n\n"
      "[stubborn]\nweight = 0.6\np = 0.5");
  CHECK_THROWS_WITH(parse_config(text),
                    ContainsSubstring("stubborn group weights sum to 1.1"));
}

TEST_CASE("model validation backstop still applies") {
  const std::string text =
      "sigma = 0.4\nnoise = quadratic\n" + std::string(kValid);
  CHECK_THROWS_WITH(parse_config(text),
                    ContainsSubstring("sigma too large for quadratic damping"));
}

TEST_CASE("emitted configs round-trip exactly") {
  const auto cfg = testutil::sec4_config();
  CHECK(parse_config(emit_config(cfg)) == cfg);

  Rng rng(0xc0f1);
  for (int it = 0; it < 25; ++it) {
    auto rc = testutil::random_config(rng, 4);
    CHECK(parse_config(emit_config(rc)) == rc);
  }

  auto noisy = testutil::sec4_config();
  noisy.sigma = 0.19;
  noisy.noise = NoiseKind::SqrtQuad;
  noisy.quantile_points = 333;
  noisy.dt_meanfield = 0.0025;
  CHECK(parse_config(emit_config(noisy)) == noisy);

  const std::string text = emit_config(cfg);
  CHECK(text.rfind("n_agents = 10000\n", 0) == 0);
  CHECK(text.find("noise = quadratic\n") != std::string::npos);
  CHECK(text.find("w_dist = uniform(") != std::string::npos);
}
