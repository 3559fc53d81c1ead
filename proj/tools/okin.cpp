// Command-line driver: simulate | meanfield | compare | sweep | verify.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "okin/config_format.hpp"
#include "okin/experiment.hpp"

namespace {

double parse_num(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size())
    throw std::invalid_argument("bad number in list: '" + tok + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    out.push_back(parse_num(
        text.substr(pos, comma == std::string::npos ? comma : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic simulation toolkit for heterogeneous opinion "
               "dynamics with stubborn agents"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::string gammas_text, values_text, param_name;
  std::string sigma_scaling = "zero";
  std::size_t n_seeds = 1;
  double threshold = okin::kDefaultConvergenceThreshold;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "scenario file")->required();
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo run: timeseries.csv + density snapshots");
  add_config(simulate);
  add_out(simulate);

  CLI::App* meanfield = app.add_subcommand(
      "meanfield", "deterministic transport solution: meanfield.csv");
  add_config(meanfield);
  add_out(meanfield);

  CLI::App* compare = app.add_subcommand(
      "compare", "Monte Carlo vs transport limit across gammas: grazing.csv");
  add_config(compare);
  add_out(compare);
  compare->add_option("--gammas", gammas_text,
                      "comma-separated, descending")->required();
  compare->add_option("--seeds", n_seeds, "seeds per gamma (default 1)");
  compare->add_option("--sigma-scaling", sigma_scaling, "zero | gamma15")
      ->check(CLI::IsMember({"zero", "gamma15"}));

  CLI::App* sweep = app.add_subcommand(
      "sweep", "convergence time across a parameter range: sweep.csv");
  add_config(sweep);
  add_out(sweep);
  sweep->add_option("--param", param_name,
                    "alpha0 | gamma | sigma | n_agents")->required();
  sweep->add_option("--values", values_text, "comma-separated")->required();
  sweep->add_option("--seeds", n_seeds, "seeds per value (default 1)");
  sweep->add_option("--threshold", threshold,
                    "w1_to_limit convergence threshold (default 0.05)");

  CLI::App* verify = app.add_subcommand(
      "verify", "exact-identity and metric self-checks");
  add_config(verify);

  CLI11_PARSE(app, argc, argv);

  try {
    const okin::ScenarioConfig cfg = okin::parse_config_file(config_path);
    if (simulate->parsed()) {
      okin::cmd_simulate(cfg, out_dir);
    } else if (meanfield->parsed()) {
      okin::cmd_meanfield(cfg, out_dir);
    } else if (compare->parsed()) {
      okin::cmd_compare(cfg, parse_list(gammas_text), out_dir, n_seeds,
                        sigma_scaling == "zero"
                            ? okin::SigmaScaling::Zero
                            : okin::SigmaScaling::Gamma15);
    } else if (sweep->parsed()) {
      okin::cmd_sweep(cfg, param_name, parse_list(values_text), out_dir,
                      n_seeds, threshold);
    } else if (verify->parsed()) {
      return okin::cmd_verify(cfg, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
