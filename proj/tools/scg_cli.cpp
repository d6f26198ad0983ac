// Command-line harness: run, check and gridsearch subcommands.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scg/scg.hpp"

namespace {

scg::RunConfig load(const std::string& path,
                    const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw scg::ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  scg::RunConfig cfg = scg::parse_config(buf.str());
  for (const auto& o : overrides) scg::apply_override(cfg, o);
  return cfg;
}

const std::vector<std::string> kDefaultAlphaGrid = {"1e-3", "5e-3", "1e-2",
                                                  "5e-2", "1e-1"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaled conjugate gradient optimizer harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* run = app.add_subcommand("run", "Run trials and write CSV traces");
  auto* check = app.add_subcommand("check", "Run the conformance checks only");
  auto* grid = app.add_subcommand("gridsearch", "Sweep one config key");
  std::string param = "schedule.alpha0";
  std::vector<std::string> values;

  for (auto* sub : {run, check, grid}) {
    sub->add_option("config", config_path, "Config file")->required();
    sub->add_option("--set", overrides, "Override section.key=value");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--trials", trials, "Number of trials");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; },
        "Base sampling seed");
  }
  grid->add_option("--param", param, "Key to sweep");
  grid->add_option("--values", values, "Candidate values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    scg::RunConfig cfg = load(config_path, overrides);
    if (trials > 0) cfg.trials = trials;
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;

    if (run->parsed()) {
      const auto res = scg::execute(cfg, cfg.out, true, std::cerr);
      std::cout << "wrote " << cfg.trials << " trial CSVs to " << cfg.out << '\n';
      if (!res.summary.checks.empty())
        scg::print_check_table(std::cout, res.summary.checks);
      return res.exit_code;
    }
    if (check->parsed()) {
      if (cfg.checks.empty()) {
        cfg.checks = scg::known_checks();
        // convexity links need a convex problem with a known optimum
        if (cfg.problem.kind == scg::ProblemKind::Rosenbrock ||
            cfg.problem.kind == scg::ProblemKind::Mlp) {
          std::erase(cfg.checks, std::string("convex_links"));
        }
      }
      const auto res = scg::execute(cfg, cfg.out, false, std::cerr);
      scg::print_check_table(std::cout, res.summary.checks);
      return res.exit_code;
    }
    if (grid->parsed()) {
      if (values.empty()) values = kDefaultAlphaGrid;
      const auto pts = scg::gridsearch(cfg, param, values, cfg.out);
      std::size_t best = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        std::cout << param << " = " << pts[i].value
                  << "  final_f = " << pts[i].final_f
                  << "  final_avg_V = " << pts[i].final_avg_V << '\n';
        if (pts[i].final_f < pts[best].final_f) best = i;
      }
      std::cout << "best " << param << " = " << pts[best].value << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
