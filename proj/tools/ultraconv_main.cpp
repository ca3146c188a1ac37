// Command-line front end: subcommands rates / simulate / couple / ergodic /
// verify over a JSON config file with flag overrides.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ultraconv/cli.hpp"

namespace {

void add_common_flags(CLI::App* sub, ultraconv::cli::ExperimentConfig& cfg, std::string& config_path) {
  sub->add_option("--config", config_path, "JSON config file; flags override file fields");
  sub->add_option("--model", cfg.model, "porous|plaplace|fastdiff|linear");
  sub->add_option("-l", cfg.l, "domain length");
  sub->add_option("--sigma", cfg.sigma, "noise intensity");
  sub->add_option("-r", cfg.r, "porous/fast-diffusion exponent r");
  sub->add_option("-p", cfg.p, "p-Laplace exponent p");
  sub->add_option("--theta", cfg.theta, "coupling exponent theta (0 = model default)");
  sub->add_option("--kappa", cfg.kappa, "fast-diffusion noise decay exponent");
  sub->add_option("--gamma", cfg.gamma, "Lyapunov scale gamma");
  sub->add_option("-N,--modes", cfg.n_modes, "Galerkin modes");
  sub->add_option("-M,--quad", cfg.n_quad, "quadrature nodes (>= 4N)");
  sub->add_option("--dt", cfg.dt, "time step");
  sub->add_option("-T,--horizon", cfg.horizon, "time horizon");
  sub->add_option("--paths", cfg.paths, "number of Monte Carlo paths/runs");
  sub->add_option("--trials", cfg.trials, "trials per verification check");
  sub->add_option("--seed", cfg.seed, "master seed");
  sub->add_option("--out", cfg.out_dir, "output directory");
  sub->add_option("--couple-tol", cfg.couple_tol, "coupling declaration threshold");
  sub->add_option("--zeta-cap", cfg.zeta_cap, "abort threshold on |zeta|^2");
}

}  // namespace

int main(int argc, char** argv) {
  ultraconv::cli::ExperimentConfig cfg;
  std::string config_path;

  // First pass: honor --config so flags parsed below override its fields.
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "validation error: cannot open config file " << config_path << "\n";
      return 1;
    }
    try {
      cfg.load_json(nlohmann::ordered_json::parse(in));
    } catch (const std::exception& e) {
      std::cerr << "validation error: bad config file: " << e.what() << "\n";
      return 1;
    }
  }

  CLI::App app{"numerical laboratory for convergence rates of monotone SPDEs"};
  app.require_subcommand(1);
  std::string dummy;
  for (const char* name : {"rates", "simulate", "couple", "ergodic", "verify"}) {
    auto* sub = app.add_subcommand(name);
    add_common_flags(sub, cfg, dummy);
    sub->callback([&cfg, name]() { cfg.command = name; });
  }
  CLI11_PARSE(app, argc, argv);

  return ultraconv::cli::run(cfg);
}
