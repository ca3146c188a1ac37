#pragma once

// Batch experiment runner behind the command-line tool: validates a
// configuration, dispatches to the numerical modules, and writes
// manifest.json, results.csv and checks.csv into the output directory.
// Exit codes: 0 clean run with zero check violations, 1 validation
// failure, 2 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultraconv/common.hpp"
#include "ultraconv/dynamics.hpp"
#include "ultraconv/ergodic.hpp"
#include "ultraconv/rates.hpp"
#include "ultraconv/spectral.hpp"
#include "ultraconv/verify.hpp"
#include "ultraconv/version.hpp"

namespace ultraconv::cli {

using json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string command;           // rates | simulate | couple | ergodic | verify
  std::string model = "porous";  // porous | plaplace | fastdiff | linear
  double l = std::numbers::pi;
  double sigma = 1.0;
  double r = 2.0;
  double p = 4.0;
  double theta = 0.0;  // 0 = model default
  double kappa = 0.3;
  double gamma = 1.0;
  int n_modes = 16;
  int n_quad = 64;
  double dt = 1e-3;
  double horizon = 1.0;
  int paths = 100;
  long trials = 200000;  // verify suites
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  double couple_tol = 1e-6;
  double zeta_cap = 1e8;

  void load_json(const json& j) {
    auto get = [&j](const char* key, auto& slot) {
      if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("command", command);
    get("model", model);
    get("l", l);
    get("sigma", sigma);
    get("r", r);
    get("p", p);
    get("theta", theta);
    get("kappa", kappa);
    get("gamma", gamma);
    get("n_modes", n_modes);
    get("n_quad", n_quad);
    get("dt", dt);
    get("horizon", horizon);
    get("paths", paths);
    get("trials", trials);
    get("seed", seed);
    get("out_dir", out_dir);
    get("couple_tol", couple_tol);
    get("zeta_cap", zeta_cap);
  }

  json to_json() const {
    json j;
    j["command"] = command;
    j["model"] = model;
    j["l"] = l;
    j["sigma"] = sigma;
    j["r"] = r;
    j["p"] = p;
    j["theta"] = theta;
    j["kappa"] = kappa;
    j["gamma"] = gamma;
    j["n_modes"] = n_modes;
    j["n_quad"] = n_quad;
    j["dt"] = dt;
    j["horizon"] = horizon;
    j["paths"] = paths;
    j["trials"] = trials;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["couple_tol"] = couple_tol;
    j["zeta_cap"] = zeta_cap;
    return j;
  }

  dynamics::SimConfig sim_config() const {
    dynamics::SimConfig cfg;
    cfg.n_modes = n_modes;
    cfg.n_quad = n_quad;
    cfg.dt = dt;
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.couple_tol = couple_tol;
    cfg.zeta_cap = zeta_cap;
    return cfg;
  }

  dynamics::ModelSystem model_system() const {
    if (model == "porous") return dynamics::ModelSystem::porous(l, sigma, r, n_modes);
    if (model == "linear") return dynamics::ModelSystem::linear(l, sigma, n_modes);
    if (model == "plaplace") {
      const auto tail = rates::PLaplaceSpec{l, sigma, p, std::nullopt}.q_or_default();
      return dynamics::ModelSystem::plaplace(
          l, p, spectral::DiagonalNoise::power_law(tail.coeff, tail.exponent, n_modes));
    }
    if (model == "fastdiff") return dynamics::ModelSystem::fastdiff(l, r, kappa, n_modes);
    throw domain_error("unknown model '" + model + "' (expected porous|plaplace|fastdiff|linear)");
  }

  double theta_for_model() const {
    if (theta > 0.0) return theta;
    if (model == "porous") return r + 1.0;
    if (model == "plaplace") return p;
    if (model == "fastdiff") return 4.0 / (1.0 + r);
    return 2.0;  // linear
  }
};

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : out_(path), cols_(header.size()) {
    if (!out_) throw numeric_error("cannot open output file " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
  std::size_t cols_;
};

inline void append_check(CsvWriter& w, const verify::CheckReport& rep) {
  w.row({rep.name, std::to_string(rep.n_trials), std::to_string(rep.n_violations),
         fmt(rep.worst_margin), fmt(rep.tolerance)});
}

}  // namespace detail

// Runs the experiment; returns the process exit code and writes artifacts.
inline int run(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  namespace fs = std::filesystem;
  using detail::fmt;
  json summary;
  long total_violations = 0;
  try {
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);

    if (cfg.command == "rates") {
      detail::CsvWriter res(out / "results.csv",
                            {"model", "l", "sigma", "exponent", "theta", "eta", "delta", "alpha",
                             "lambda", "t_opt", "lb_primary", "lb_secondary", "c0"});
      if (cfg.model == "porous") {
        rates::PorousMediumSpec spec{cfg.l, cfg.sigma, cfg.r,
                                     cfg.theta > 0.0 ? std::optional<double>(cfg.theta)
                                                     : std::nullopt};
        const auto pr = rates::porous_medium_rates(spec);
        const auto& rep = pr.report;
        res.row({"porous", fmt(cfg.l), fmt(cfg.sigma), fmt(cfg.r), fmt(pr.theta), fmt(pr.eta),
                 fmt(pr.delta), fmt(rep.alpha), fmt(rep.lambda), fmt(rep.t_opt),
                 fmt(rep.lb_primary), fmt(rep.lb_secondary), fmt(rep.c0)});
        summary["alpha_theta"] = pr.alpha_theta;
        summary["alpha_overflow"] = rep.alpha_overflow;
      } else if (cfg.model == "plaplace") {
        const auto pr = rates::p_laplace_rates({cfg.l, cfg.sigma, cfg.p, std::nullopt});
        const auto& rep = pr.report;
        res.row({"plaplace", fmt(cfg.l), fmt(cfg.sigma), fmt(cfg.p), fmt(pr.theta), fmt(pr.eta),
                 fmt(pr.delta), fmt(rep.alpha), fmt(rep.lambda), fmt(rep.t_opt),
                 fmt(rep.lb_primary), fmt(rep.lb_secondary), fmt(rep.c0)});
        summary["alpha_overflow"] = rep.alpha_overflow;
      } else if (cfg.model == "fastdiff") {
        const auto adm =
            rates::fast_diffusion_admissible({cfg.l, cfg.r, cfg.kappa, cfg.gamma});
        res.row({"fastdiff", fmt(cfg.l), fmt(cfg.sigma), fmt(cfg.r), fmt(adm.theta), "nan", "nan",
                 "nan", "nan", "nan", "nan", "nan", "nan"});
        summary["admissible"] = adm.admissible;
        summary["reason"] = adm.reason;
        summary["theta"] = adm.theta;
        summary["eps"] = adm.eps;
      } else if (cfg.model == "linear") {
        const double lam1 = spectral::eigenvalue(1, cfg.l);
        res.row({"linear", fmt(cfg.l), fmt(cfg.sigma), "1", "nan", "nan", "nan", "nan", fmt(lam1),
                 "nan", fmt(lam1), fmt(lam1), "nan"});
        summary["lambda_1"] = lam1;
      } else {
        throw domain_error("rates: unknown model '" + cfg.model + "'");
      }
    } else if (cfg.command == "simulate") {
      const auto sys = cfg.model_system();
      auto sim = cfg.sim_config();
      sim.save_every = std::max(1, static_cast<int>(std::llround(sim.horizon / sim.dt / 200)));
      std::vector<dynamics::PathTrace> traces(static_cast<std::size_t>(cfg.paths));
      parallel_for(traces.size(), [&](std::size_t i) {
        const auto x0 = spectral::SpectralField::zero(cfg.l, cfg.n_modes);
        traces[i] = dynamics::simulate_path(x0, sys, sim, i);
      });
      detail::CsvWriter res(out / "results.csv", {"path", "time", "norm_H", "norm_L2", "mode1_H"});
      for (int pth = 0; pth < cfg.paths; ++pth) {
        const auto& tr = traces[static_cast<std::size_t>(pth)];
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
          const auto& x = tr.states[i];
          res.row({std::to_string(pth), fmt(tr.times[i]), fmt(spectral::norm_H(x)),
                   fmt(spectral::norm_L2(x)), fmt(x.coeff(1) / x.eigenvalue_of(1))});
        }
      }
      summary["paths"] = cfg.paths;
    } else if (cfg.command == "couple") {
      const auto sys = cfg.model_system();
      auto sim = cfg.sim_config();
      const double th = cfg.theta_for_model();
      const double rr = sys.coupling_r();
      double eta = 0.0, delta = 0.0;
      if (cfg.model == "porous") {
        eta = rates::porous_eta(cfg.l, cfg.sigma, cfg.r, th);
        delta = rates::porous_delta(cfg.l, cfg.r);
      } else if (cfg.model == "plaplace") {
        const auto pr = rates::p_laplace_rates({cfg.l, cfg.sigma, cfg.p, std::nullopt});
        eta = pr.eta;
        delta = pr.delta;
      } else {
        throw domain_error("couple: supported models are porous and plaplace");
      }
      // x0 at unit state distance from y0 = 0 along the first mode.
      spectral::SpectralField y0 = spectral::SpectralField::zero(cfg.l, cfg.n_modes);
      spectral::SpectralField x0 = y0;
      x0.coeff(1) = sys.model.l2_state() ? 1.0 : std::sqrt(spectral::eigenvalue(1, cfg.l));

      auto csim = sim;
      csim.save_every = 10;
      std::vector<dynamics::CouplingTrace> traces(static_cast<std::size_t>(cfg.paths));
      parallel_for(static_cast<std::size_t>(cfg.paths), [&](std::size_t i) {
        traces[i] = dynamics::simulate_pair_coupled(x0, y0, sys, csim, th, i);
      });

      detail::CsvWriter res(out / "results.csv",
                            {"run", "tau", "coupled", "zeta_energy", "log_weight", "weight"});
      for (int i = 0; i < cfg.paths; ++i) {
        const auto& tr = traces[static_cast<std::size_t>(i)];
        res.row({std::to_string(i), fmt(tr.tau), tr.coupled ? "1" : "0", fmt(tr.zeta_energy),
                 fmt(tr.log_weight), fmt(std::exp(tr.log_weight))});
      }
      detail::CsvWriter chk(out / "checks.csv",
                            {"name", "n_trials", "n_violations", "worst_margin", "tolerance"});
      const auto bounds =
          verify::check_coupling_bounds(traces, {rr, th, eta, delta});
      detail::append_check(chk, bounds);
      total_violations += bounds.n_violations;
      if (cfg.paths >= 30) {
        const auto ws = dynamics::girsanov_weight_stats(traces, eta);
        verify::CheckReport girs{"girsanov_mean_r", ws.n, ws.r_mean_flagged ? 1 : 0,
                                 -std::abs(ws.mean_r - 1.0), 0.0};
        detail::append_check(chk, girs);
        total_violations += girs.n_violations;
        summary["mean_r"] = ws.mean_r;
        summary["se_r"] = ws.se_r;
        summary["mean_r2"] = ws.mean_r2;
        summary["r2_bound"] = ws.r2_bound;
        summary["r2_bound_flagged"] = ws.r2_bound_flagged;
      }
      summary["zeta_energy_bound"] =
          dynamics::zeta_energy_bound(th, rr, eta, sim.horizon, traces.front().dist0);
    } else if (cfg.command == "ergodic") {
      const auto sim = cfg.sim_config();
      if (cfg.model == "fastdiff") {
        rates::FastDiffusionSpec spec{cfg.l, cfg.r, cfg.kappa, cfg.gamma};
        spectral::SpectralField x0 = spectral::SpectralField::zero(cfg.l, cfg.n_modes);
        x0.coeff(1) = 5.0 * std::sqrt(spectral::eigenvalue(1, cfg.l));
        std::vector<double> times;
        for (double t = sim.horizon / 20.0; t <= sim.horizon + 1e-12; t += sim.horizon / 20.0)
          times.push_back(t);
        const auto curve = ergodic::lyapunov_curve(spec, sim, x0, times, cfg.paths);
        detail::CsvWriter res(out / "results.csv", {"time", "mean_V", "se"});
        for (std::size_t i = 0; i < curve.times.size(); ++i)
          res.row({fmt(curve.times[i]), fmt(curve.means[i]), fmt(curve.ses[i])});
        summary["v0"] = curve.v0;
        summary["beta"] = curve.beta;
        summary["c"] = curve.c;
        summary["bound_ok"] = curve.bound_ok;
        if (!curve.bound_ok) ++total_violations;
      } else {
        const auto sys = cfg.model_system();
        spectral::SpectralField x0 = spectral::SpectralField::zero(cfg.l, cfg.n_modes);
        x0.coeff(1) = 3.0;
        std::vector<double> times;
        for (double t = sim.horizon / 12.0; t <= sim.horizon + 1e-12; t += sim.horizon / 12.0)
          times.push_back(t);
        const auto est = ergodic::estimate_decay(ergodic::mode_h_functional(1), x0, sys, sim,
                                                 times, cfg.paths);
        detail::CsvWriter res(out / "results.csv", {"time", "abs_mean_minus_mu", "se"});
        for (std::size_t i = 0; i < est.times.size(); ++i)
          res.row({fmt(est.times[i]), fmt(est.means[i]), fmt(est.ses[i])});
        summary["mu_f"] = est.mu_f;
        summary["fit_ok"] = est.fit_ok;
        summary["fitted_rate"] = est.fitted_rate;
        summary["rate_se"] = est.rate_se;
        summary["window_lo"] = est.window_lo;
        summary["window_hi"] = est.window_hi;
        if (!est.fit_ok) summary["diagnostic"] = est.diagnostic;
      }
    } else if (cfg.command == "verify") {
      detail::CsvWriter chk(out / "checks.csv",
                            {"name", "n_trials", "n_violations", "worst_margin", "tolerance"});
      std::vector<verify::CheckReport> reports;
      for (double rr : {1.5, 2.0, 3.0})
        reports.push_back(verify::check_power_inequality(rr, cfg.trials,
                                                         verify::default_scalar_sampler(),
                                                         cfg.seed));
      for (double rr : {0.4, 0.5, 0.9})
        reports.push_back(verify::check_fastdiff_pointwise(rr, cfg.trials,
                                                           verify::default_scalar_sampler(),
                                                           cfg.seed));
      {
        spectral::QuadratureGrid grid(64, std::numbers::pi);
        reports.push_back(verify::check_fastdiff_holder(0.5, 500, 8, grid, cfg.seed));
        const auto porous = rates::porous_medium_rates({std::numbers::pi, 1.0, 2.0, 3.0});
        reports.push_back(verify::check_monotonicity_22(
            dynamics::ModelSystem::porous(std::numbers::pi, 1.0, 2.0, 16), 3.0, porous.eta,
            porous.delta, 1000, 16, grid, cfg.seed));
        const auto plap = rates::p_laplace_rates({std::numbers::pi, 1.0, 4.0, std::nullopt});
        const auto tail = rates::PLaplaceSpec{std::numbers::pi, 1.0, 4.0, std::nullopt}.q_or_default();
        reports.push_back(verify::check_monotonicity_22(
            dynamics::ModelSystem::plaplace(
                std::numbers::pi, 4.0,
                spectral::DiagonalNoise::power_law(tail.coeff, tail.exponent, 16)),
            plap.theta, plap.eta, plap.delta, 1000, 16, grid, cfg.seed));
      }
      {
        // quick coupling + contraction benchmarks
        const auto sys = dynamics::ModelSystem::porous(std::numbers::pi, 1.0, 2.0, 16);
        dynamics::SimConfig c;
        c.n_modes = 16;
        c.n_quad = 64;
        c.dt = 1e-3;
        c.horizon = 1.0;
        c.save_every = 25;
        spectral::SpectralField y0 = spectral::SpectralField::zero(std::numbers::pi, 16);
        spectral::SpectralField x0 = y0;
        x0.coeff(1) = 1.0;
        c.seed = cfg.seed;
        std::vector<dynamics::CouplingTrace> traces(30);
        parallel_for(traces.size(), [&](std::size_t i) {
          traces[i] = dynamics::simulate_pair_coupled(x0, y0, sys, c, 3.0, i);
        });
        const auto porous = rates::porous_medium_rates({std::numbers::pi, 1.0, 2.0, 3.0});
        reports.push_back(verify::check_coupling_bounds(
            traces, {2.0, 3.0, porous.eta, porous.delta}));

        auto cc = c;
        cc.seed = cfg.seed ^ 0x77;
        std::vector<std::pair<dynamics::PathTrace, dynamics::PathTrace>> pairs(10);
        parallel_for(pairs.size(), [&](std::size_t i) {
          spectral::SpectralField xs = y0;
          xs.coeff(1) = (i % 2 ? 10.0 : 1.0);
          pairs[i] = dynamics::simulate_pair_synchronous(xs, y0, sys, cc, i);
        });
        reports.push_back(
            verify::check_contraction(sys.model, porous.delta, 2.0, pairs));
      }
      for (const auto& rep : reports) {
        detail::append_check(chk, rep);
        total_violations += rep.n_violations;
      }
      summary["checks"] = reports.size();
      summary["total_violations"] = total_violations;
    } else {
      throw domain_error("unknown command '" + cfg.command +
                         "' (expected rates|simulate|couple|ergodic|verify)");
    }

    json manifest;
    manifest["tool"] = "ultraconv";
    manifest["version"] = kVersion;
    manifest["config"] = cfg.to_json();
    manifest["seed_scheme"] =
        "per-run stream k: xoshiro256++ seeded by splitmix64(master ^ 0x9e3779b97f4a7c15 * (k+1))";
    manifest["summary"] = summary;
    std::ofstream mf(out / "manifest.json");
    mf << manifest.dump(2) << "\n";
  } catch (const domain_error& e) {
    log << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    log << "numerical error: " << e.what() << "\n";
    return 2;
  }
  if (total_violations > 0) {
    log << "check violations: " << total_violations << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ultraconv::cli
