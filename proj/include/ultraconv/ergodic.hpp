#pragma once

// Monte Carlo ergodicity toolkit: invariant-measure sampling along a long
// thinned path, empirical decay-rate fitting for |E f(X_t) - mu(f)|,
// the Lyapunov drift curve E exp[gamma (1+|X|_H^2)^{(1-r)/2}] for fast
// diffusion, and the exact Ornstein-Uhlenbeck moments of the linear model
// used as an end-to-end oracle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ultraconv/common.hpp"
#include "ultraconv/dynamics.hpp"
#include "ultraconv/rates.hpp"
#include "ultraconv/spectral.hpp"

namespace ultraconv::ergodic {

using dynamics::ModelSystem;
using dynamics::SimConfig;
using dynamics::Stepper;
using spectral::Model;
using spectral::SpectralField;

using Functional = std::function<double(const SpectralField&)>;

// <., e_k>_H = c_k / lambda_k.
inline Functional mode_h_functional(int k) {
  return [k](const SpectralField& f) { return f.coeff(k) / f.eigenvalue_of(k); };
}

// Bounded test functional scale * tanh(<., e_k>_H / scale).
inline Functional tanh_h_functional(int k, double scale) {
  return [k, scale](const SpectralField& f) {
    return scale * std::tanh(f.coeff(k) / (f.eigenvalue_of(k) * scale));
  };
}

// Closed-form lower bound on the convergence rate, used to validate
// burn-in times; absent where no closed form applies.
inline std::optional<double> rate_prior(const ModelSystem& sys) {
  switch (sys.model.kind) {
    case Model::Kind::linear:
      return spectral::eigenvalue(1, sys.l);
    case Model::Kind::porous: {
      const double sigma = sys.noise.tail().coeff;
      return rates::porous_medium_rates({sys.l, sigma, sys.model.exponent, std::nullopt})
          .report.lb_secondary;
    }
    case Model::Kind::plaplace: {
      const double sigma = sys.noise.tail().coeff;
      return rates::p_laplace_rates({sys.l, sigma, sys.model.exponent, std::nullopt})
          .report.lb_secondary;
    }
    default:
      return std::nullopt;
  }
}

struct InvariantSample {
  std::vector<SpectralField> samples;
  double mean_h2 = 0.0;  // estimator of mu(|.|_H^2)
  double se_h2 = 0.0;
};

// Long-run samples separated by `thinning` time units after `burn_in`.
inline InvariantSample sample_invariant(const ModelSystem& sys, const SimConfig& cfg,
                                        double burn_in, int n_samples, double thinning) {
  cfg.validate();
  require(n_samples >= 1, "sample_invariant: need at least one sample");
  require(thinning >= cfg.dt, "sample_invariant: thinning must be at least dt");
  require(burn_in >= 0.0, "sample_invariant: burn_in must be nonnegative");
  if (auto prior = rate_prior(sys))
    require(burn_in >= 5.0 / *prior,
            "sample_invariant: burn_in must be >= 5 / lambda_prior for this model");
  Stepper st(sys, cfg);
  RngStream rng(cfg.seed, 0);
  SpectralField x = SpectralField::zero(sys.l, cfg.n_modes);
  auto advance = [&](double span) {
    double t = 0.0;
    while (t < span - 1e-12 * std::max(span, 1.0)) {
      const double h = std::min(cfg.dt, span - t);
      SpectralField dw = dynamics::wiener_increment(sys.noise, sys.l, h, rng);
      x = st.step_with_retry(x, h, dw, rng);
      t += h;
    }
  };
  InvariantSample out;
  advance(burn_in);
  out.samples.reserve(static_cast<std::size_t>(n_samples));
  double s = 0.0, q = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    advance(thinning);
    out.samples.push_back(x);
    const double h2 = spectral::norm_H(x);
    s += h2 * h2;
    q += h2 * h2 * h2 * h2;
  }
  const double n = static_cast<double>(n_samples);
  out.mean_h2 = s / n;
  out.se_h2 = n > 1 ? std::sqrt(std::max(0.0, q / n - out.mean_h2 * out.mean_h2) / (n - 1.0)) : 0.0;
  return out;
}

struct DecayEstimate {
  std::vector<double> times;
  std::vector<double> means;  // |E f(X_t) - mu_f|
  std::vector<double> ses;    // standard errors of the ensemble means
  double mu_f = 0.0;
  double mu_f_se = 0.0;
  double fitted_rate = 0.0;
  double rate_se = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool fit_ok = false;
  std::string diagnostic;
};

struct DecayOptions {
  std::optional<double> mu_override;  // skip the long-run mu estimate
  const std::vector<SpectralField>* start_pool = nullptr;  // per-path starts, cycled
  int n_mu_samples = 200;
  unsigned threads = 0;  // 0 = hardware default
};

// Ensemble means of f(X_t^{x0}) against an independently estimated mu(f),
// with a weighted log-linear rate fit on the window where the signal
// exceeds 3 standard errors.
inline DecayEstimate estimate_decay(const Functional& f, const SpectralField& x0,
                                    const ModelSystem& sys, const SimConfig& cfg,
                                    const std::vector<double>& times, int n_paths,
                                    const DecayOptions& opts = {}) {
  cfg.validate();
  require(n_paths >= 2, "estimate_decay: need at least two paths");
  require(!times.empty(), "estimate_decay: need at least one sampling time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(times[i] > 0.0 && times[i] <= cfg.horizon + 1e-9,
            "estimate_decay: sampling times must lie in (0, T]");
    if (i) require(times[i] > times[i - 1], "estimate_decay: times must be increasing");
  }

  DecayEstimate est;
  est.times = times;

  // mu(f) from an independent long run, never from the decay ensemble.
  if (opts.mu_override) {
    est.mu_f = *opts.mu_override;
    est.mu_f_se = 0.0;
  } else {
    const double prior = rate_prior(sys).value_or(0.5);
    SimConfig mu_cfg = cfg;
    mu_cfg.seed = cfg.seed ^ 0xa5a5a55a5a5aa55aULL;
    const double thin = std::max(2.0 / prior, cfg.dt);
    auto inv = sample_invariant(sys, mu_cfg, 5.0 / prior, opts.n_mu_samples, thin);
    double s = 0.0, q = 0.0;
    for (const auto& smp : inv.samples) {
      const double v = f(smp);
      s += v;
      q += v * v;
    }
    const double n = static_cast<double>(inv.samples.size());
    est.mu_f = s / n;
    est.mu_f_se = std::sqrt(std::max(0.0, q / n - est.mu_f * est.mu_f) / (n - 1.0));
  }

  const std::size_t nt = times.size();
  std::vector<double> acc(static_cast<std::size_t>(n_paths) * nt);
  parallel_for(
      static_cast<std::size_t>(n_paths),
      [&](std::size_t path) {
        Stepper st(sys, cfg);
        RngStream rng(cfg.seed, path + 1);
        SpectralField x = opts.start_pool && !opts.start_pool->empty()
                              ? (*opts.start_pool)[path % opts.start_pool->size()]
                              : x0;
        double t = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
          while (t < times[i] - 1e-9) {
            const double h = std::min(cfg.dt, times[i] - t);
            SpectralField dw = dynamics::wiener_increment(sys.noise, sys.l, h, rng);
            x = st.step_with_retry(x, h, dw, rng);
            t += h;
          }
          acc[path * nt + i] = f(x);
        }
      },
      opts.threads);

  est.means.resize(nt);
  est.ses.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    double s = 0.0, q = 0.0;
    for (int p = 0; p < n_paths; ++p) {
      const double v = acc[static_cast<std::size_t>(p) * nt + i];
      s += v;
      q += v * v;
    }
    const double n = static_cast<double>(n_paths);
    const double mean = s / n;
    est.means[i] = std::abs(mean - est.mu_f);
    est.ses[i] = std::sqrt(std::max(0.0, q / n - mean * mean) / (n - 1.0));
  }

  // Window: leading run of times where the signal beats 3 SE.
  std::size_t win_end = 0;
  while (win_end < nt && est.means[win_end] > 3.0 * est.ses[win_end]) ++win_end;
  if (win_end < 3) {
    est.diagnostic = "signal below 3 SE before a fit window formed (fit declined)";
    return est;
  }
  est.window_lo = times[0];
  est.window_hi = times[win_end - 1];

  // Weighted least squares on log means; delta-method weights (m/se)^2.
  double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
  for (std::size_t i = 0; i < win_end; ++i) {
    const double w = est.ses[i] > 0.0 ? (est.means[i] / est.ses[i]) * (est.means[i] / est.ses[i])
                                      : 1e6;
    const double xv = times[i];
    const double yv = std::log(est.means[i]);
    sw += w;
    swx += w * xv;
    swy += w * yv;
    swxx += w * xv * xv;
    swxy += w * xv * yv;
  }
  const double det = sw * swxx - swx * swx;
  if (det <= 0.0) {
    est.diagnostic = "degenerate fit window";
    return est;
  }
  const double slope = (sw * swxy - swx * swy) / det;
  est.fitted_rate = -slope;
  est.rate_se = std::sqrt(sw / det);
  est.fit_ok = true;
  return est;
}

struct LyapunovCurve {
  double gamma = 0.0;
  double v0 = 0.0;  // V(x0)
  std::vector<double> times;
  std::vector<double> means;  // E V(X_t)
  std::vector<double> ses;
  double k = 1.0;  // pinned
  double beta = 0.0;
  double c = 0.0;
  bool fitted = false;
  bool bound_ok = false;  // means <= V(x0) e^{-beta t} + c within 3 SE at all times
};

inline double lyapunov_v(const SpectralField& x, double gamma, double r) {
  const double h = spectral::norm_H(x);
  return std::exp(gamma * std::pow(1.0 + h * h, 0.5 * (1.0 - r)));
}

// E V(X_t) along the fast-diffusion flow with the drift-bound fit
// E V(X_t) <= k V(x0) e^{-beta t} + c, k pinned to 1.
inline LyapunovCurve lyapunov_curve(const rates::FastDiffusionSpec& spec, const SimConfig& cfg,
                                    const SpectralField& x0, const std::vector<double>& times,
                                    int n_paths, unsigned threads = 0) {
  const auto adm = rates::fast_diffusion_admissible(spec);
  if (!adm.admissible)
    throw domain_error("lyapunov_curve: inadmissible fast-diffusion spec (" + adm.reason + ")");
  cfg.validate();
  require(n_paths >= 2, "lyapunov_curve: need at least two paths");
  require(!times.empty(), "lyapunov_curve: need sampling times");

  ModelSystem sys = ModelSystem::fastdiff(spec.l, spec.r, spec.kappa, cfg.n_modes);
  LyapunovCurve out;
  out.gamma = spec.gamma;
  out.times = times;
  out.v0 = lyapunov_v(x0, spec.gamma, spec.r);

  const std::size_t nt = times.size();
  std::vector<double> acc(static_cast<std::size_t>(n_paths) * nt);
  parallel_for(
      static_cast<std::size_t>(n_paths),
      [&](std::size_t path) {
        Stepper st(sys, cfg);
        RngStream rng(cfg.seed, path + 1);
        SpectralField x = x0;
        double t = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
          while (t < times[i] - 1e-9) {
            const double h = std::min(cfg.dt, times[i] - t);
            SpectralField dw = dynamics::wiener_increment(sys.noise, sys.l, h, rng);
            x = st.step_with_retry(x, h, dw, rng);
            t += h;
          }
          acc[path * nt + i] = lyapunov_v(x, spec.gamma, spec.r);
        }
      },
      threads);

  out.means.resize(nt);
  out.ses.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    double s = 0.0, q = 0.0;
    for (int p = 0; p < n_paths; ++p) {
      const double v = acc[static_cast<std::size_t>(p) * nt + i];
      s += v;
      q += v * v;
    }
    const double n = static_cast<double>(n_paths);
    out.means[i] = s / n;
    out.ses[i] = std::sqrt(std::max(0.0, q / n - out.means[i] * out.means[i]) / (n - 1.0));
  }

  // Profile fit: for fixed beta the optimal c is a weighted mean, so only
  // beta needs a scalar search (log grid + golden refinement).
  auto sse = [&](double beta) {
    double cbest = 0.0;
    for (std::size_t i = 0; i < nt; ++i) cbest += out.means[i] - out.v0 * std::exp(-beta * times[i]);
    cbest /= static_cast<double>(nt);
    double s = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      const double rres = out.means[i] - (out.v0 * std::exp(-beta * times[i]) + cbest);
      s += rres * rres;
    }
    return std::pair{s, cbest};
  };
  const double blo = std::log(1e-3), bhi = std::log(50.0);
  double best_beta = 1.0, best_sse = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 240;
  for (int i = 0; i <= kGrid; ++i) {
    const double b = std::exp(blo + (bhi - blo) * i / kGrid);
    const double s = sse(b).first;
    if (s < best_sse) {
      best_sse = s;
      best_beta = b;
    }
  }
  double a = best_beta * std::exp(-(bhi - blo) / kGrid), b = best_beta * std::exp((bhi - blo) / kGrid);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 120; ++it) {
    const double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    if (sse(c1).first < sse(c2).first)
      b = c2;
    else
      a = c1;
  }
  out.beta = 0.5 * (a + b);
  out.c = sse(out.beta).second;
  out.fitted = out.beta > 0.0 && out.c > 0.0;
  out.bound_ok = true;
  for (std::size_t i = 0; i < nt; ++i) {
    const double bound = out.v0 * std::exp(-out.beta * times[i]) + out.c + 3.0 * out.ses[i];
    if (out.means[i] > bound) out.bound_ok = false;
  }
  return out;
}

struct OuMoments {
  double mean;
  double variance;
};

// Mode-k marginal of the linear model dc_k = -lambda_k c_k dt + sigma dB_k:
// mean x0_k e^{-lambda_k t}, variance sigma^2 (1 - e^{-2 lambda_k t})/(2 lambda_k).
inline OuMoments ou_exact(double l, double sigma, int k, double t, double x0_k) {
  require(l > 0.0 && sigma > 0.0, "ou_exact: l and sigma must be positive");
  require(k >= 1, "ou_exact: mode index must be >= 1");
  require(t >= 0.0, "ou_exact: time must be nonnegative");
  const double lam = spectral::eigenvalue(k, l);
  return {x0_k * std::exp(-lam * t), sigma * sigma * (-std::expm1(-2.0 * lam * t)) / (2.0 * lam)};
}

}  // namespace ultraconv::ergodic
