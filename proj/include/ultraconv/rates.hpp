#pragma once

// Closed-form convergence-rate constants for monotone SPDEs with a
// dissipativity bound of the form
//   2 <b(u)-b(v), u-v>  <=  -max{ eta |u-v|_Q^theta |u-v|_H^{r+1-theta},
//                                 delta |u-v|_H^{1+r} },
// theta in [2,inf) with theta > r-1.  From (r, theta, eta, delta) we get
//
//   alpha = (theta(r+1)/(r-1))^{(r+1)/(r-1)} (2+theta)
//           / ( (theta+1-r)^{2r/(r-1)} delta^{2(theta+1-r)/(theta(r-1))} eta^{2/theta} )
//
//   lambda = sup_{t>0} (1/t) log( 2 / (exp[alpha t^{-(r+1)/(r-1)}] - 1) )
//
// together with two closed-form lower bounds for lambda and the envelope
// constant C0.  Everything is evaluated through logarithms of the factors
// so that exponents like 4/(r-1) near r = 1 do not overflow silently.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "ultraconv/common.hpp"

namespace ultraconv::rates {

struct GeneralRateParams {
  double r;      // nonlinearity exponent, > 1
  double theta;  // coupling exponent, >= 2 and > r-1
  double eta;    // Q-norm dissipativity scale, > 0
  double delta;  // H-norm dissipativity scale, > 0

  void validate() const {
    require(std::isfinite(r) && r > 1.0, "GeneralRateParams: r must be finite and > 1");
    require(std::isfinite(theta) && theta >= 2.0,
            "GeneralRateParams: theta must be finite and >= 2");
    require(theta > r - 1.0, "GeneralRateParams: theta must exceed r - 1");
    require(std::isfinite(eta) && eta > 0.0, "GeneralRateParams: eta must be finite and > 0");
    require(std::isfinite(delta) && delta > 0.0, "GeneralRateParams: delta must be finite and > 0");
  }
};

inline double log_alpha_general(const GeneralRateParams& p) {
  p.validate();
  const double r = p.r, th = p.theta;
  return (r + 1.0) / (r - 1.0) * std::log(th * (r + 1.0) / (r - 1.0)) + std::log(2.0 + th) -
         2.0 * r / (r - 1.0) * std::log(th + 1.0 - r) -
         2.0 * (th + 1.0 - r) / (th * (r - 1.0)) * std::log(p.delta) -
         2.0 / th * std::log(p.eta);
}

inline double alpha_general(const GeneralRateParams& p) {
  const double la = log_alpha_general(p);
  const double a = std::exp(la);
  if (!std::isfinite(a))
    throw numeric_error("alpha_general: alpha overflows double range (log alpha = " +
                        std::to_string(la) + "); the rate bound underflows to 0");
  return a;
}

inline double log_c0_constant(const GeneralRateParams& p) {
  p.validate();
  const double r = p.r, th = p.theta;
  return -2.0 / th * std::log(p.eta) +
         2.0 * (th + 1.0) / th * std::log((2.0 + th) / (th + 1.0 - r)) +
         2.0 * (th + 1.0 - r) / (th * (r - 1.0)) * std::log(2.0 / (p.delta * (r - 1.0)));
}

inline double c0_constant(const GeneralRateParams& p) {
  const double lc = log_c0_constant(p);
  const double c = std::exp(lc);
  if (!std::isfinite(c) || c <= 0.0)
    throw numeric_error("c0_constant: C0 leaves double range (log C0 = " + std::to_string(lc) + ")");
  return c;
}

// log of the factor turning C0 into alpha:
// alpha = C0 ((r+1)/(r-1))^{(r+1)/(r-1)}
//            (theta(r-1)/(2(theta+1-r)))^{2(theta+1-r)/(theta(r-1))}
//            (theta/(2+theta))^{(2+theta)/theta}.
inline double log_c0_to_alpha_factor(double r, double theta) {
  const double a1 = 2.0 * (theta + 1.0 - r) / (theta * (r - 1.0));
  const double a2 = (2.0 + theta) / theta;
  return (a1 + a2) * std::log(a1 + a2) - a1 * std::log(a1) - a2 * std::log(a2);
}

namespace detail {

inline double log_expm1(double u) {
  // log(e^u - 1); for u beyond ~36 the -1 is below double resolution.
  return u > 36.0 ? u : std::log(std::expm1(u));
}

// log(log(1 + 2 e^{-s})) without underflow: for large s the inner log is
// 2 e^{-s}(1 + O(e^{-s})), so the value is log 2 - s up to e^{-s} terms.
inline double log_log1p_two_exp_neg(double s) {
  return s > 36.0 ? std::numbers::ln2 - s : std::log(std::log1p(2.0 * std::exp(-s)));
}

}  // namespace detail

// Objective g(t) = (1/t) log(2 / (exp[alpha t^{-(r+1)/(r-1)}] - 1)),
// positive exactly on t > t_min = (alpha / log 3)^{(r-1)/(r+1)}.
inline double rate_objective(double t, double log_alpha, double r) {
  require(t > 0.0, "rate_objective: t must be positive");
  const double m = (r + 1.0) / (r - 1.0);
  const double u = std::exp(log_alpha - m * std::log(t));
  return (std::numbers::ln2 - detail::log_expm1(u)) / t;
}

inline double lambda_t_min(double log_alpha, double r) {
  return std::exp((r - 1.0) / (r + 1.0) * (log_alpha - std::log(std::log(3.0))));
}

// The closed-form witness point t = (alpha / log(1 + 2 e^{-(r+1)/(r-1)}))^{(r-1)/(r+1)},
// at which g(t) equals the primary lower bound exactly.
inline double lambda_witness_time(double log_alpha, double r) {
  const double lg = detail::log_log1p_two_exp_neg((1.0 + r) / (r - 1.0));
  return std::exp((r - 1.0) / (r + 1.0) * (log_alpha - lg));
}

struct LambdaResult {
  double lambda;
  double t_opt;
};

// Maximizes g over (t_min, 1e4 t_min): coarse log-spaced bracket, then
// golden-section refinement to 1e-10 relative in t.  g vanishes at both
// bracket ends and is treated as unimodal in between; tests cross-check
// against a dense-grid oracle.
inline LambdaResult lambda_sup_log(double log_alpha, double r) {
  require(std::isfinite(log_alpha), "lambda_sup: log alpha must be finite");
  require(r > 1.0, "lambda_sup: r must exceed 1");
  const double tmin = lambda_t_min(log_alpha, r);
  const double lo = std::log(tmin) + 1e-12;
  const double hi = std::log(tmin) + std::log(1e4);
  constexpr int kCoarse = 600;
  int best = 1;
  double best_g = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < kCoarse; ++i) {
    const double t = std::exp(lo + (hi - lo) * i / kCoarse);
    const double gv = rate_objective(t, log_alpha, r);
    if (gv > best_g) {
      best_g = gv;
      best = i;
    }
  }
  double a = std::exp(lo + (hi - lo) * (best - 1) / kCoarse);
  double b = std::exp(lo + (hi - lo) * (best + 1) / kCoarse);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double gc = rate_objective(c, log_alpha, r);
  double gd = rate_objective(d, log_alpha, r);
  for (int it = 0; it < 400 && (b - a) > 1e-10 * b; ++it) {
    if (gc > gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - gr * (b - a);
      gc = rate_objective(c, log_alpha, r);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + gr * (b - a);
      gd = rate_objective(d, log_alpha, r);
    }
  }
  const double t0 = 0.5 * (a + b);
  const double lam = rate_objective(t0, log_alpha, r);
  if (!(lam > 0.0) || !std::isfinite(lam))
    throw numeric_error("lambda_sup: optimizer found no positive rate (defect)");
  return {lam, t0};
}

inline LambdaResult lambda_sup(double alpha, double r) {
  require(std::isfinite(alpha) && alpha > 0.0, "lambda_sup: alpha must be finite and positive");
  return lambda_sup_log(std::log(alpha), r);
}

// Primary bound: g evaluated at the witness time, in closed form; the
// secondary bound replaces the log(1 + 2 e^{-(1+r)/(r-1)}) factor by e^{-1}.
inline std::pair<double, double> lambda_lower_bounds(const GeneralRateParams& p) {
  p.validate();
  const double r = p.r, th = p.theta;
  const double base = 2.0 * r / (r + 1.0) * std::log(th + 1.0 - r) +
                      2.0 * (th + 1.0 - r) / (th * (r + 1.0)) * std::log(p.delta) +
                      2.0 * (r - 1.0) / (th * (r + 1.0)) * std::log(p.eta) - std::log(th) -
                      (r - 1.0) / (r + 1.0) * std::log(2.0 + th);
  const double logfac =
      (r - 1.0) / (r + 1.0) * detail::log_log1p_two_exp_neg((1.0 + r) / (r - 1.0));
  return {std::exp(base + logfac), std::exp(base - 1.0)};
}

struct RateReport {
  double alpha;         // +inf when the closed form overflows (see alpha_overflow)
  double lambda;
  double t_opt;
  double lb_primary;
  double lb_secondary;
  double c0;
  double log_alpha;
  double log_c0;
  bool alpha_overflow = false;
  bool c0_overflow = false;
};

inline RateReport rate_report(const GeneralRateParams& p) {
  RateReport rep{};
  rep.log_alpha = log_alpha_general(p);
  rep.log_c0 = log_c0_constant(p);
  rep.alpha = std::exp(rep.log_alpha);
  rep.c0 = std::exp(rep.log_c0);
  rep.alpha_overflow = !std::isfinite(rep.alpha);
  rep.c0_overflow = !std::isfinite(rep.c0);
  const auto [lam, t0] = lambda_sup_log(rep.log_alpha, p.r);
  rep.lambda = lam;
  rep.t_opt = t0;
  std::tie(rep.lb_primary, rep.lb_secondary) = lambda_lower_bounds(p);
  return rep;
}

// ---------------------------------------------------------------------------
// Stochastic porous medium equation dX = Laplace(X^r) dt + sigma dW on (0,l).

struct PorousMediumSpec {
  double l;
  double sigma;
  double r;
  std::optional<double> theta;  // defaults to r + 1, the alpha-minimizing choice

  double theta_or_default() const { return theta.value_or(r + 1.0); }

  void validate() const {
    require(std::isfinite(l) && l > 0.0, "PorousMediumSpec: l must be positive");
    require(std::isfinite(sigma) && sigma > 0.0, "PorousMediumSpec: sigma must be positive");
    require(std::isfinite(r) && r > 1.0, "PorousMediumSpec: r must exceed 1");
    const double th = theta_or_default();
    require(th > r - 1.0 && th >= 2.0 && th <= r + 1.0,
            "PorousMediumSpec: theta must lie in (r-1, r+1] and [2, r+1]");
  }
};

struct PorousRates {
  double theta;        // the theta actually used for (eta, delta, alpha_theta)
  double eta;
  double delta;
  double alpha_theta;  // alpha at the given theta
  GeneralRateParams params_at_default;  // theta = r+1 parameters behind `report`
  RateReport report;                    // evaluated at theta = r+1
};

inline double porous_eta(double l, double sigma, double r, double theta) {
  return std::exp((2.0 - r) * std::numbers::ln2 + theta * std::log(sigma) +
                  (r + 1.0 - theta) * std::log(std::numbers::pi / l));
}

inline double porous_delta(double l, double r) {
  return std::exp((2.0 - r) * std::numbers::ln2 + (r + 1.0) * std::log(std::numbers::pi / l));
}

// alpha at theta = r+1 in the closed single-formula form
// l^{4/(r-1)} (3+r) (r+1)^{2(r+1)/(r-1)} / ((2 pi)^{4/(r-1)} sigma^2 (r-1)^{(r+1)/(r-1)}).
inline double log_porous_alpha_closed(double l, double sigma, double r) {
  return 4.0 / (r - 1.0) * std::log(l) + std::log(3.0 + r) +
         2.0 * (r + 1.0) / (r - 1.0) * std::log(r + 1.0) -
         4.0 / (r - 1.0) * std::log(2.0 * std::numbers::pi) - 2.0 * std::log(sigma) -
         (r + 1.0) / (r - 1.0) * std::log(r - 1.0);
}

// The directly displayed lambda lower bound for the porous medium,
// (2 pi)^{4/(r+1)} sigma^{2(r-1)/(r+1)} {log(1+2e^{-(r+1)/(r-1)})}^{(r-1)/(r+1)}
//   / ((r+1) l^{4/(r+1)} (3+r)^{(r-1)/(r+1)}).
inline double porous_lb_display(double l, double sigma, double r) {
  return std::exp(4.0 / (r + 1.0) * std::log(2.0 * std::numbers::pi) +
                  2.0 * (r - 1.0) / (r + 1.0) * std::log(sigma) +
                  (r - 1.0) / (r + 1.0) *
                      detail::log_log1p_two_exp_neg((r + 1.0) / (r - 1.0)) -
                  std::log(r + 1.0) - 4.0 / (r + 1.0) * std::log(l) -
                  (r - 1.0) / (r + 1.0) * std::log(3.0 + r));
}

inline PorousRates porous_medium_rates(const PorousMediumSpec& spec) {
  spec.validate();
  const double th = spec.theta_or_default();
  PorousRates out{};
  out.theta = th;
  out.eta = porous_eta(spec.l, spec.sigma, spec.r, th);
  out.delta = porous_delta(spec.l, spec.r);
  out.alpha_theta = alpha_general({spec.r, th, out.eta, out.delta});
  const double th_def = spec.r + 1.0;
  out.params_at_default = {spec.r, th_def, porous_eta(spec.l, spec.sigma, spec.r, th_def),
                           out.delta};
  out.report = rate_report(out.params_at_default);
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic p-Laplace equation dX = div(|grad X|^{p-2} grad X) dt + Q dW,
// Q e_i = q_i e_i with q_i^2 >= sigma^2 / i^2 and sum q_i^2 < infinity.

struct PLaplaceSpec {
  struct NoiseTail {
    double coeff;     // q_i = coeff * i^exponent
    double exponent;
  };

  double l;
  double sigma;
  double p;
  // Default tail keeps the noise comfortably above the q_i = sigma/i floor
  // while staying square-summable.
  std::optional<NoiseTail> q;

  NoiseTail q_or_default() const { return q.value_or(NoiseTail{sigma, -0.75}); }

  void validate() const {
    require(std::isfinite(l) && l > 0.0, "PLaplaceSpec: l must be positive");
    require(std::isfinite(sigma) && sigma > 0.0, "PLaplaceSpec: sigma must be positive");
    require(std::isfinite(p) && p > 2.0, "PLaplaceSpec: p must exceed 2");
    const NoiseTail t = q_or_default();
    require(t.coeff > 0.0, "PLaplaceSpec: noise tail coefficient must be positive");
    // sum q_i^2 < infinity  iff exponent < -1/2 for a power tail.
    require(t.exponent < -0.5, "PLaplaceSpec: noise tail q_i = c i^a needs a < -1/2 (sum q_i^2)");
    // q_i >= sigma / i for all i  iff coeff >= sigma and exponent >= -1.
    require(t.coeff >= sigma && t.exponent >= -1.0,
            "PLaplaceSpec: noise tail must dominate sigma/i (q_i^2 >= sigma^2/i^2)");
  }
};

struct PLaplaceRates {
  double r;      // p - 1
  double theta;  // p
  double eta;
  double delta;
  GeneralRateParams params;
  RateReport report;
};

inline double log_plaplace_alpha_closed(double l, double sigma, double p) {
  return p / (p - 2.0) * std::log(p * p * l * l / (std::numbers::pi * std::numbers::pi * (p - 2.0))) +
         std::log(2.0 + p) - 2.0 * std::log(sigma) - 4.0 * (p - 1.0) / (p - 2.0) * std::numbers::ln2;
}

inline double plaplace_lb_display(double l, double sigma, double p) {
  return std::exp(2.0 * std::log(std::numbers::pi) + 4.0 * (p - 1.0) / p * std::numbers::ln2 +
                  2.0 * (p - 2.0) / p * std::log(sigma) - std::log(p) - 2.0 * std::log(l) -
                  (p - 2.0) / p * std::log(2.0 + p) +
                  (p - 2.0) / p * detail::log_log1p_two_exp_neg(p / (p - 2.0)));
}

inline PLaplaceRates p_laplace_rates(const PLaplaceSpec& spec) {
  spec.validate();
  PLaplaceRates out{};
  out.r = spec.p - 1.0;
  out.theta = spec.p;
  const double lf = (spec.p - 1.0) * std::numbers::ln2;
  out.eta = std::exp(lf + spec.p * std::log(std::numbers::pi * spec.sigma / spec.l));
  out.delta = std::exp(lf + spec.p * std::log(std::numbers::pi / spec.l));
  out.params = {out.r, out.theta, out.eta, out.delta};
  out.report = rate_report(out.params);
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic fast-diffusion equation, r in (0,1), with the constructive
// noise q_i = lambda_i^{1/2 - kappa}.

struct FastDiffusionSpec {
  double l;
  double r;      // in (0,1)
  double kappa;  // noise-decay exponent of q_i = lambda_i^{1/2 - kappa}
  double gamma = 1.0;           // Lyapunov scale
  std::optional<double> theta;  // defaults to 4/(1+r)
  std::optional<double> eps;    // defaults to 1 - 4 kappa/(1+r)

  double theta_or_default() const { return theta.value_or(4.0 / (1.0 + r)); }
  double eps_or_default() const { return eps.value_or(1.0 - 4.0 * kappa / (1.0 + r)); }

  void validate() const {
    require(std::isfinite(l) && l > 0.0, "FastDiffusionSpec: l must be positive");
    require(std::isfinite(r) && r > 0.0 && r < 1.0, "FastDiffusionSpec: r must lie in (0,1)");
    require(std::isfinite(kappa), "FastDiffusionSpec: kappa must be finite");
    require(std::isfinite(gamma) && gamma > 0.0, "FastDiffusionSpec: gamma must be positive");
  }
};

struct FastDiffusionAdmissibility {
  bool admissible = false;
  std::string reason;      // first failed condition, empty when admissible
  double theta = 0.0;      // derived pair used by the construction
  double eps = 0.0;
  bool r_in_range = false;       // r in (1/3, 1)
  bool summable = false;         // sum q_i^2/lambda_i < inf  iff kappa > 1/4
  bool inf_positive = false;     // inf_i |q_i| lambda_i^{(1-eps)/theta - 1/2} > 0 iff kappa <= (1-eps)/theta
  bool eps_in_range = false;     // eps in ((1-r)/(2(1+r)), 1)
  bool theta_in_range = false;   // theta >= 4/(1+r)
};

inline FastDiffusionAdmissibility fast_diffusion_admissible(const FastDiffusionSpec& spec) {
  spec.validate();
  FastDiffusionAdmissibility a{};
  a.theta = spec.theta_or_default();
  a.eps = spec.eps_or_default();
  a.r_in_range = spec.r > 1.0 / 3.0 && spec.r < 1.0;
  a.summable = spec.kappa > 0.25;
  a.inf_positive = spec.kappa <= (1.0 - a.eps) / a.theta + 1e-15;
  a.eps_in_range = a.eps > (1.0 - spec.r) / (2.0 * (1.0 + spec.r)) && a.eps < 1.0;
  a.theta_in_range = a.theta >= 4.0 / (1.0 + spec.r) - 1e-15;
  if (!a.r_in_range) {
    a.reason = spec.r <= 1.0 / 3.0 ? "r <= 1/3" : "r >= 1";
  } else if (!a.summable) {
    a.reason = "kappa <= 1/4";
  } else if (spec.kappa >= (1.0 + 3.0 * spec.r) / 8.0) {
    a.reason = "kappa >= (1+3r)/8";
  } else if (!a.theta_in_range) {
    a.reason = "theta < 4/(1+r)";
  } else if (!a.eps_in_range) {
    a.reason = "eps outside ((1-r)/(2(1+r)), 1)";
  } else if (!a.inf_positive) {
    a.reason = "kappa > (1-eps)/theta";
  }
  a.admissible = a.reason.empty();
  return a;
}

}  // namespace ultraconv::rates
