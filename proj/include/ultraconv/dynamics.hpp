#pragma once

// Time stepping for dX = b(X) dt + Q dW in the truncated eigenbasis,
// synchronous two-point motion, and the reflection-free coupling
//   dY = { b(Y) + beta (X-Y)/|X-Y|_H^eps } dt + Q dW,
//   eps = (theta+1-r)/(2+theta),  beta = |x-y|_H^eps / (eps T),
// with the Girsanov density R = exp[-int <zeta,dW> - 1/2 int |zeta|^2 dt],
// zeta = beta Q^{-1}(X-Y)/|X-Y|_H^eps, accumulated with left-point (Ito)
// evaluation.  The coupling drift is switched off and Y glued to X once
// |X-Y|_H falls below couple_tol.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ultraconv/common.hpp"
#include "ultraconv/spectral.hpp"

namespace ultraconv::dynamics {

using spectral::DiagonalNoise;
using spectral::Model;
using spectral::QuadratureGrid;
using spectral::SpectralField;

// A model together with its noise and domain; everything a path needs.
struct ModelSystem {
  Model model;
  DiagonalNoise noise;
  double l;

  static ModelSystem linear(double l, double sigma, int n) {
    return {Model::linear(), DiagonalNoise::scalar(sigma, n), l};
  }
  static ModelSystem porous(double l, double sigma, double r, int n) {
    return {Model::porous(r), DiagonalNoise::scalar(sigma, n), l};
  }
  static ModelSystem plaplace(double l, double p, DiagonalNoise noise) {
    return {Model::plaplace(p), std::move(noise), l};
  }
  static ModelSystem fastdiff(double l, double r, double kappa, int n) {
    return {Model::fastdiff(r), DiagonalNoise::from_eigenvalue_power(0.5 - kappa, n, l), l};
  }

  int modes() const { return noise.modes(); }

  // The r entering the coupling exponents: the drift's own r for the
  // H^{-1} models, p-1 for the p-Laplace, 1 for the linear model.
  double coupling_r() const {
    switch (model.kind) {
      case Model::Kind::plaplace:
        return model.exponent - 1.0;
      case Model::Kind::linear:
      case Model::Kind::zero:
        return 1.0;
      default:
        return model.exponent;
    }
  }
};

enum class Scheme { model_default, tamed_explicit, implicit_fixed_point };

struct SimConfig {
  int n_modes = 16;
  int n_quad = 64;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::model_default;
  double couple_tol = 1e-6;
  int save_every = 1;       // save stride in whole dt steps
  double zeta_cap = 1e8;    // abort threshold on |zeta|_E^2 before coupling
  double solver_tol = 1e-10;
  int max_solver_iters = 60;

  void validate() const {
    require(n_modes >= 1, "SimConfig: need at least one mode");
    require(std::isfinite(dt) && dt > 0.0, "SimConfig: dt must be positive");
    require(std::isfinite(horizon) && horizon >= dt, "SimConfig: horizon T must be >= dt");
    require(n_quad >= 4 * n_modes, "SimConfig: need M >= 4N quadrature nodes");
    require(couple_tol > 0.0, "SimConfig: couple_tol must be positive");
    require(save_every >= 1, "SimConfig: save_every must be >= 1");
  }

  Scheme resolved_scheme(const Model& m) const {
    if (scheme != Scheme::model_default) return scheme;
    // Stiff monotone drifts get the implicit resolvent; the p-Laplace
    // gradient nonlinearity is mild enough for taming at small dt.
    return m.kind == Model::Kind::plaplace ? Scheme::tamed_explicit
                                           : Scheme::implicit_fixed_point;
  }
};

struct PathTrace {
  std::vector<double> times;
  std::vector<SpectralField> states;
};

struct CouplingTrace {
  double eps = 0.0;
  double beta = 0.0;
  double tau = std::numeric_limits<double>::infinity();  // infinity when never coupled
  bool coupled = false;
  std::vector<double> times;
  std::vector<double> dist_eps;  // |X_t - Y_t|_H^eps at the saved times
  double zeta_energy = 0.0;      // int_0^T |zeta_t|_E^2 dt
  double log_weight = 0.0;       // log R
  // Launch metadata, so bound checks can be replayed from the trace alone.
  double theta = 0.0;
  double r = 0.0;
  double dist0 = 0.0;
  double horizon = 0.0;
};

// Q dW over one step: mode k gets an independent N(0, q_k^2 dt) increment.
inline SpectralField wiener_increment(const DiagonalNoise& noise, double l, double dt,
                                      RngStream& rng) {
  require(dt > 0.0, "wiener_increment: dt must be positive");
  const double sdt = std::sqrt(dt);
  std::vector<double> c(static_cast<std::size_t>(noise.modes()));
  for (int k = 1; k <= noise.modes(); ++k) c[k - 1] = noise.q(k) * sdt * rng.gaussian();
  return SpectralField(l, std::move(c));
}

// eps = (theta+1-r)/(2+theta) in (0,1), beta = dist^eps/(eps T).
inline std::pair<double, double> coupling_constants(double theta, double r, double dist, double t_end) {
  require(std::isfinite(theta) && theta >= 2.0, "coupling_constants: theta must be >= 2");
  require(theta > r - 1.0, "coupling_constants: theta must exceed r - 1");
  require(std::isfinite(r) && r > 0.0, "coupling_constants: r must be positive");
  require(std::isfinite(t_end) && t_end > 0.0, "coupling_constants: T must be positive");
  require(dist >= 0.0, "coupling_constants: distance must be nonnegative");
  const double eps = (theta + 1.0 - r) / (2.0 + theta);
  const double beta = dist == 0.0 ? 0.0 : std::pow(dist, eps) / (eps * t_end);
  return {eps, beta};
}

// Right side of the pathwise zeta-energy bound
// (2+theta)^{2(theta+1)/theta} d0^{2(theta+1-r)/theta}
//   / ((theta+1-r)^{2(theta+1)/theta} T^{(theta+2)/theta} eta^{2/theta}).
inline double zeta_energy_bound(double theta, double r, double eta, double t_end, double dist0) {
  if (dist0 == 0.0) return 0.0;
  return std::exp(2.0 * (theta + 1.0) / theta * std::log((2.0 + theta) / (theta + 1.0 - r)) +
                  2.0 * (theta + 1.0 - r) / theta * std::log(dist0) -
                  (theta + 2.0) / theta * std::log(t_end) - 2.0 / theta * std::log(eta));
}

namespace detail {

// Solve A x = b in place by LU with partial pivoting (desk-scale N).
inline void solve_dense(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::abs(a[static_cast<std::size_t>(col) * n + col]);
    for (int row = col + 1; row < n; ++row) {
      const double v = std::abs(a[static_cast<std::size_t>(row) * n + col]);
      if (v > best) {
        best = v;
        piv = row;
      }
    }
    if (best == 0.0) throw numeric_error("implicit solve: singular Newton system");
    if (piv != col) {
      for (int j = 0; j < n; ++j)
        std::swap(a[static_cast<std::size_t>(piv) * n + j], a[static_cast<std::size_t>(col) * n + j]);
      std::swap(b[piv], b[col]);
    }
    const double d = a[static_cast<std::size_t>(col) * n + col];
    for (int row = col + 1; row < n; ++row) {
      const double f = a[static_cast<std::size_t>(row) * n + col] / d;
      if (f == 0.0) continue;
      a[static_cast<std::size_t>(row) * n + col] = 0.0;
      for (int j = col + 1; j < n; ++j)
        a[static_cast<std::size_t>(row) * n + j] -= f * a[static_cast<std::size_t>(col) * n + j];
      b[row] -= f * b[col];
    }
  }
  for (int row = n - 1; row >= 0; --row) {
    double acc = b[row];
    for (int j = row + 1; j < n; ++j) acc -= a[static_cast<std::size_t>(row) * n + j] * b[j];
    b[row] = acc / a[static_cast<std::size_t>(row) * n + row];
  }
}

}  // namespace detail

// One-step integrator bound to a system, config and quadrature grid.
// Holds scratch space; not shareable across threads.
class Stepper {
 public:
  Stepper(const ModelSystem& sys, const SimConfig& cfg)
      : sys_(sys), cfg_(cfg), grid_(cfg.n_quad, sys.l) {
    cfg_.validate();
    require(sys_.modes() >= cfg_.n_modes, "Stepper: noise must cover all simulated modes");
  }

  const QuadratureGrid& grid() const { return grid_; }
  const ModelSystem& system() const { return sys_; }
  const SimConfig& config() const { return cfg_; }

  SpectralField drift(const SpectralField& f) const { return spectral::drift(f, sys_.model, grid_); }

  // X^+ = X + dt b(X)/(1 + dt |b(X)|_H) + dW
  SpectralField step_tamed(const SpectralField& x, double dt, const SpectralField& dw) const {
    SpectralField b = drift(x);
    const double tame = 1.0 / (1.0 + dt * spectral::state_norm(b, sys_.model));
    SpectralField out = x;
    for (int k = 1; k <= x.modes(); ++k) out.coeff(k) += dt * tame * b.coeff(k) + dw.coeff(k);
    return out;
  }

  // Solves X^+ = rhs + dt b(X^+) by a damped Newton iteration on the
  // residual, to solver_tol in the state norm.  extra_drift, when given,
  // enters the right-hand side with left-point (explicit) evaluation.
  SpectralField step_implicit(const SpectralField& x, double dt, const SpectralField& dw,
                              const SpectralField* extra_drift = nullptr) const {
    SpectralField rhs = x;
    for (int k = 1; k <= x.modes(); ++k) {
      rhs.coeff(k) += dw.coeff(k);
      if (extra_drift) rhs.coeff(k) += dt * extra_drift->coeff(k);
    }
    SpectralField v = rhs;  // predictor
    SpectralField f = residual(v, rhs, dt);
    double res = spectral::state_norm(f, sys_.model);
    for (int it = 0; it < cfg_.max_solver_iters; ++it) {
      if (res <= cfg_.solver_tol) return v;
      std::vector<double> jac = jacobian(v, dt);
      std::vector<double> dv(f.coeffs().begin(), f.coeffs().end());
      detail::solve_dense(jac, dv, x.modes());
      double stepsz = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 50; ++ls) {
        SpectralField vn = v;
        for (int k = 1; k <= x.modes(); ++k) vn.coeff(k) -= stepsz * dv[k - 1];
        SpectralField fn = residual(vn, rhs, dt);
        const double rn = spectral::state_norm(fn, sys_.model);
        if (rn < res) {
          v = std::move(vn);
          f = std::move(fn);
          res = rn;
          moved = true;
          break;
        }
        stepsz *= 0.5;
      }
      if (!moved) break;
    }
    if (res <= cfg_.solver_tol) return v;
    throw numeric_error("implicit solve: no convergence after " +
                        std::to_string(cfg_.max_solver_iters) +
                        " iterations (residual " + std::to_string(res) + ")");
  }

  SpectralField step(const SpectralField& x, double dt, const SpectralField& dw,
                     const SpectralField* extra_drift = nullptr) const {
    if (cfg_.resolved_scheme(sys_.model) == Scheme::tamed_explicit) {
      SpectralField out = step_tamed(x, dt, dw);
      if (extra_drift)
        for (int k = 1; k <= x.modes(); ++k) out.coeff(k) += dt * extra_drift->coeff(k);
      return out;
    }
    return step_implicit(x, dt, dw, extra_drift);
  }

  // Step with a Brownian-bridge fallback: if the implicit solve fails,
  // the increment is split into two conditionally-exact halves and the
  // sub-steps retried, so the path law is unchanged.
  SpectralField step_with_retry(const SpectralField& x, double dt, const SpectralField& dw,
                                RngStream& rng, int depth = 0,
                                const SpectralField* extra_drift = nullptr) const {
    try {
      return step(x, dt, dw, extra_drift);
    } catch (const numeric_error&) {
      if (depth >= 12) throw;
      auto [dw1, dw2] = bridge_split(dw, dt, rng);
      SpectralField mid = step_with_retry(x, 0.5 * dt, dw1, rng, depth + 1, extra_drift);
      return step_with_retry(mid, 0.5 * dt, dw2, rng, depth + 1, extra_drift);
    }
  }

  // Conditional law of the two half-increments given their sum:
  // dw/2 +- xi with xi ~ N(0, q_k^2 dt/4) independent across modes.
  std::pair<SpectralField, SpectralField> bridge_split(const SpectralField& dw, double dt,
                                                       RngStream& rng) const {
    SpectralField a = dw, b = dw;
    const double s = std::sqrt(0.25 * dt);
    for (int k = 1; k <= dw.modes(); ++k) {
      const double xi = sys_.noise.q(k) * s * rng.gaussian();
      a.coeff(k) = 0.5 * dw.coeff(k) + xi;
      b.coeff(k) = 0.5 * dw.coeff(k) - xi;
    }
    return {std::move(a), std::move(b)};
  }

 private:
  SpectralField residual(const SpectralField& v, const SpectralField& rhs, double dt) const {
    SpectralField b = drift(v);
    SpectralField f = v;
    for (int k = 1; k <= v.modes(); ++k) f.coeff(k) -= rhs.coeff(k) + dt * b.coeff(k);
    return f;
  }

  std::vector<double> jacobian(const SpectralField& v, double dt) const {
    const int n = v.modes();
    std::vector<double> jac(static_cast<std::size_t>(n) * n, 0.0);
    auto at = [&](int row, int col) -> double& {
      return jac[static_cast<std::size_t>(row) * n + col];
    };
    switch (sys_.model.kind) {
      case Model::Kind::zero:
        break;
      case Model::Kind::linear:
        for (int k = 1; k <= n; ++k) at(k - 1, k - 1) = dt * v.eigenvalue_of(k);
        break;
      case Model::Kind::porous:
      case Model::Kind::fastdiff: {
        const double r = sys_.model.exponent;
        auto vals = spectral::synthesize(v, grid_);
        double vmax = 0.0;
        for (double s : vals) vmax = std::max(vmax, std::abs(s));
        // For r < 1 the scalar slope r|s|^{r-1} blows up at zeros; a tiny
        // floor keeps the Jacobian finite, the line search does the rest.
        const double floor_ = r < 1.0 ? 1e-9 * (vmax + 1e-300) : 0.0;
        std::vector<double> slope(vals.size());
        for (std::size_t j = 0; j < vals.size(); ++j)
          slope[j] = grid_.weight() * r * std::pow(std::max(std::abs(vals[j]), floor_), r - 1.0);
        for (int k = 1; k <= n; ++k) {
          auto rowk = grid_.basis(k);
          const double lk = dt * v.eigenvalue_of(k);
          for (int m = k; m <= n; ++m) {
            auto rowm = grid_.basis(m);
            double acc = 0.0;
            for (int j = 0; j < grid_.size(); ++j) acc += slope[j] * rowk[j] * rowm[j];
            at(k - 1, m - 1) = lk * acc;
            if (m != k) at(m - 1, k - 1) = dt * v.eigenvalue_of(m) * acc;
          }
        }
        break;
      }
      case Model::Kind::plaplace: {
        const double p = sys_.model.exponent;
        auto grad = spectral::synthesize_gradient(v, grid_);
        std::vector<double> slope(grad.size());
        for (std::size_t j = 0; j < grad.size(); ++j)
          slope[j] = grid_.weight() * (p - 1.0) * std::pow(std::abs(grad[j]), p - 2.0);
        const double pf = std::numbers::pi / sys_.l;
        for (int k = 1; k <= n; ++k) {
          auto rowk = grid_.basis_grad_unit(k);
          for (int m = k; m <= n; ++m) {
            auto rowm = grid_.basis_grad_unit(m);
            double acc = 0.0;
            for (int j = 0; j < grid_.size(); ++j) acc += slope[j] * rowk[j] * rowm[j];
            const double val = dt * (k * pf) * (m * pf) * acc;
            at(k - 1, m - 1) = val;
            at(m - 1, k - 1) = val;
          }
        }
        break;
      }
    }
    for (int k = 0; k < n; ++k) at(k, k) += 1.0;
    return jac;
  }

  ModelSystem sys_;
  SimConfig cfg_;
  QuadratureGrid grid_;
};

// Free-function form of the single-step contract.
inline SpectralField step(const SpectralField& state, const ModelSystem& sys, const SimConfig& cfg,
                          const SpectralField& increment) {
  return Stepper(sys, cfg).step(state, cfg.dt, increment);
}

// `stream` selects the run's independent noise stream under the master
// seed, so ensembles can map run index -> stream index reproducibly.
inline PathTrace simulate_path(const SpectralField& x0, const ModelSystem& sys,
                               const SimConfig& cfg, std::uint64_t stream = 0) {
  cfg.validate();
  require(x0.modes() == cfg.n_modes, "simulate_path: x0 mode count must match config");
  Stepper st(sys, cfg);
  RngStream rng(cfg.seed, stream);
  PathTrace tr;
  SpectralField x = x0;
  double t = 0.0;
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  long stepno = 0;
  while (t < cfg.horizon - 1e-12 * cfg.horizon) {
    const double h = std::min(cfg.dt, cfg.horizon - t);
    SpectralField dw = wiener_increment(sys.noise, sys.l, h, rng);
    x = st.step_with_retry(x, h, dw, rng);
    t += h;
    ++stepno;
    if (stepno % cfg.save_every == 0 || t >= cfg.horizon - 1e-12 * cfg.horizon) {
      tr.times.push_back(t);
      tr.states.push_back(x);
    }
  }
  return tr;
}

// Two paths driven by the identical noise increments.
inline std::pair<PathTrace, PathTrace> simulate_pair_synchronous(const SpectralField& x0,
                                                                 const SpectralField& y0,
                                                                 const ModelSystem& sys,
                                                                 const SimConfig& cfg,
                                                                 std::uint64_t stream = 0) {
  cfg.validate();
  x0.check_compatible(y0);
  require(x0.modes() == cfg.n_modes, "simulate_pair_synchronous: mode count mismatch");
  Stepper st(sys, cfg);
  RngStream rng(cfg.seed, stream);
  PathTrace trx, try_;
  SpectralField x = x0, y = y0;
  double t = 0.0;
  trx.times.push_back(0.0);
  trx.states.push_back(x);
  try_.times.push_back(0.0);
  try_.states.push_back(y);
  long stepno = 0;
  while (t < cfg.horizon - 1e-12 * cfg.horizon) {
    const double h = std::min(cfg.dt, cfg.horizon - t);
    SpectralField dw = wiener_increment(sys.noise, sys.l, h, rng);
    x = st.step_with_retry(x, h, dw, rng);
    y = st.step_with_retry(y, h, dw, rng);
    t += h;
    ++stepno;
    if (stepno % cfg.save_every == 0 || t >= cfg.horizon - 1e-12 * cfg.horizon) {
      trx.times.push_back(t);
      trx.states.push_back(x);
      try_.times.push_back(t);
      try_.states.push_back(y);
    }
  }
  return {std::move(trx), std::move(try_)};
}

inline CouplingTrace simulate_pair_coupled(const SpectralField& x0, const SpectralField& y0,
                                           const ModelSystem& sys, const SimConfig& cfg,
                                           double theta, std::uint64_t stream = 0) {
  cfg.validate();
  x0.check_compatible(y0);
  require(x0.modes() == cfg.n_modes, "simulate_pair_coupled: mode count mismatch");
  Stepper st(sys, cfg);
  RngStream rng(cfg.seed, stream);

  CouplingTrace tr;
  tr.theta = theta;
  tr.r = sys.coupling_r();
  tr.horizon = cfg.horizon;
  SpectralField x = x0, y = y0;
  tr.dist0 = spectral::state_norm(x0 - y0, sys.model);
  std::tie(tr.eps, tr.beta) = coupling_constants(theta, tr.r, tr.dist0, cfg.horizon);

  bool coupled = tr.dist0 <= cfg.couple_tol;
  if (coupled) {
    tr.coupled = true;
    tr.tau = 0.0;
    y = x;
  }
  double t = 0.0;
  tr.times.push_back(0.0);
  tr.dist_eps.push_back(coupled ? 0.0 : std::pow(tr.dist0, tr.eps));

  const int n = cfg.n_modes;
  std::vector<double> zeta(static_cast<std::size_t>(n));
  long stepno = 0;
  while (t < cfg.horizon - 1e-12 * cfg.horizon) {
    double remaining = std::min(cfg.dt, cfg.horizon - t);
    while (remaining > 1e-15 * cfg.dt) {
      double h = remaining;
      double dist = coupled ? 0.0 : spectral::state_norm(x - y, sys.model);
      if (!coupled && dist <= cfg.couple_tol) {
        coupled = true;
        tr.coupled = true;
        tr.tau = t;
        y = x;
      }
      if (!coupled) {
        // The eps-distance is the linear clock of the coupling: keep the
        // per-substep decrement well below the current eps-distance.
        const double de = std::pow(dist, tr.eps);
        while (tr.beta > 0.0 && de < 10.0 * tr.eps * tr.beta * h && h > cfg.dt * 0x1p-20) h *= 0.5;
      }
      SpectralField dw = wiener_increment(sys.noise, sys.l, h, rng);
      if (coupled) {
        x = st.step_with_retry(x, h, dw, rng);
        y = x;
      } else {
        const double de = std::pow(dist, tr.eps);
        double z2 = 0.0;
        double zdb = 0.0;
        for (int k = 1; k <= n; ++k) {
          const double ak = x.coeff(k) - y.coeff(k);
          zeta[k - 1] = tr.beta * ak / (sys.noise.q(k) * de);
          z2 += zeta[k - 1] * zeta[k - 1];
          // raw E-space increment of mode k is dw_k / q_k
          zdb += zeta[k - 1] * dw.coeff(k) / sys.noise.q(k);
        }
        if (z2 > cfg.zeta_cap)
          throw numeric_error("coupling: |zeta|_E^2 exceeded the configured cap before the "
                              "coupling time (dt too coarse near coupling)");
        tr.zeta_energy += z2 * h;
        tr.log_weight += -zdb - 0.5 * z2 * h;
        SpectralField cpl = x - y;
        cpl *= tr.beta / de;
        x = st.step_with_retry(x, h, dw, rng);
        y = st.step_with_retry(y, h, dw, rng, 0, &cpl);
        const double dnew = spectral::state_norm(x - y, sys.model);
        if (dnew <= cfg.couple_tol) {
          coupled = true;
          tr.coupled = true;
          tr.tau = t + h;
          y = x;
        }
      }
      t += h;
      remaining -= h;
    }
    ++stepno;
    if (stepno % cfg.save_every == 0 || t >= cfg.horizon - 1e-12 * cfg.horizon) {
      tr.times.push_back(t);
      tr.dist_eps.push_back(coupled ? 0.0
                                    : std::pow(spectral::state_norm(x - y, sys.model), tr.eps));
    }
  }
  return tr;
}

struct WeightStats {
  long n = 0;
  double mean_r = 0.0;
  double se_r = 0.0;
  double mean_r2 = 0.0;
  double se_r2 = 0.0;
  double r2_bound = 0.0;       // exp of the zeta-energy bound
  bool r_mean_flagged = false;   // |mean R - 1| > 3 SE
  bool r2_bound_flagged = false; // mean R^2 > bound + 3 SE
};

inline WeightStats girsanov_weight_stats(std::span<const CouplingTrace> traces, double eta) {
  require(traces.size() >= 30, "girsanov_weight_stats: need at least 30 traces");
  require(eta > 0.0, "girsanov_weight_stats: eta must be positive");
  const auto& t0 = traces.front();
  for (const auto& tr : traces)
    require(tr.theta == t0.theta && tr.r == t0.r && tr.horizon == t0.horizon &&
                std::abs(tr.dist0 - t0.dist0) <= 1e-9 * (1.0 + t0.dist0),
            "girsanov_weight_stats: traces must share (theta, r, T, |x0-y0|)");
  WeightStats ws;
  ws.n = static_cast<long>(traces.size());
  double s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0;
  for (const auto& tr : traces) {
    const double rw = std::exp(tr.log_weight);
    const double rw2 = rw * rw;
    s1 += rw;
    q1 += rw * rw;
    s2 += rw2;
    q2 += rw2 * rw2;
  }
  const double n = static_cast<double>(ws.n);
  ws.mean_r = s1 / n;
  ws.mean_r2 = s2 / n;
  ws.se_r = std::sqrt(std::max(0.0, q1 / n - ws.mean_r * ws.mean_r) / (n - 1.0));
  ws.se_r2 = std::sqrt(std::max(0.0, q2 / n - ws.mean_r2 * ws.mean_r2) / (n - 1.0));
  ws.r2_bound = std::exp(zeta_energy_bound(t0.theta, t0.r, eta, t0.horizon, t0.dist0));
  ws.r_mean_flagged = std::abs(ws.mean_r - 1.0) > 3.0 * ws.se_r;
  ws.r2_bound_flagged = ws.mean_r2 > ws.r2_bound + 3.0 * ws.se_r2;
  return ws;
}

}  // namespace ultraconv::dynamics
