#pragma once

// Property verification at desk scale: the scalar power inequalities, the
// dissipativity condition on the discretized drifts, and the coupling /
// contraction envelopes, each reported as trial counts with the most
// negative relative margin seen.  Margins follow the convention
//   margin = (slack of the inequality) / max(|LHS|, |RHS|, 1e-300),
// and a trial is a violation when margin < -tolerance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ultraconv/common.hpp"
#include "ultraconv/dynamics.hpp"
#include "ultraconv/rates.hpp"
#include "ultraconv/spectral.hpp"

namespace ultraconv::verify {

using dynamics::CouplingTrace;
using dynamics::ModelSystem;
using dynamics::PathTrace;
using spectral::Model;
using spectral::QuadratureGrid;
using spectral::SpectralField;

struct CheckReport {
  std::string name;
  long n_trials = 0;
  long n_violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;

  void record(double margin) {
    ++n_trials;
    worst_margin = std::min(worst_margin, margin);
    if (margin < -tolerance) ++n_violations;
  }
};

inline double rel_margin(double slack, double lhs, double rhs) {
  return slack / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

using ScalarPairSampler = std::function<std::pair<double, double>(RngStream&)>;

// Default scalar sampler: uniform boxes, log-uniform magnitudes over six
// decades, adversarial near-equal pairs, and the structured quadrant cases
// (s > t >= 0, s >= 0 > t, plus sign flips), cycled by trial.
inline ScalarPairSampler default_scalar_sampler() {
  return [mode = 0](RngStream& rng) mutable -> std::pair<double, double> {
    const int m = mode++ % 6;
    auto heavy = [&rng]() {
      const double mag = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
      return rng.uniform() < 0.5 ? mag : -mag;
    };
    switch (m) {
      case 0:
        return {-10.0 + 20.0 * rng.uniform(), -10.0 + 20.0 * rng.uniform()};
      case 1:
        return {heavy(), heavy()};
      case 2: {  // near-equal
        const double s = heavy();
        return {s, s * (1.0 + 1e-13 * (2.0 * rng.uniform() - 1.0))};
      }
      case 3: {  // s > t >= 0
        const double a = 10.0 * rng.uniform(), b = 10.0 * rng.uniform();
        return {std::max(a, b), std::min(a, b)};
      }
      case 4:  // s >= 0 > t
        return {10.0 * rng.uniform(), -10.0 * rng.uniform() - 1e-12};
      default: {  // sign-flipped quadrant case
        const double a = 10.0 * rng.uniform(), b = 10.0 * rng.uniform();
        return {-std::max(a, b), -std::min(a, b)};
      }
    }
  };
}

// (s^r - t^r)(s - t) >= 2^{1-r} |s-t|^{1+r}, signed powers, r > 1.
// Equality is attained at s = -t.
inline CheckReport check_power_inequality(double r, long n_trials,
                                          ScalarPairSampler sampler = default_scalar_sampler(),
                                          std::uint64_t seed = 0) {
  require(r > 1.0, "check_power_inequality: r must exceed 1");
  CheckReport rep{"power_inequality(r=" + std::to_string(r) + ")", 0, 0,
                  std::numeric_limits<double>::infinity(), 1e-12};
  RngStream rng(seed, 0x31);
  const double c = std::exp2(1.0 - r);
  for (long i = 0; i < n_trials; ++i) {
    auto [s, t] = sampler(rng);
    const double lhs = (spectral::signed_power(s, r) - spectral::signed_power(t, r)) * (s - t);
    const double rhs = c * std::pow(std::abs(s - t), 1.0 + r);
    rep.record(rel_margin(lhs - rhs, lhs, rhs));
  }
  return rep;
}

// (s^r - t^r)(s - t) >= r |s-t|^2 (|s| v |t|)^{r-1}, signed powers, r in (0,1).
inline CheckReport check_fastdiff_pointwise(double r, long n_trials,
                                            ScalarPairSampler sampler = default_scalar_sampler(),
                                            std::uint64_t seed = 0) {
  require(r > 0.0 && r < 1.0, "check_fastdiff_pointwise: r must lie in (0,1)");
  CheckReport rep{"fastdiff_pointwise(r=" + std::to_string(r) + ")", 0, 0,
                  std::numeric_limits<double>::infinity(), 1e-10};
  RngStream rng(seed, 0x32);
  for (long i = 0; i < n_trials; ++i) {
    auto [s, t] = sampler(rng);
    const double lhs = (spectral::signed_power(s, r) - spectral::signed_power(t, r)) * (s - t);
    const double big = std::max(std::abs(s), std::abs(t));
    const double rhs = big == 0.0 ? 0.0 : r * (s - t) * (s - t) * std::pow(big, r - 1.0);
    rep.record(rel_margin(lhs - rhs, lhs, rhs));
  }
  return rep;
}

// Random band-limited field with coefficients scaled log-uniformly over
// six decades; every third draw produces a near-equal partner.
inline SpectralField random_field(int n, double l, RngStream& rng, double scale) {
  std::vector<double> c(static_cast<std::size_t>(n));
  for (auto& v : c) v = scale * rng.gaussian();
  return SpectralField(l, std::move(c));
}

// Holder chain on fields, r in (0,1):
// |u-v|_{r+1}^{1+r} <= 2^{(1-r)/2} m(|u-v|^2 (|u| v |v|)^{r-1})^{(1+r)/2}
//                      {h(u) v h(v)}^{(1-r^2)/2},   h = |.|_{r+1}.
inline CheckReport check_fastdiff_holder(double r, long n_trials, int n_modes,
                                         const QuadratureGrid& grid, std::uint64_t seed = 0) {
  require(r > 0.0 && r < 1.0, "check_fastdiff_holder: r must lie in (0,1)");
  CheckReport rep{"fastdiff_holder(r=" + std::to_string(r) + ")", 0, 0,
                  std::numeric_limits<double>::infinity(), 1e-8};
  RngStream rng(seed, 0x33);
  const double w = grid.weight();
  for (long i = 0; i < n_trials; ++i) {
    const double scale = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    SpectralField u = random_field(n_modes, grid.length(), rng, scale);
    SpectralField v = i % 3 == 2 ? u + random_field(n_modes, grid.length(), rng, 1e-8 * scale)
                                 : random_field(n_modes, grid.length(), rng, scale);
    const auto uu = spectral::synthesize(u, grid);
    const auto vv = spectral::synthesize(v, grid);
    double mwr = 0.0, mix = 0.0, hu = 0.0, hv = 0.0;
    for (std::size_t j = 0; j < uu.size(); ++j) {
      const double d = uu[j] - vv[j];
      const double big = std::max(std::abs(uu[j]), std::abs(vv[j]));
      mwr += std::pow(std::abs(d), 1.0 + r);
      if (big > 0.0) mix += d * d * std::pow(big, r - 1.0);
      hu += std::pow(std::abs(uu[j]), 1.0 + r);
      hv += std::pow(std::abs(vv[j]), 1.0 + r);
    }
    const double lhs = w * mwr;  // |u-v|_{r+1}^{1+r}
    const double hmax = std::pow(w * std::max(hu, hv), 1.0 / (1.0 + r));
    const double rhs = std::exp2(0.5 * (1.0 - r)) * std::pow(w * mix, 0.5 * (1.0 + r)) *
                       std::pow(hmax, 0.5 * (1.0 - r * r));
    rep.record(rel_margin(rhs - lhs, lhs, rhs));
  }
  return rep;
}

enum class PairSampler { random_mix, first_mode_sign_flip };

// 2 <b(u)-b(v), u-v>  <=  -max{ eta |u-v|_Q^theta |u-v|_H^{r+1-theta},
//                               delta |u-v|_H^{1+r} }
// on random band-limited pairs, with the model's own state norm.  The
// sign-flip sampler drives the pairs to the configuration where the
// scalar inequality behind the porous chain is an equality.
inline CheckReport check_monotonicity_22(const ModelSystem& sys, double theta, double eta,
                                         double delta, long n_trials, int n_modes,
                                         const QuadratureGrid& grid, std::uint64_t seed = 0,
                                         PairSampler sampler = PairSampler::random_mix) {
  require(eta > 0.0 && delta > 0.0, "check_monotonicity_22: eta and delta must be positive");
  require(n_modes <= sys.modes(), "check_monotonicity_22: noise must cover the field modes");
  const double r = sys.coupling_r();
  require(theta >= 2.0 && theta > r - 1.0, "check_monotonicity_22: theta out of range");
  CheckReport rep{"monotonicity_22(" +
                      std::string(sys.model.kind == Model::Kind::plaplace ? "plaplace" : "porous") +
                      ")",
                  0, 0, std::numeric_limits<double>::infinity(), 1e-6};
  RngStream rng(seed, 0x34);
  for (long i = 0; i < n_trials; ++i) {
    SpectralField u = SpectralField::zero(grid.length(), n_modes);
    SpectralField v = u;
    if (sampler == PairSampler::first_mode_sign_flip) {
      const double c = std::pow(10.0, -2.0 + 4.0 * rng.uniform());
      u.coeff(1) = c;
      v.coeff(1) = -c;
      for (int k = 2; k <= n_modes; ++k) {
        const double bump = 1e-9 * c * rng.gaussian();
        u.coeff(k) = bump;
        v.coeff(k) = bump;
      }
    } else {
      const double scale = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
      u = random_field(n_modes, grid.length(), rng, scale);
      v = i % 3 == 2 ? u + random_field(n_modes, grid.length(), rng, 1e-8 * scale)
                     : random_field(n_modes, grid.length(), rng, scale);
    }
    const double lhs = spectral::drift_pairing_diff(u, v, sys.model, grid);
    const SpectralField wfld = u - v;
    const double dh = spectral::state_norm(wfld, sys.model);
    const double dq = spectral::norm_Q(wfld, sys.noise);
    double rhs = 0.0;
    if (dh > 0.0 || dq > 0.0) {
      const double term_q = eta * std::pow(dq, theta) * std::pow(dh, r + 1.0 - theta);
      const double term_h = delta * std::pow(dh, 1.0 + r);
      rhs = -std::max(term_q, term_h);
    }
    rep.record(rel_margin(rhs - lhs, lhs, rhs));
  }
  return rep;
}

// Synchronous two-point contraction envelope
// |X_t - Y_t|_H^2 <= (delta t (r-1)/2)^{2/(1-r)}, slack factor 1.05.
inline CheckReport check_contraction(const Model& model, double delta, double r,
                                     std::span<const std::pair<PathTrace, PathTrace>> pairs) {
  require(delta > 0.0 && r > 1.0, "check_contraction: need delta > 0 and r > 1");
  CheckReport rep{"contraction_envelope", 0, 0, std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& [trx, try_] : pairs) {
    require(trx.times.size() == try_.times.size(), "check_contraction: mismatched traces");
    for (std::size_t i = 0; i < trx.times.size(); ++i) {
      const double t = trx.times[i];
      if (t <= 0.0) continue;
      const double d = spectral::state_norm(trx.states[i] - try_.states[i], model);
      const double env = std::pow(delta * t * (r - 1.0) / 2.0, 2.0 / (1.0 - r));
      if (!std::isfinite(env)) {
        rep.record(1.0);  // vacuous near t = 0
        continue;
      }
      const double cap = 1.05 * env;
      rep.record(rel_margin(cap - d * d, d * d, cap));
    }
  }
  return rep;
}

// Per-trace coupling bounds: tau <= T and zeta-energy <= (W*) right side
// with slack 1.05.  Girsanov mean checks live in girsanov_weight_stats.
inline CheckReport check_coupling_bounds(std::span<const CouplingTrace> traces,
                                         const rates::GeneralRateParams& params) {
  params.validate();
  CheckReport rep{"coupling_bounds", 0, 0, std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& tr : traces) {
    // tau <= T
    if (tr.coupled) {
      rep.record((tr.horizon - tr.tau) / tr.horizon);
    } else {
      rep.record(-1.0);
    }
    const double bound =
        1.05 * dynamics::zeta_energy_bound(tr.theta, tr.r, params.eta, tr.horizon, tr.dist0);
    rep.record(rel_margin(bound - tr.zeta_energy, tr.zeta_energy, bound));
  }
  return rep;
}

}  // namespace ultraconv::verify
