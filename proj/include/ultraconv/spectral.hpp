#pragma once

// Dirichlet-eigenbasis representation of fields on (0,l).
//
// Everything lives in the orthonormal basis e_k(x) = sqrt(2) sin(k pi x / l)
// of L^2(m), m the normalized Lebesgue measure, with -Laplace eigenvalues
// lambda_k = pi^2 k^2 / l^2.  Norm conventions:
//   |u|_H^2   = sum c_k^2 / lambda_k        (H^{-1})
//   |u|_2^2   = sum c_k^2                   (L^2(m))
//   |u|_Q^2   = sum c_k^2 / q_k^2           (diagonal noise Q e_k = q_k e_k)
// Physical-space work goes through a midpoint quadrature grid whose node
// sums integrate trigonometric polynomials of bandwidth < 2M exactly.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ultraconv/common.hpp"

namespace ultraconv::spectral {

inline double eigenvalue(int k, double l) {
  require(k >= 1, "eigenvalue: mode index k must be >= 1");
  require(l > 0.0 && std::isfinite(l), "eigenvalue: domain length l must be positive");
  const double f = std::numbers::pi * static_cast<double>(k) / l;
  return f * f;
}

// Odd power |s|^{r-1} s, with the removable singularity at s = 0 for
// r in (0,1) resolved to 0.
inline double signed_power(double s, double r) {
  require(r > 0.0, "signed_power: exponent r must be positive");
  if (s == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(s), r), s);
}

// Midpoint nodes x_j = (j - 1/2) l / M with uniform weights 1/M (summing
// to one; m is a probability measure).  Sine and cosine tables for modes
// k <= M/2 are precomputed; discrete orthogonality of the midpoint sine
// sums makes analyze(synthesize(.)) exact for band-limited fields.
class QuadratureGrid {
 public:
  QuadratureGrid(int m, double l) : m_(m), l_(l) {
    require(m >= 4, "QuadratureGrid: need at least 4 nodes");
    require(l > 0.0 && std::isfinite(l), "QuadratureGrid: domain length must be positive");
    kmax_ = std::max(1, m / 2);
    nodes_.resize(m_);
    for (int j = 0; j < m_; ++j) nodes_[j] = (j + 0.5) * l_ / m_;
    const double s2 = std::numbers::sqrt2;
    sin_.resize(static_cast<std::size_t>(kmax_) * m_);
    cos_.resize(static_cast<std::size_t>(kmax_) * m_);
    for (int k = 1; k <= kmax_; ++k) {
      const double f = k * std::numbers::pi / l_;
      for (int j = 0; j < m_; ++j) {
        sin_[idx(k, j)] = s2 * std::sin(f * nodes_[j]);
        cos_[idx(k, j)] = s2 * std::cos(f * nodes_[j]);
      }
    }
  }

  int size() const { return m_; }
  double length() const { return l_; }
  int max_modes() const { return kmax_; }
  const std::vector<double>& nodes() const { return nodes_; }
  double weight() const { return 1.0 / m_; }

  // e_k and e_k' sampled at the nodes (k is 1-based).
  std::span<const double> basis(int k) const { return {&sin_[idx(k, 0)], static_cast<std::size_t>(m_)}; }
  std::span<const double> basis_grad_unit(int k) const {
    return {&cos_[idx(k, 0)], static_cast<std::size_t>(m_)};
  }

 private:
  std::size_t idx(int k, int j) const {
    return static_cast<std::size_t>(k - 1) * m_ + static_cast<std::size_t>(j);
  }
  int m_;
  double l_;
  int kmax_;
  std::vector<double> nodes_;
  std::vector<double> sin_, cos_;  // sqrt(2) sin(k pi x/l), sqrt(2) cos(k pi x/l)
};

class SpectralField {
 public:
  SpectralField(double l, std::vector<double> coeffs) : l_(l), c_(std::move(coeffs)) {
    require(l_ > 0.0 && std::isfinite(l_), "SpectralField: domain length must be positive");
    require(!c_.empty(), "SpectralField: need at least one mode");
    for (double v : c_)
      require(std::isfinite(v), "SpectralField: coefficients must be finite");
  }

  static SpectralField zero(double l, int n) {
    require(n >= 1, "SpectralField: need at least one mode");
    return SpectralField(l, std::vector<double>(static_cast<std::size_t>(n), 0.0));
  }

  double length() const { return l_; }
  int modes() const { return static_cast<int>(c_.size()); }
  std::span<const double> coeffs() const { return c_; }
  double coeff(int k) const { return c_[static_cast<std::size_t>(k - 1)]; }  // 1-based
  double& coeff(int k) { return c_[static_cast<std::size_t>(k - 1)]; }
  double eigenvalue_of(int k) const { return eigenvalue(k, l_); }

  SpectralField& operator+=(const SpectralField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  SpectralField& operator*=(double a) {
    for (double& v : c_) v *= a;
    return *this;
  }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double a, SpectralField f) { return f *= a; }

  void check_compatible(const SpectralField& o) const {
    require(o.c_.size() == c_.size() && o.l_ == l_,
            "SpectralField: operands must share mode count and domain length");
  }

 private:
  double l_;
  std::vector<double> c_;
};

// Diagonal noise operator Q e_k = q_k e_k together with its declared tail
// law q_k = coeff * k^exponent, used for the analytic summability checks
// that a finite truncation cannot decide.
class DiagonalNoise {
 public:
  struct TailLaw {
    double coeff;
    double exponent;  // q_k = coeff * k^exponent
  };

  DiagonalNoise(std::vector<double> q, TailLaw law) : q_(std::move(q)), law_(law) {
    require(!q_.empty(), "DiagonalNoise: need at least one mode");
    for (double v : q_)
      require(v != 0.0 && std::isfinite(v), "DiagonalNoise: Ker Q = {0} requires q_k != 0");
    require(law_.coeff != 0.0, "DiagonalNoise: tail law coefficient must be nonzero");
    // sum q_k^2 / lambda_k ~ sum k^{2 exponent - 2} finite iff exponent < 1/2.
    require(law_.exponent < 0.5,
            "DiagonalNoise: tail law q_k ~ k^a needs a < 1/2 for Q to be Hilbert-Schmidt into H");
  }

  static DiagonalNoise scalar(double sigma, int n) {
    require(sigma > 0.0 && std::isfinite(sigma), "DiagonalNoise: sigma must be positive");
    return DiagonalNoise(std::vector<double>(static_cast<std::size_t>(n), sigma), {sigma, 0.0});
  }

  // q_k = coeff * k^exponent.
  static DiagonalNoise power_law(double coeff, double exponent, int n) {
    std::vector<double> q(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) q[k - 1] = coeff * std::pow(static_cast<double>(k), exponent);
    return DiagonalNoise(std::move(q), {coeff, exponent});
  }

  // q_k = lambda_k^expo = (pi k / l)^{2 expo}; tail exponent in k is 2*expo.
  static DiagonalNoise from_eigenvalue_power(double expo, int n, double l) {
    std::vector<double> q(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) q[k - 1] = std::pow(eigenvalue(k, l), expo);
    return DiagonalNoise(std::move(q), {std::pow(std::numbers::pi / l, 2.0 * expo), 2.0 * expo});
  }

  int modes() const { return static_cast<int>(q_.size()); }
  double q(int k) const { return q_[static_cast<std::size_t>(k - 1)]; }
  std::span<const double> amplitudes() const { return q_; }
  const TailLaw& tail() const { return law_; }

 private:
  std::vector<double> q_;
  TailLaw law_;
};

inline void check_dealiased(const SpectralField& f, const QuadratureGrid& g) {
  require(f.length() == g.length(), "grid and field domain lengths differ");
  require(g.size() >= 4 * f.modes(),
          "aliasing: quadrature grid must have M >= 4N nodes for N-mode fields");
}

inline std::vector<double> synthesize(const SpectralField& f, const QuadratureGrid& g) {
  check_dealiased(f, g);
  std::vector<double> out(static_cast<std::size_t>(g.size()), 0.0);
  for (int k = 1; k <= f.modes(); ++k) {
    const double c = f.coeff(k);
    if (c == 0.0) continue;
    auto row = g.basis(k);
    for (int j = 0; j < g.size(); ++j) out[j] += c * row[j];
  }
  return out;
}

// Grid values of the spatial derivative f'.
inline std::vector<double> synthesize_gradient(const SpectralField& f, const QuadratureGrid& g) {
  check_dealiased(f, g);
  std::vector<double> out(static_cast<std::size_t>(g.size()), 0.0);
  for (int k = 1; k <= f.modes(); ++k) {
    const double c = f.coeff(k) * (k * std::numbers::pi / f.length());
    if (c == 0.0) continue;
    auto row = g.basis_grad_unit(k);
    for (int j = 0; j < g.size(); ++j) out[j] += c * row[j];
  }
  return out;
}

inline SpectralField analyze(std::span<const double> values, const QuadratureGrid& g, int n_modes) {
  require(static_cast<int>(values.size()) == g.size(), "analyze: value count must match grid");
  require(n_modes >= 1 && n_modes <= g.max_modes(), "analyze: mode count out of range for grid");
  std::vector<double> c(static_cast<std::size_t>(n_modes), 0.0);
  const double w = g.weight();
  for (int k = 1; k <= n_modes; ++k) {
    auto row = g.basis(k);
    double acc = 0.0;
    for (int j = 0; j < g.size(); ++j) acc += values[j] * row[j];
    c[k - 1] = w * acc;
  }
  return SpectralField(g.length(), std::move(c));
}

inline double norm_H(const SpectralField& f) {
  double acc = 0.0;
  for (int k = 1; k <= f.modes(); ++k) {
    const double c = f.coeff(k);
    acc += c * c / f.eigenvalue_of(k);
  }
  return std::sqrt(acc);
}

inline double norm_L2(const SpectralField& f) {
  double acc = 0.0;
  for (double c : f.coeffs()) acc += c * c;
  return std::sqrt(acc);
}

inline double norm_Lq(const SpectralField& f, double q, const QuadratureGrid& g) {
  require(q >= 1.0, "norm_Lq: exponent q must be >= 1");
  const auto vals = synthesize(f, g);
  double acc = 0.0;
  for (double v : vals) acc += std::pow(std::abs(v), q);
  return std::pow(g.weight() * acc, 1.0 / q);
}

inline double norm_Q(const SpectralField& f, const DiagonalNoise& noise) {
  require(noise.modes() >= f.modes(), "norm_Q: noise must cover all field modes");
  double acc = 0.0;
  for (int k = 1; k <= f.modes(); ++k) {
    const double c = f.coeff(k) / noise.q(k);
    acc += c * c;
  }
  return std::sqrt(acc);
}

// The three nonlinear models plus the linear heat drift and a zero-drift
// stub for tests.  p-Laplace propagates in L^2(m); the others in H^{-1}.
struct Model {
  enum class Kind { linear, porous, plaplace, fastdiff, zero };
  Kind kind = Kind::porous;
  double exponent = 2.0;  // r for porous/fastdiff, p for plaplace; unused otherwise

  bool l2_state() const { return kind == Kind::plaplace; }

  static Model linear() { return {Kind::linear, 1.0}; }
  static Model porous(double r) {
    require(r > 1.0, "porous model: exponent r must exceed 1");
    return {Kind::porous, r};
  }
  static Model plaplace(double p) {
    require(p > 2.0, "p-Laplace model: exponent p must exceed 2");
    return {Kind::plaplace, p};
  }
  static Model fastdiff(double r) {
    require(r > 0.0 && r < 1.0, "fast-diffusion model: exponent r must lie in (0,1)");
    return {Kind::fastdiff, r};
  }
  static Model zero_drift() { return {Kind::zero, 0.0}; }
};

// Norm of the model's state space: L^2 for p-Laplace, H^{-1} otherwise.
inline double state_norm(const SpectralField& f, const Model& m) {
  return m.l2_state() ? norm_L2(f) : norm_H(f);
}

// b(v) = Laplace(v^r) projected on the first N modes:
// coefficient k is -lambda_k <v^r, e_k>.  Valid for any r > 0, so this
// also serves the fast-diffusion drift.
inline SpectralField drift_porous(const SpectralField& f, double r, const QuadratureGrid& g) {
  require(r > 0.0, "drift_porous: exponent r must be positive");
  auto vals = synthesize(f, g);
  for (double& v : vals) v = signed_power(v, r);
  SpectralField out = analyze(vals, g, f.modes());
  for (int k = 1; k <= f.modes(); ++k) out.coeff(k) *= -f.eigenvalue_of(k);
  return out;
}

// b(v) = div(|grad v|^{p-2} grad v) in weak form: coefficient k is
// -(k pi / l) <|v'|^{p-2} v', sqrt(2) cos(k pi x/l)>.
inline SpectralField drift_plaplace(const SpectralField& f, double p, const QuadratureGrid& g) {
  require(p >= 2.0, "drift_plaplace: exponent p must be >= 2");
  auto grad = synthesize_gradient(f, g);
  for (double& v : grad) v = signed_power(v, p - 1.0);
  std::vector<double> c(static_cast<std::size_t>(f.modes()), 0.0);
  const double w = g.weight();
  for (int k = 1; k <= f.modes(); ++k) {
    auto row = g.basis_grad_unit(k);
    double acc = 0.0;
    for (int j = 0; j < g.size(); ++j) acc += grad[j] * row[j];
    c[k - 1] = -(k * std::numbers::pi / f.length()) * w * acc;
  }
  return SpectralField(f.length(), std::move(c));
}

inline SpectralField drift(const SpectralField& f, const Model& m, const QuadratureGrid& g) {
  switch (m.kind) {
    case Model::Kind::linear: {
      SpectralField out = f;
      for (int k = 1; k <= f.modes(); ++k) out.coeff(k) *= -f.eigenvalue_of(k);
      return out;
    }
    case Model::Kind::porous:
    case Model::Kind::fastdiff:
      return drift_porous(f, m.exponent, g);
    case Model::Kind::plaplace:
      return drift_plaplace(f, m.exponent, g);
    case Model::Kind::zero:
      return SpectralField::zero(f.length(), f.modes());
  }
  throw domain_error("drift: unknown model kind");
}

// 2 <b(u) - b(v), u - v> evaluated as the exact weak pairing:
//   porous / fast diffusion: -2 integral (u^r - v^r)(u - v) dm
//   p-Laplace:               -2 integral (|u'|^{p-2}u' - |v'|^{p-2}v')(u' - v') dm
// Always <= 0 by monotonicity of the scalar maps.
inline double drift_pairing_diff(const SpectralField& u, const SpectralField& v, const Model& m,
                                 const QuadratureGrid& g) {
  u.check_compatible(v);
  switch (m.kind) {
    case Model::Kind::porous:
    case Model::Kind::fastdiff: {
      const auto uu = synthesize(u, g);
      const auto vv = synthesize(v, g);
      double acc = 0.0;
      for (std::size_t j = 0; j < uu.size(); ++j)
        acc += (signed_power(uu[j], m.exponent) - signed_power(vv[j], m.exponent)) * (uu[j] - vv[j]);
      return -2.0 * g.weight() * acc;
    }
    case Model::Kind::plaplace: {
      const auto gu = synthesize_gradient(u, g);
      const auto gv = synthesize_gradient(v, g);
      const double pm1 = m.exponent - 1.0;
      double acc = 0.0;
      for (std::size_t j = 0; j < gu.size(); ++j)
        acc += (signed_power(gu[j], pm1) - signed_power(gv[j], pm1)) * (gu[j] - gv[j]);
      return -2.0 * g.weight() * acc;
    }
    case Model::Kind::linear: {
      double acc = 0.0;
      for (int k = 1; k <= u.modes(); ++k) {
        const double d = u.coeff(k) - v.coeff(k);
        acc += d * d;  // <Laplace d, d>_H = -|d|_2^2
      }
      return -2.0 * acc;
    }
    case Model::Kind::zero:
      return 0.0;
  }
  throw domain_error("drift_pairing_diff: unknown model kind");
}

}  // namespace ultraconv::spectral
