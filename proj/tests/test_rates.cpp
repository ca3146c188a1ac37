#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ultraconv/common.hpp"
#include "ultraconv/rates.hpp"

using namespace ultraconv;
using namespace ultraconv::rates;
using Catch::Matchers::WithinRel;

namespace {

// Frozen oracle values, computed by an independent 50-digit evaluation of
// the closed forms (grid search + golden refinement for the suprema).
constexpr double kAlphaA = 227.8125;  // (r=2, theta=3, eta=1, delta=1) = 3645/16 exactly
constexpr double kC0A = 29.009930210079868;       // (5/2)^{8/3} * 2^{4/3}
constexpr double kLb1A = 0.22407108824984419;
constexpr double kLb2A = 0.18070392653037555;
constexpr double kLambdaA = 0.22428749743266706;
constexpr double kTOptA = 13.945346530503125;

constexpr double kAlphaB = 6.0;  // (r=3, theta=4, eta=8, delta=8)
constexpr double kLb1B = 0.39962045845350519;
constexpr double kLb2B = 0.30037230591008518;
constexpr double kLambdaB = 0.40183213420103908;
constexpr double kTOptB = 5.4891911128583374;

GeneralRateParams random_params(RngStream& rng) {
  const double r = 1.05 + 2.95 * rng.uniform();
  const double theta_lo = std::max(2.0, r - 1.0 + 0.05);
  const double theta = theta_lo + 3.0 * rng.uniform();
  const double eta = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
  const double delta = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
  return {r, theta, eta, delta};
}

// Dense-grid maximizer of the rate objective, independent of the
// golden-section implementation path.
double lambda_dense_grid(double alpha, double r, long n_points) {
  const double la = std::log(alpha);
  const double tmin = lambda_t_min(la, r);
  const double lo = tmin * (1.0 + 1e-9), hi = 100.0 * tmin;
  double best = -1.0;
  for (long i = 0; i < n_points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points);
    best = std::max(best, rate_objective(t, la, r));
  }
  return best;
}

}  // namespace

TEST_CASE("alpha closed form") {
  CHECK_THAT(alpha_general({2, 3, 1, 1}), WithinRel(kAlphaA, 1e-12));
  CHECK_THAT(alpha_general({3, 4, 8, 8}), WithinRel(kAlphaB, 1e-12));
  CHECK_THROWS_AS(alpha_general({2, 1.5, 1, 1}), domain_error);  // theta < 2
  CHECK_THROWS_AS(alpha_general({0.9, 3, 1, 1}), domain_error);  // r <= 1
  CHECK_THROWS_AS(alpha_general({4, 2.5, 1, 1}), domain_error);  // theta <= r-1
  CHECK_THROWS_AS(alpha_general({2, 3, -1, 1}), domain_error);
  CHECK_THROWS_AS(alpha_general({2, 3, 1, 0}), domain_error);
}

TEST_CASE("C0 and the sup-over-s identity") {
  CHECK_THAT(c0_constant({2, 3, 1, 1}), WithinRel(kC0A, 1e-12));

  // alpha = C0 * (closed-form optimization factor), for fixed and random params
  RngStream rng(42, 0);
  for (int i = 0; i < 200; ++i) {
    const auto p = i == 0 ? GeneralRateParams{2, 3, 1, 1}
                 : i == 1 ? GeneralRateParams{3, 4, 8, 8}
                          : random_params(rng);
    const double la = log_alpha_general(p);
    const double lc = log_c0_constant(p) + log_c0_to_alpha_factor(p.r, p.theta);
    CHECK_THAT(std::exp(lc - la), WithinRel(1.0, 1e-12));
  }

  // eta -> 4 eta at theta = 2 scales C0 by eta^{-2/theta} = 1/4
  const double c1 = c0_constant({2, 2, 1.0, 1});
  const double c4 = c0_constant({2, 2, 4.0, 1});
  CHECK_THAT(c4 / c1, WithinRel(0.25, 1e-12));
}

TEST_CASE("lambda optimizer against dense grid and frozen values") {
  const auto [lamA, t0A] = lambda_sup(kAlphaA, 2.0);
  CHECK_THAT(lamA, WithinRel(kLambdaA, 1e-9));
  CHECK_THAT(t0A, WithinRel(kTOptA, 1e-6));
  CHECK_THAT(lamA, WithinRel(lambda_dense_grid(kAlphaA, 2.0, 200000), 1e-8));

  const auto [lamB, t0B] = lambda_sup(kAlphaB, 3.0);
  CHECK_THAT(lamB, WithinRel(kLambdaB, 1e-9));
  CHECK_THAT(t0B, WithinRel(kTOptB, 1e-6));
  CHECK_THAT(lamB, WithinRel(lambda_dense_grid(kAlphaB, 3.0, 200000), 1e-8));

  // t_opt beyond the positivity threshold
  CHECK(t0A > lambda_t_min(std::log(kAlphaA), 2.0));
}

TEST_CASE("lower bounds: values, ordering, witness identity") {
  const auto [lb1A, lb2A] = lambda_lower_bounds({2, 3, 1, 1});
  CHECK_THAT(lb1A, WithinRel(kLb1A, 1e-12));
  CHECK_THAT(lb2A, WithinRel(kLb2A, 1e-12));
  const auto [lb1B, lb2B] = lambda_lower_bounds({3, 4, 8, 8});
  CHECK_THAT(lb1B, WithinRel(kLb1B, 1e-12));
  CHECK_THAT(lb2B, WithinRel(kLb2B, 1e-12));

  RngStream rng(7, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_params(rng);
    const auto [lb1, lb2] = lambda_lower_bounds(p);
    const double la = log_alpha_general(p);
    const auto [lam, t0] = lambda_sup_log(la, p.r);

    // strict ordering with 1e-12 slack
    CHECK(lam >= lb1 * (1.0 - 1e-12));
    CHECK(lb1 >= lb2 * (1.0 - 1e-12));

    // ratio identity lb1/lb2 = e * {log(1+2e^{-(1+r)/(r-1)})}^{(r-1)/(r+1)} >= 1
    const double fac = std::exp(1.0 + (p.r - 1.0) / (p.r + 1.0) *
                                          std::log(std::log1p(2.0 * std::exp(-(1.0 + p.r) /
                                                                             (p.r - 1.0)))));
    CHECK_THAT(lb1 / lb2, WithinRel(fac, 1e-10));
    CHECK(lb1 / lb2 >= 1.0 - 1e-12);

    // the witness point realizes the primary bound exactly
    const double tw = lambda_witness_time(la, p.r);
    CHECK_THAT(rate_objective(tw, la, p.r), WithinRel(lb1, 1e-12));
    (void)t0;
  }
}

TEST_CASE("lower bound homogeneity in (eta, delta)") {
  // delta -> c delta together with eta -> c eta scales lb_primary by c^{2/(r+1)}
  const GeneralRateParams p{2, 3, 1.3, 0.7};
  const double c = 4.0;
  const auto [lb1, lb2] = lambda_lower_bounds(p);
  const auto [lb1c, lb2c] = lambda_lower_bounds({p.r, p.theta, c * p.eta, c * p.delta});
  CHECK_THAT(lb1c / lb1, WithinRel(std::pow(c, 2.0 / (p.r + 1.0)), 1e-12));
  CHECK_THAT(lb2c / lb2, WithinRel(std::pow(c, 2.0 / (p.r + 1.0)), 1e-12));
}

TEST_CASE("alpha strictly decreasing in eta and delta") {
  RngStream rng(11, 0);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(rng);
    const double a = alpha_general(p);
    CHECK(alpha_general({p.r, p.theta, p.eta * 1.5, p.delta}) < a);
    CHECK(alpha_general({p.r, p.theta, p.eta, p.delta * 1.5}) < a);
  }
}

TEST_CASE("porous medium rates") {
  const double pi = std::numbers::pi;
  const auto pr = porous_medium_rates({pi, 1.0, 2.0, 3.0});
  CHECK_THAT(pr.eta, WithinRel(1.0, 1e-12));
  CHECK_THAT(pr.delta, WithinRel(1.0, 1e-12));
  CHECK_THAT(pr.alpha_theta, WithinRel(kAlphaA, 1e-12));
  CHECK_THAT(pr.report.alpha, WithinRel(kAlphaA, 1e-12));

  // two independent formula paths for the displayed lower bound
  CHECK_THAT(pr.report.lb_primary, WithinRel(porous_lb_display(pi, 1.0, 2.0), 1e-10));
  CHECK_THAT(pr.report.lb_primary, WithinRel(kLb1A, 1e-10));

  // report alpha equals the generic chain through (r, r+1, eta, delta)
  CHECK_THAT(pr.report.alpha,
             WithinRel(alpha_general(pr.params_at_default), 1e-10));
  CHECK_THAT(pr.report.alpha, WithinRel(std::exp(log_porous_alpha_closed(pi, 1.0, 2.0)), 1e-10));

  // doubling sigma at theta = r+1: delta unchanged, eta scaled by 2^{r+1}
  const auto pr2 = porous_medium_rates({pi, 2.0, 2.0, std::nullopt});
  CHECK_THAT(pr2.delta, WithinRel(pr.delta, 1e-12));
  CHECK_THAT(pr2.params_at_default.eta / pr.params_at_default.eta,
             WithinRel(std::pow(2.0, 3.0), 1e-12));

  // alpha_theta non-increasing on the admissible theta range
  double prev = std::numeric_limits<double>::infinity();
  for (double th : {2.0, 2.2, 2.5, 2.8, 3.0}) {
    const double a = porous_medium_rates({pi, 1.0, 2.0, th}).alpha_theta;
    CHECK(a <= prev * (1.0 + 1e-12));
    prev = a;
  }

  CHECK_THROWS_AS(porous_medium_rates({pi, 1.0, 2.0, 3.5}), domain_error);  // theta > r+1
  CHECK_THROWS_AS(porous_medium_rates({pi, 1.0, 2.0, 0.5}), domain_error);
  CHECK_THROWS_AS(porous_medium_rates({-1.0, 1.0, 2.0, std::nullopt}), domain_error);
}

TEST_CASE("p-Laplace rates") {
  const double pi = std::numbers::pi;
  const auto pl = p_laplace_rates({pi, 1.0, 4.0, std::nullopt});
  CHECK(pl.r == 3.0);
  CHECK(pl.theta == 4.0);
  CHECK_THAT(pl.eta, WithinRel(8.0, 1e-12));
  CHECK_THAT(pl.delta, WithinRel(8.0, 1e-12));
  CHECK_THAT(pl.report.alpha, WithinRel(kAlphaB, 1e-12));
  CHECK_THAT(pl.report.alpha, WithinRel(alpha_general(pl.params), 1e-10));
  CHECK_THAT(pl.report.alpha, WithinRel(std::exp(log_plaplace_alpha_closed(pi, 1.0, 4.0)), 1e-10));

  CHECK_THAT(pl.report.lb_primary, WithinRel(kLb1B, 1e-10));
  CHECK_THAT(pl.report.lb_primary, WithinRel(plaplace_lb_display(pi, 1.0, 4.0), 1e-10));
  CHECK_THAT(pl.report.lb_secondary, WithinRel(kLb2B, 1e-10));

  // p -> 2+ drives alpha up
  const double a21 = p_laplace_rates({pi, 1.0, 2.1, std::nullopt}).report.alpha;
  const double a25 = p_laplace_rates({pi, 1.0, 2.5, std::nullopt}).report.alpha;
  CHECK(a21 > a25);
  CHECK(a25 > kAlphaB);

  CHECK_THROWS_AS(p_laplace_rates({pi, 1.0, 2.0, std::nullopt}), domain_error);  // p <= 2
  // tail law violations: not square-summable / below the sigma/i floor
  CHECK_THROWS_AS(p_laplace_rates({pi, 1.0, 4.0, PLaplaceSpec::NoiseTail{1.0, -0.4}}),
                  domain_error);
  CHECK_THROWS_AS(p_laplace_rates({pi, 1.0, 4.0, PLaplaceSpec::NoiseTail{0.5, -0.75}}),
                  domain_error);
}

TEST_CASE("fast diffusion admissibility") {
  const double pi = std::numbers::pi;
  const auto ok = fast_diffusion_admissible({pi, 0.5, 0.3, 1.0});
  CHECK(ok.admissible);
  CHECK_THAT(ok.theta, WithinRel(4.0 / 1.5, 1e-14));
  CHECK_THAT(ok.eps, WithinRel(1.0 - 4.0 * 0.3 / 1.5, 1e-14));
  CHECK(ok.eps > (1.0 - 0.5) / (2.0 * 1.5));
  CHECK(ok.eps < 1.0);

  const auto bad_kappa = fast_diffusion_admissible({pi, 0.5, 0.35, 1.0});
  CHECK_FALSE(bad_kappa.admissible);
  CHECK(bad_kappa.reason == "kappa >= (1+3r)/8");

  const auto bad_r = fast_diffusion_admissible({pi, 0.3, 0.3, 1.0});
  CHECK_FALSE(bad_r.admissible);
  CHECK(bad_r.reason == "r <= 1/3");

  const auto small_kappa = fast_diffusion_admissible({pi, 0.5, 0.2, 1.0});
  CHECK_FALSE(small_kappa.admissible);
  CHECK(small_kappa.reason == "kappa <= 1/4");
}

TEST_CASE("overflow near r = 1 is reported, bounds still finite") {
  // alpha blows up like exp(c/(r-1)); the report flags it instead of
  // silently returning inf, while the lambda machinery stays in log space.
  const GeneralRateParams p{1.001, 2.001, 0.02, 0.19};
  CHECK_THROWS_AS(alpha_general(p), numeric_error);
  const auto rep = rate_report(p);
  CHECK(rep.alpha_overflow);
  CHECK(std::isfinite(rep.log_alpha));
  CHECK(rep.lambda > 0.0);
  CHECK(rep.lb_primary > 0.0);
  CHECK(rep.lb_primary >= rep.lb_secondary * (1.0 - 1e-12));
  CHECK(rep.lambda >= rep.lb_primary * (1.0 - 1e-9));
}
