#pragma once

// Complexity quantities of a finite model: the Monte Carlo estimate of eps,
// the exact eta of a finite prior, their closed-form bounds, the main radius
// rbar and a numeric check of the integral ratio bound.
//
// Distances, radii, eps and eta live on the product scale h * sqrt(n). The
// Net-based entry points take n and convert; the *_from_distances variants
// take product-scale distances directly.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rho_bayes/kernel.hpp"
#include "rho_bayes/model.hpp"

namespace rho_bayes {

/// sqrt((c0 / 3) min{(1 + c0 sqrt 2) log(2 N^2), n}).
double eps_finite_bound(std::size_t net_size, std::size_t n);

/// (11 c0 / 4) sqrt(cbar_n (d ^ n)) log^(3/2)(e n / (d ^ n)).
double eps_vc_bound(double dimension, std::size_t n);

struct WPoint {
  double y;
  double w_hat;
  double std_err;
};

struct EpsEstimate {
  double epsilon = 1.0;        // largest grid y with w_hat(y) > 6 y^2 / c0, else 1
  double epsilon_upper = 1.0;  // next grid point (or the a priori cap); eps lies in [epsilon, epsilon_upper]
  std::vector<WPoint> w_curve;
  std::size_t replications = 0;
  bool subsampled = false;  // pairs were subsampled: w_hat is then a lower estimate
};

/// 1, q, q^2, ... up to sqrt(c0 n / 3), past which w can never exceed the threshold.
std::vector<double> default_y_grid(std::size_t n, double q = 1.25);

/// E_s[psi(sqrt(t'(X) / t(X)))] for one observation X ~ s. Exact for the
/// uniform and histogram families, quadrature for the others.
double expected_psi(const DensityMember& s, const DensityMember& t, const DensityMember& t_prime);

/// w_hat(y) = mean over reps of sup_{t, t' in B(s, y)} |Psi - E Psi| with data
/// drawn from s. Replication r uses the stream stream_seed(seed, r), so two
/// nets sharing a seed see the same datasets.
EpsEstimate eps_monte_carlo(const DensityMember& truth, const Net& net, std::span<const double> y_grid,
                            std::size_t n, std::size_t reps, std::uint64_t seed, unsigned threads = 1,
                            std::size_t pair_cap = 4'000'000);

struct EtaResult {
  double eta = 0.0;
  std::vector<double> violating_radii;  // audited radii where the ball condition fails (all below eta)
};

/// Exact eta for a finite prior: the ball masses are step functions of the
/// radius, so the ratio condition only needs checking on each constancy
/// interval, where its solution set is an explicit half-line.
EtaResult eta_from_distances(std::span<const double> distances, std::span<const double> prior, double gamma);
EtaResult eta_exact(const Net& net, const WeightVector& prior, std::size_t t, double gamma, std::size_t n);

/// True when pi(B(2r)) <= exp(gamma r^2) pi(B(r)) at radius r.
bool ball_condition_holds(std::span<const double> distances, std::span<const double> prior, double gamma,
                          double r);

/// sqrt((log kappa0 / gamma) [log(2 a_bar / a_low) / (alpha log 2) + 1]).
double eta_param_bound(double a_bar, double a_low, double alpha_exp, double kappa0, double gamma);

/// 2^d (b_bar / b_low) for a prior density bounded between b_low and b_bar.
double kappa0_bounded_density(std::size_t dim, double b_bar, double b_low);

/// 2^(1 + xi) / (2^xi - 1) for the prior density (xi / 2) |z|^(xi - 1) on [-1, 1].
double kappa0_power_law(double xi);

/// sqrt((k / gamma) log(75 k^2 / Lambda)), Lambda = [prod (2 alpha_j ^ 1)]^(1/k).
double eta_dirichlet_bound(std::span<const double> alpha, double gamma);

/// delta / [2 (2 alpha + delta)]: the growth exponent of eta at theta = 0 when
/// the prior density vanishes like exp(-1 / (2 |z|^delta)).
double eta_smallmass_exponent(double alpha_shape, double delta);

/// min over radii r of c7 r^2 + (1 / 2 beta) log(1 / pi(B(t, r))).
double eta_bar_sq_from_distances(std::span<const double> distances, std::span<const double> prior, double beta);
double eta_bar_sq(const Net& net, const WeightVector& prior, std::size_t t, double beta, std::size_t n);

struct RbarTerm {
  double h;    // product-scale h(s, t)
  double eta;  // eta(t)
};

struct RbarResult {
  double value;
  bool vacuous;  // value >= sqrt(n): says nothing since every h is <= sqrt(n)
};

/// min_t [c1 h + c2 eta] + c3 eps + c4 sqrt(xi + xi' + 2.61).
RbarResult rbar(std::span<const RbarTerm> terms, double eps, double xi, double xi_prime, double beta,
                std::size_t n);

struct PropIntResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool precondition_ok = false;  // numeric hypotheses and the ball condition at gamma = 3a/8 above r0
  bool ball_condition_ok = false;
  bool holds = false;            // lhs <= rhs
  std::string message;           // which hypothesis failed, if any
};

/// Integral ratio bound: with r^-2 <= a <= b, 4^(J-1) >= b/a and the ball
/// condition at gamma = 3a/8 for every radius >= 2^-J r,
///   sum_{h > r} pi e^{-a h^2} / sum pi e^{-b h^2} <= exp((1 - a r^2) / 4).
/// Failed hypotheses are reported, never thrown.
PropIntResult prop_int_from_distances(std::span<const double> distances, std::span<const double> prior, double a,
                                      double b, double r, int J);
PropIntResult prop_int_check(const Net& net, const WeightVector& prior, std::size_t t, double a, double b,
                             double r, int J, std::size_t n);

/// Product-scale distances from member t to every member of the net.
std::vector<double> product_distances(const Net& net, std::size_t t, std::size_t n);

struct BoundsRow {
  std::string quantity;
  double formula_value;
  std::optional<double> mc_estimate;
  std::optional<double> std_err;
  bool vacuous = false;
};

/// JSON array of {quantity, formula_value, mc_estimate, std_err, vacuous_flag};
/// missing and non-finite numbers become null.
std::string bounds_report_json(std::span<const BoundsRow> rows);

}  // namespace rho_bayes
