#pragma once

// Scalar building blocks: the bounded surrogate psi of the log-ratio,
// Hellinger distance/affinity computations and the numerical constants
// shared by the concentration bounds.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

namespace rho_bayes {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// psi(x) = (x - 1) / (x + 1) on [0, +inf), psi(+inf) = 1.
/// Throws DomainError for negative or NaN input.
double psi(double x);

/// phi(x) = 4 psi(sqrt(x)), phi(+inf) = 4.
double phi(double x);

/// psi(sqrt(num / den)) with the conventions 0/0 = 1 and a/0 = +inf for a > 0.
///
/// Evaluated as (sqrt(num) - sqrt(den)) / (sqrt(num) + sqrt(den)), which is
/// algebraically identical and exactly antisymmetric in floating point.
double psi_sqrt_ratio(double num, double den);

/// Same as psi_sqrt_ratio but on already square-rooted, already validated
/// arguments. This is the inner loop of the Psi statistic.
inline double psi_from_roots(double root_num, double root_den) noexcept {
  const double sum = root_num + root_den;
  // sum == 0 only when both are zero: 0/0 convention gives psi(1) = 0.
  return (root_num - root_den) / (sum + static_cast<double>(sum == 0.0));
}

struct HellingerAffinity {
  double h;    ///< Hellinger distance, in [0, 1]
  double rho;  ///< affinity, rho = 1 - h^2
};

/// Hellinger distance and affinity between two probability vectors.
/// Each vector must be nonnegative and sum to one within 1e-12.
HellingerAffinity hellinger_discrete(std::span<const double> p, std::span<const double> q);

/// Integration domain and accuracy for one-dimensional adaptive quadrature.
/// Either bound may be infinite.
struct QuadratureSpec {
  double lower = 0.0;
  double upper = 1.0;
  double abs_tol = 1e-10;
  std::size_t max_subdivisions = std::size_t{1} << 20;
  std::size_t initial_panels = 16;

  void validate() const;
};

struct QuadratureResult {
  double value;
  double error_estimate;
  std::size_t subdivisions;
};

/// Globally adaptive Simpson quadrature: the panel with the largest
/// Richardson error estimate is bisected until the summed estimate drops
/// below abs_tol. Infinite bounds are mapped to a finite interval.
/// Throws QuadratureError when the budget is exhausted.
QuadratureResult integrate(const std::function<double(double)>& f, const QuadratureSpec& spec);

/// Hellinger distance between two one-dimensional densities by quadrature of
/// sqrt(f g). Both densities must integrate to one within 10 abs_tol.
double hellinger_quadrature(const std::function<double(double)>& f,
                            const std::function<double(double)>& g, const QuadratureSpec& spec);

/// Numerical constants of the concentration theory, for a given beta and n.
struct Constants {
  double beta;
  std::size_t n;
  double gamma;  // beta / 8
  double c0, c1, c2, c3, c4, c5, c6, c7, c8, c9;
  double cbar;   // 1 + log 2 / log(e n)
  double a0;     // 4
  double a1;     // 3/8
  double a2_sq;  // 3 sqrt 2
};

inline constexpr double kDefaultBeta = 4.0;

Constants make_constants(double beta = kDefaultBeta, std::size_t n = 1);

}  // namespace rho_bayes
