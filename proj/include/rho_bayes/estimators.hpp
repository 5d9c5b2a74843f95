#pragma once

// Point estimators read off a posterior on a finite net, and a Monte Carlo
// harness for their Hellinger risk.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rho_bayes/kernel.hpp"
#include "rho_bayes/model.hpp"

namespace rho_bayes {

enum class LossKind { power, table };

/// Loss w on [0, 1] applied to Hellinger distances. `power` is z^delta;
/// `table` interpolates (z, w) knots linearly, z from 0 to 1.
struct LossSpec {
  LossKind kind = LossKind::power;
  double delta = 2.0;
  double a_prime = 1.0;
  double B_prime = 1.0;
  double alpha_approx = 1.0;  // reported only: the minimizer is exact
  std::vector<std::pair<double, double>> table;

  double operator()(double z) const;

  /// z^delta with a' = 1 and the smallest B' that works for a' = 1,
  /// delta log 2 / 4 (x^delta <= exp(B' x^2) is tightest at x = 2).
  static LossSpec power(double delta);
  static LossSpec from_table(std::vector<std::pair<double, double>> knots, double delta, double a_prime,
                             double B_prime);
};

struct LossValidation {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Grid check of w(0) = 0, monotonicity and
/// x^delta w(z) <= w(xz) <= a' exp(B' x^2) w(z) for z in (0, 1/2], 2 <= x <= 1/z.
LossValidation validate_loss(const LossSpec& loss, std::size_t resolution = 200);

/// Index drawn from the categorical distribution `post`; a pure function of
/// (post, seed).
std::size_t draw_estimator(const WeightVector& post, const Net& net, std::uint64_t seed);

/// H(t) = sum_j post_j w(h(t, t_j)) for every member t.
std::vector<double> loss_criterion(const WeightVector& post, const Net& net, const LossSpec& loss);

/// Exact argmin of H, lowest index on ties.
std::size_t loss_minimizer(const WeightVector& post, const Net& net, const LossSpec& loss);

enum class EstimatorKind { draw, loss_minimizer };

std::string_view estimator_name(EstimatorKind kind);

struct RiskScenario {
  std::string id = "scenario";
  DensityMember truth;
  ContaminationSpec contamination;
  Net net;
  WeightVector prior;
  EstimatorKind estimator = EstimatorKind::loss_minimizer;
  LossSpec loss;
  double beta = kDefaultBeta;
};

struct RiskSummary {
  std::string scenario_id;
  EstimatorKind estimator;
  std::size_t n;
  std::size_t reps;
  double mean_h2;
  double q10, q50, q90;
  double std_err;
  std::uint64_t seed;
  std::vector<double> h2;  // per replication, in replication order
};

/// Replicates data -> rho-posterior -> estimator and summarizes h^2(s, estimate).
/// Replication r uses stream_seed(seed, r); the result does not depend on threads.
RiskSummary risk_eval(const RiskScenario& scenario, std::size_t n, std::size_t reps, std::uint64_t seed,
                      unsigned threads = 1);

/// Linear-interpolation quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double p);

/// scenario_id,estimator,n,mean_h2,q10,q50,q90,stderr,seed
void write_risk_csv(std::ostream& out, std::span<const RiskSummary> rows);

}  // namespace rho_bayes
