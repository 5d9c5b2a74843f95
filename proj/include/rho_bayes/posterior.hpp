#pragma once

// The Psi statistic, the rho-posterior, the classical (tempered) posterior,
// the penalized posterior over several models and posterior-level metrics.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "rho_bayes/kernel.hpp"
#include "rho_bayes/model.hpp"

namespace rho_bayes {

/// Densities of a list of members at every observation of a dataset.
///
/// Observations whose density column is identical across all members (the
/// same point, or the same histogram bin) are merged into one column with a
/// multiplicity, so sums over observations run over distinct columns only.
class DensityMatrix {
 public:
  DensityMatrix(std::span<const DensityMember> members, const Dataset& data);
  DensityMatrix(const Net& net, const Dataset& data) : DensityMatrix(net.members(), data) {}

  std::size_t members() const { return members_; }
  std::size_t observations() const { return column_of_.size(); }
  std::size_t columns() const { return multiplicity_.size(); }

  /// t_j(x_i).
  double value(std::size_t member, std::size_t observation) const {
    return raw_[member * columns() + column_of_[observation]];
  }
  std::span<const double> raw_row(std::size_t member) const {
    return std::span<const double>(raw_).subspan(member * columns(), columns());
  }
  std::span<const double> root_row(std::size_t member) const {
    return std::span<const double>(roots_).subspan(member * columns(), columns());
  }
  std::span<const double> multiplicities() const { return multiplicity_; }

 private:
  std::size_t members_ = 0;
  std::vector<std::size_t> column_of_;
  std::vector<double> multiplicity_;
  std::vector<double> raw_;    // members x columns
  std::vector<double> roots_;  // sqrt of raw_
};

/// Psi(X, t, t') = sum_i psi(sqrt(t'(X_i) / t(X_i))).
double psi_statistic(const DensityMatrix& dm, std::size_t t, std::size_t t_prime);

/// sup over the whole net of Psi(X, t, t').
double sup_psi(const DensityMatrix& dm, std::size_t t);

/// sup_psi for every member at once. Each pair is evaluated once and used
/// for both orders (Psi is antisymmetric). threads = 0 picks the hardware
/// concurrency; the result does not depend on the thread count.
std::vector<double> sup_psi_all(const DensityMatrix& dm, unsigned threads = 1);

/// Unnormalized log-weights and their normalization by max-shifted
/// exponentiation. Throws DegeneratePosteriorError when every entry is -inf.
WeightVector normalize_log_weights(std::span<const double> log_weights);

struct PosteriorResult {
  WeightVector weights;
  std::vector<double> log_unnormalized;
  std::vector<double> statistic;  // sup_psi (rho) or log-likelihood (classical)
};

/// weight(t) proportional to prior(t) exp(-beta sup_psi(t)).
PosteriorResult rho_posterior(const DensityMatrix& dm, const WeightVector& prior, double beta = kDefaultBeta,
                              unsigned threads = 1);
PosteriorResult rho_posterior(const Dataset& data, const Net& net, const WeightVector& prior,
                              double beta = kDefaultBeta, unsigned threads = 1);

/// sum_i log t(X_i); -inf as soon as one density value is zero.
double log_likelihood(const DensityMatrix& dm, std::size_t t);

/// weight(t) proportional to prior(t) exp(beta_l L(X|t)).
PosteriorResult classical_posterior(const DensityMatrix& dm, const WeightVector& prior, double beta_l = 1.0);
PosteriorResult classical_posterior(const Dataset& data, const Net& net, const WeightVector& prior,
                                    double beta_l = 1.0);

/// Posterior CDF of the scale t for U(0, t) data under the Pareto-type prior
/// with density proportional to t^(-alpha) on (a, inf).
double uniform_scale_posterior_cdf(const Dataset& data, double a, double alpha_prior, double t);

/// Posterior mass of the Hellinger ball of radius r around center.
double posterior_ball_mass(const WeightVector& post, const Net& net, const DensityMember& center, double r);

/// Squared Hellinger distance 1 - sum sqrt(p_j q_j) between two weight vectors
/// on the same net.
double posterior_hellinger_sq(const WeightVector& p, const WeightVector& q);

/// One model of a collection.
struct ModelEntry {
  Net net;
  WeightVector prior;
  double L = 0.0;
  double pen = 0.0;
  double eps_bar = 0.0;
  double dimension = 0.0;
  bool pen_overridden = false;
};

struct Penalty {
  double pen;
  double eps_bar;
};

/// Penalty at equality in the lower bound c5 eps_bar^2 + (c6 + 1/beta) L_m,
/// with eps_bar = (11 c0 / 4) sqrt(cbar_n (d ^ n)) log^(3/2)(e n / (d ^ n)).
Penalty penalty(std::size_t m, double dimension, std::size_t n, double beta, double L);

class ModelCollection {
 public:
  /// Adds a model whose penalty is computed by penalty().
  void add(Net net, WeightVector prior, double L, double dimension, std::size_t n, double beta = kDefaultBeta);
  /// Adds a model with a caller-supplied penalty (flagged as overridden).
  void add_with_penalty(Net net, WeightVector prior, double L, double pen);

  /// Checks sum_m exp(-L_m) = 1 within 1e-9 and the per-model invariants.
  void validate() const;

  std::size_t size() const { return models_.size(); }
  const ModelEntry& operator[](std::size_t m) const { return models_[m]; }
  std::span<const ModelEntry> models() const { return models_; }
  std::size_t total_members() const;

 private:
  std::vector<ModelEntry> models_;
};

/// Nested ladder weights L_m = (m + 1) log 2 for m < m_max, with the tail
/// sum_{m >= m_max} 2^-(m+1) folded into the last model so that
/// sum exp(-L_m) = 1 exactly: L_{m_max} = m_max log 2.
std::vector<double> truncated_ladder_weights(std::size_t models);

struct ModelSelectionResult {
  PosteriorResult posterior;          // over the union, models in order
  std::vector<double> model_mass;
  std::vector<std::size_t> model_of;  // union index -> model
  std::vector<std::size_t> offset;    // first union index of each model
  std::vector<double> shifted_pen;    // pen(m) - min pen
  std::size_t selected() const;       // argmax of model_mass (lowest index on ties)
};

/// sup over models m' and members t' of model m' of [Psi(X, t, t') - pen(m')],
/// for every member t of the union (dm built over the union, models in order).
std::vector<double> penalized_sup_psi_all(const DensityMatrix& union_dm, const ModelCollection& coll,
                                          unsigned threads = 1);

/// Single entry of the above, by brute force over the union.
double penalized_sup_psi(const DensityMatrix& union_dm, const ModelCollection& coll, std::size_t model,
                         std::size_t index);

/// weight(t in model m) proportional to exp(-beta pen(m)) prior_m(t) exp(-beta Psi_bar(X, t)).
///
/// Penalties enter shifted by their minimum. This changes every log-weight by
/// the same constant, so the posterior is unchanged, and with one model the
/// pipeline reduces exactly to rho_posterior.
ModelSelectionResult model_selection_posterior(const DensityMatrix& union_dm, const ModelCollection& coll,
                                               double beta = kDefaultBeta, unsigned threads = 1);
ModelSelectionResult model_selection_posterior(const Dataset& data, const ModelCollection& coll,
                                               double beta = kDefaultBeta, unsigned threads = 1);

/// All members of the collection, models in order.
std::vector<DensityMember> union_members(const ModelCollection& coll);

/// CSV with columns model_id, member_id, param_0..param_{k-1}, prior_w,
/// log_unnorm, post_w.
void write_posterior_csv(std::ostream& out, const Net& net, const WeightVector& prior, const PosteriorResult& post);
void write_posterior_csv(std::ostream& out, const ModelCollection& coll, const ModelSelectionResult& result);

}  // namespace rho_bayes
