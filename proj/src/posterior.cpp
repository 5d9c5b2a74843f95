#include "rho_bayes/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <string>
#include <unordered_map>

#include "numeric.hpp"
#include "parallel.hpp"
#include "rho_bayes/bounds.hpp"
#include "rho_bayes/error.hpp"

namespace rho_bayes {

namespace {

constexpr double kLadderTol = 1e-9;

std::uint64_t hash_column(const double* v, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, v + i, sizeof bits);
    h ^= bits;
    h *= 1099511628211ULL;
  }
  return h;
}

// sum_c w[c] psi(rn[c] / rd[c]) on square-rooted densities. Four independent
// accumulators let the compiler vectorize while keeping a fixed summation
// order, so the result is reproducible and exactly antisymmetric in (rn, rd).
double psi_sum(const double* rn, const double* rd, const double* w, std::size_t count) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t c = 0;
  for (; c + 4 <= count; c += 4) {
    acc0 += w[c] * psi_from_roots(rn[c], rd[c]);
    acc1 += w[c + 1] * psi_from_roots(rn[c + 1], rd[c + 1]);
    acc2 += w[c + 2] * psi_from_roots(rn[c + 2], rd[c + 2]);
    acc3 += w[c + 3] * psi_from_roots(rn[c + 3], rd[c + 3]);
  }
  for (; c < count; ++c) acc0 += w[c] * psi_from_roots(rn[c], rd[c]);
  return (acc0 + acc1) + (acc2 + acc3);
}

void require_index(std::size_t i, std::size_t n, const char* what) {
  if (i >= n) {
    throw DomainError(std::string(what) + ": index " + std::to_string(i) + " out of range (" + std::to_string(n) +
                      ")");
  }
}

std::string full(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Upper-triangle sweep shared by the plain and the penalized supremum.
// best[t] starts at init[t]; pair (u, v) with u < v offers
// Psi(u, v) - offset[v] to u and -Psi(u, v) - offset[u] to v.
std::vector<double> pairwise_sup(const DensityMatrix& dm, std::span<const double> init,
                                 std::span<const double> offset, unsigned threads) {
  const std::size_t n = dm.members();
  const std::size_t cols = dm.columns();
  const double* w = dm.multiplicities().data();
  const unsigned workers = detail::resolve_threads(threads, n);
  std::vector<std::vector<double>> local(workers, std::vector<double>(init.begin(), init.end()));
  detail::parallel_for(n, workers, [&](unsigned worker, std::size_t u) {
    auto& best = local[worker];
    const double* ru = dm.root_row(u).data();
    double best_u = best[u];
    for (std::size_t v = u + 1; v < n; ++v) {
      const double value = psi_sum(dm.root_row(v).data(), ru, w, cols);
      best_u = std::max(best_u, value - offset[v]);
      best[v] = std::max(best[v], -value - offset[u]);
    }
    best[u] = best_u;
  });
  std::vector<double> out = std::move(local[0]);
  for (unsigned k = 1; k < workers; ++k) {
    for (std::size_t t = 0; t < n; ++t) out[t] = std::max(out[t], local[k][t]);
  }
  return out;
}

}  // namespace

DensityMatrix::DensityMatrix(std::span<const DensityMember> members, const Dataset& data) : members_(members.size()) {
  if (members.empty()) throw DomainError("DensityMatrix: no members");
  if (data.size() == 0) throw DomainError("DensityMatrix: empty dataset");
  for (const auto& m : members) {
    if (m.spec().sample_dim() != data.dim) {
      throw DomainError("DensityMatrix: member sample dimension " + std::to_string(m.spec().sample_dim()) +
                        " does not match data dimension " + std::to_string(data.dim));
    }
  }
  const std::size_t n = data.size();
  const std::size_t k = members.size();
  column_of_.resize(n);
  std::vector<double> columns;  // column-major while deduplicating
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  std::vector<double> col(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.observation(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double v = members[j].density(x);
      if (!std::isfinite(v) || v < 0.0) {
        throw DomainError("DensityMatrix: member " + std::to_string(j) + " has density " + full(v) +
                          " at observation " + std::to_string(i));
      }
      col[j] = v;
    }
    auto& bucket = seen[hash_column(col.data(), k)];
    std::size_t found = multiplicity_.size();
    for (std::size_t c : bucket) {
      if (std::equal(col.begin(), col.end(), columns.begin() + static_cast<std::ptrdiff_t>(c * k))) {
        found = c;
        break;
      }
    }
    if (found == multiplicity_.size()) {
      bucket.push_back(found);
      columns.insert(columns.end(), col.begin(), col.end());
      multiplicity_.push_back(0.0);
    }
    multiplicity_[found] += 1.0;
    column_of_[i] = found;
  }
  const std::size_t c_count = multiplicity_.size();
  raw_.resize(k * c_count);
  roots_.resize(k * c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = columns[c * k + j];
      raw_[j * c_count + c] = v;
      roots_[j * c_count + c] = std::sqrt(v);
    }
  }
}

double psi_statistic(const DensityMatrix& dm, std::size_t t, std::size_t t_prime) {
  require_index(t, dm.members(), "psi_statistic");
  require_index(t_prime, dm.members(), "psi_statistic");
  return psi_sum(dm.root_row(t_prime).data(), dm.root_row(t).data(), dm.multiplicities().data(), dm.columns());
}

double sup_psi(const DensityMatrix& dm, std::size_t t) {
  require_index(t, dm.members(), "sup_psi");
  double best = 0.0;  // t' = t
  for (std::size_t u = 0; u < dm.members(); ++u) {
    if (u != t) best = std::max(best, psi_statistic(dm, t, u));
  }
  return best;
}

std::vector<double> sup_psi_all(const DensityMatrix& dm, unsigned threads) {
  const std::vector<double> zeros(dm.members(), 0.0);
  return pairwise_sup(dm, zeros, zeros, threads);
}

WeightVector normalize_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty()) throw DomainError("normalize_log_weights: empty");
  double top = -kInfinity;
  for (double l : log_weights) {
    if (std::isnan(l) || l == kInfinity) throw DomainError("normalize_log_weights: NaN or +inf log-weight");
    top = std::max(top, l);
  }
  if (top == -kInfinity) throw DegeneratePosteriorError("every member has zero posterior weight");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - top);
  const double sum = detail::accurate_sum(w);
  for (double& v : w) v /= sum;
  return WeightVector{std::move(w)};
}

PosteriorResult rho_posterior(const DensityMatrix& dm, const WeightVector& prior, double beta, unsigned threads) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("rho_posterior: beta must be positive");
  prior.validate(dm.members());
  PosteriorResult out;
  out.statistic = sup_psi_all(dm, threads);
  out.log_unnormalized.resize(dm.members());
  for (std::size_t t = 0; t < dm.members(); ++t) {
    out.log_unnormalized[t] = std::log(prior[t]) - beta * out.statistic[t];
  }
  out.weights = normalize_log_weights(out.log_unnormalized);
  return out;
}

PosteriorResult rho_posterior(const Dataset& data, const Net& net, const WeightVector& prior, double beta,
                              unsigned threads) {
  return rho_posterior(DensityMatrix(net, data), prior, beta, threads);
}

double log_likelihood(const DensityMatrix& dm, std::size_t t) {
  require_index(t, dm.members(), "log_likelihood");
  const auto row = dm.raw_row(t);
  const auto w = dm.multiplicities();
  double sum = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] == 0.0) return -kInfinity;
    sum += w[c] * std::log(row[c]);
  }
  return sum;
}

PosteriorResult classical_posterior(const DensityMatrix& dm, const WeightVector& prior, double beta_l) {
  if (!(beta_l > 0.0) || !std::isfinite(beta_l)) throw DomainError("classical_posterior: beta_L must be positive");
  prior.validate(dm.members());
  PosteriorResult out;
  out.statistic.resize(dm.members());
  out.log_unnormalized.resize(dm.members());
  for (std::size_t t = 0; t < dm.members(); ++t) {
    out.statistic[t] = log_likelihood(dm, t);
    out.log_unnormalized[t] = (prior[t] > 0.0 && out.statistic[t] > -kInfinity)
                                  ? std::log(prior[t]) + beta_l * out.statistic[t]
                                  : -kInfinity;
  }
  try {
    out.weights = normalize_log_weights(out.log_unnormalized);
  } catch (const DegeneratePosteriorError&) {
    throw DegeneratePosteriorError(
        "classical_posterior: every member with positive prior mass has zero likelihood");
  }
  return out;
}

PosteriorResult classical_posterior(const Dataset& data, const Net& net, const WeightVector& prior, double beta_l) {
  return classical_posterior(DensityMatrix(net, data), prior, beta_l);
}

double uniform_scale_posterior_cdf(const Dataset& data, double a, double alpha_prior, double t) {
  if (!(a > 0.0)) throw DomainError("uniform_scale_posterior_cdf: a must be > 0");
  if (!(alpha_prior > 1.0)) throw DomainError("uniform_scale_posterior_cdf: alpha must be > 1");
  if (data.dim != 1) throw DomainError("uniform_scale_posterior_cdf: one-dimensional data required");
  const double lower = std::max(a, data.values.empty() ? a : data.max_value());
  if (!(t > lower)) return 0.0;
  const double power = static_cast<double>(data.size()) + alpha_prior - 1.0;
  return 1.0 - std::pow(lower / t, power);
}

double posterior_ball_mass(const WeightVector& post, const Net& net, const DensityMember& center, double r) {
  post.validate(net.size());
  if (!(r >= 0.0)) throw DomainError("posterior_ball_mass: r must be >= 0");
  double mass = 0.0;
  for (std::size_t j = 0; j < net.size(); ++j) {
    if (hellinger_pair(center, net[j]) <= r) mass += post[j];
  }
  return std::min(mass, 1.0);
}

double posterior_hellinger_sq(const WeightVector& p, const WeightVector& q) {
  if (p.size() != q.size()) throw DomainError("posterior_hellinger_sq: weight vectors over different nets");
  p.validate(p.size());
  q.validate(q.size());
  // (1/2) sum (sqrt p - sqrt q)^2 equals 1 - sum sqrt(p q) for normalized
  // weights, without the cancellation when the two are close.
  std::vector<double> terms(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double d = std::sqrt(p[j]) - std::sqrt(q[j]);
    terms[j] = 0.5 * d * d;
  }
  return std::clamp(detail::accurate_sum(terms), 0.0, 1.0);
}

Penalty penalty(std::size_t /*m*/, double dimension, std::size_t n, double beta, double L) {
  if (!(L >= 0.0) || !std::isfinite(L)) throw DomainError("penalty: L_m must be finite and >= 0");
  if (!(dimension >= 1.0)) throw DomainError("penalty: dimension must be >= 1");
  const Constants c = make_constants(beta, n);
  const double eps_bar = eps_vc_bound(dimension, n);
  return {c.c5 * eps_bar * eps_bar + (c.c6 + 1.0 / beta) * L, eps_bar};
}

void ModelCollection::add(Net net, WeightVector prior, double L, double dimension, std::size_t n, double beta) {
  const Penalty p = penalty(models_.size(), dimension, n, beta, L);
  ModelEntry e{std::move(net), std::move(prior), L, p.pen, p.eps_bar, dimension, false};
  e.prior.validate(e.net.size());
  models_.push_back(std::move(e));
}

void ModelCollection::add_with_penalty(Net net, WeightVector prior, double L, double pen) {
  ModelEntry e{std::move(net), std::move(prior), L, pen, 0.0, 0.0, true};
  e.prior.validate(e.net.size());
  if (!(pen >= 0.0) || !std::isfinite(pen)) throw DomainError("ModelCollection: penalty must be finite and >= 0");
  models_.push_back(std::move(e));
}

void ModelCollection::validate() const {
  if (models_.empty()) throw DomainError("ModelCollection: no models");
  double total = 0.0;
  for (const auto& m : models_) {
    m.prior.validate(m.net.size());
    if (!(m.L >= 0.0) || !std::isfinite(m.L)) throw DomainError("ModelCollection: L_m must be finite and >= 0");
    if (!(m.pen >= 0.0) || !std::isfinite(m.pen)) throw DomainError("ModelCollection: pen must be finite and >= 0");
    total += std::exp(-m.L);
  }
  if (std::abs(total - 1.0) > kLadderTol) {
    throw DomainError("ModelCollection: sum of exp(-L_m) is " + full(total) + ", expected 1");
  }
}

std::size_t ModelCollection::total_members() const {
  std::size_t n = 0;
  for (const auto& m : models_) n += m.net.size();
  return n;
}

std::vector<double> truncated_ladder_weights(std::size_t models) {
  if (models == 0) throw DomainError("truncated_ladder_weights: need at least one model");
  std::vector<double> L(models);
  for (std::size_t m = 0; m + 1 < models; ++m) L[m] = static_cast<double>(m + 1) * std::log(2.0);
  L.back() = static_cast<double>(models - 1) * std::log(2.0);
  return L;
}

std::size_t ModelSelectionResult::selected() const {
  return static_cast<std::size_t>(std::max_element(model_mass.begin(), model_mass.end()) - model_mass.begin());
}

std::vector<DensityMember> union_members(const ModelCollection& coll) {
  std::vector<DensityMember> out;
  out.reserve(coll.total_members());
  for (const auto& m : coll.models()) out.insert(out.end(), m.net.members().begin(), m.net.members().end());
  return out;
}

namespace {

struct UnionLayout {
  std::vector<std::size_t> model_of;
  std::vector<std::size_t> offset;
  std::vector<double> shifted_pen;
};

UnionLayout layout(const ModelCollection& coll) {
  UnionLayout u;
  double min_pen = kInfinity;
  for (const auto& m : coll.models()) min_pen = std::min(min_pen, m.pen);
  for (std::size_t m = 0; m < coll.size(); ++m) {
    u.offset.push_back(u.model_of.size());
    u.model_of.insert(u.model_of.end(), coll[m].net.size(), m);
    u.shifted_pen.push_back(coll[m].pen - min_pen);
  }
  return u;
}

}  // namespace

std::vector<double> penalized_sup_psi_all(const DensityMatrix& union_dm, const ModelCollection& coll,
                                          unsigned threads) {
  if (union_dm.members() != coll.total_members()) {
    throw DomainError("penalized_sup_psi_all: density matrix does not cover the union of the models");
  }
  const UnionLayout u = layout(coll);
  std::vector<double> offset(union_dm.members());
  for (std::size_t t = 0; t < offset.size(); ++t) offset[t] = u.shifted_pen[u.model_of[t]];
  std::vector<double> init(offset.size());
  for (std::size_t t = 0; t < init.size(); ++t) init[t] = 0.0 - offset[t];
  // Shifting every pen(m') by the same constant shifts Psi_bar by it too.
  std::vector<double> best = pairwise_sup(union_dm, init, offset, threads);
  double min_pen = kInfinity;
  for (const auto& m : coll.models()) min_pen = std::min(min_pen, m.pen);
  for (double& b : best) b -= min_pen;
  return best;
}

double penalized_sup_psi(const DensityMatrix& union_dm, const ModelCollection& coll, std::size_t model,
                         std::size_t index) {
  require_index(model, coll.size(), "penalized_sup_psi");
  require_index(index, coll[model].net.size(), "penalized_sup_psi");
  const UnionLayout u = layout(coll);
  const std::size_t t = u.offset[model] + index;
  double best = -kInfinity;
  for (std::size_t v = 0; v < union_dm.members(); ++v) {
    best = std::max(best, psi_statistic(union_dm, t, v) - coll[u.model_of[v]].pen);
  }
  return best;
}

ModelSelectionResult model_selection_posterior(const DensityMatrix& union_dm, const ModelCollection& coll,
                                               double beta, unsigned threads) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("model_selection_posterior: beta must be positive");
  coll.validate();
  if (union_dm.members() != coll.total_members()) {
    throw DomainError("model_selection_posterior: density matrix does not cover the union of the models");
  }
  const UnionLayout u = layout(coll);
  const std::size_t n = union_dm.members();
  std::vector<double> offset(n);
  std::vector<double> init(n);
  for (std::size_t t = 0; t < n; ++t) {
    offset[t] = u.shifted_pen[u.model_of[t]];
    init[t] = 0.0 - offset[t];
  }

  ModelSelectionResult r;
  r.model_of = u.model_of;
  r.offset = u.offset;
  r.shifted_pen = u.shifted_pen;
  // Psi_bar with shifted penalties; the constant min pen cancels on normalization.
  r.posterior.statistic = pairwise_sup(union_dm, init, offset, threads);
  r.posterior.log_unnormalized.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t m = u.model_of[t];
    const double log_prior = std::log(coll[m].prior[t - u.offset[m]]) - beta * u.shifted_pen[m];
    r.posterior.log_unnormalized[t] = log_prior - beta * r.posterior.statistic[t];
  }
  r.posterior.weights = normalize_log_weights(r.posterior.log_unnormalized);
  r.model_mass.assign(coll.size(), 0.0);
  for (std::size_t t = 0; t < n; ++t) r.model_mass[u.model_of[t]] += r.posterior.weights[t];
  return r;
}

ModelSelectionResult model_selection_posterior(const Dataset& data, const ModelCollection& coll, double beta,
                                               unsigned threads) {
  const auto members = union_members(coll);
  return model_selection_posterior(DensityMatrix(members, data), coll, beta, threads);
}

namespace {

void csv_header(std::ostream& out, std::size_t params) {
  out << "model_id,member_id";
  for (std::size_t k = 0; k < params; ++k) out << ",param_" << k;
  out << ",prior_w,log_unnorm,post_w\n";
}

void csv_row(std::ostream& out, std::size_t model, std::size_t member, std::span<const double> params,
             std::size_t width, double prior, double log_unnorm, double post) {
  out << model << ',' << member;
  for (std::size_t k = 0; k < width; ++k) {
    out << ',';
    if (k < params.size()) out << full(params[k]);
  }
  out << ',' << full(prior) << ',' << full(log_unnorm) << ',' << full(post) << '\n';
}

}  // namespace

void write_posterior_csv(std::ostream& out, const Net& net, const WeightVector& prior, const PosteriorResult& post) {
  prior.validate(net.size());
  post.weights.validate(net.size());
  const std::size_t width = net.spec_ptr()->param_count();
  csv_header(out, width);
  for (std::size_t j = 0; j < net.size(); ++j) {
    csv_row(out, 0, j, net[j].params(), width, prior[j], post.log_unnormalized[j], post.weights[j]);
  }
}

void write_posterior_csv(std::ostream& out, const ModelCollection& coll, const ModelSelectionResult& result) {
  std::size_t width = 0;
  for (const auto& m : coll.models()) width = std::max(width, m.net.spec_ptr()->param_count());
  // prior_w is the within-model prior pi_m(t); the exp(-beta pen(m)) factor
  // shows up in log_unnorm.
  csv_header(out, width);
  for (std::size_t t = 0; t < result.model_of.size(); ++t) {
    const std::size_t m = result.model_of[t];
    const std::size_t j = t - result.offset[m];
    csv_row(out, m, j, coll[m].net[j].params(), width, coll[m].prior[j], result.posterior.log_unnormalized[t],
            result.posterior.weights[t]);
  }
}

}  // namespace rho_bayes
