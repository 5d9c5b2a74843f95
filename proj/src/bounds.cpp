#include "rho_bayes/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include "json.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "rho_bayes/error.hpp"
#include "rho_bayes/posterior.hpp"

namespace rho_bayes {

namespace {

constexpr double kConditionRelTol = 1e-12;

double constant_c0() { return make_constants().c0; }

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInfinity;
  for (double x : v) m = std::max(m, x);
  if (m == -kInfinity) return -kInfinity;
  std::vector<double> terms;
  terms.reserve(v.size());
  for (double x : v) terms.push_back(std::exp(x - m));
  return m + std::log(detail::accurate_sum(terms));
}

// psi(sqrt(exp(log_num - log_den))) = tanh((log_num - log_den) / 4), with
// 0/0 read as ratio one.
double psi_from_logs(double log_num, double log_den) {
  if (log_num == log_den) return 0.0;  // also covers both -inf / both +inf
  return std::tanh((log_num - log_den) / 4.0);
}

void check_distances(std::span<const double> distances, std::span<const double> prior, const char* who) {
  if (distances.size() != prior.size() || distances.empty()) {
    throw DomainError(std::string(who) + ": distances and prior must be non-empty and aligned");
  }
  for (std::size_t j = 0; j < distances.size(); ++j) {
    if (!(distances[j] >= 0.0) || !std::isfinite(distances[j])) {
      throw DomainError(std::string(who) + ": distances must be finite and >= 0");
    }
    if (!(prior[j] >= 0.0) || !std::isfinite(prior[j])) {
      throw DomainError(std::string(who) + ": prior weights must be finite and >= 0");
    }
  }
}

// Prior mass of closed balls around a fixed center, as a step function of
// the radius.
class BallMasses {
 public:
  BallMasses(std::span<const double> distances, std::span<const double> prior) {
    std::vector<std::size_t> order(distances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
    long double acc = 0.0L;
    cumulative_.push_back(0.0);
    for (std::size_t k = 0; k < order.size(); ++k) {
      acc += prior[order[k]];
      const double d = distances[order[k]];
      if (!radii_.empty() && radii_.back() == d) {
        cumulative_.back() = static_cast<double>(acc);
      } else {
        radii_.push_back(d);
        cumulative_.push_back(static_cast<double>(acc));
      }
    }
  }

  double operator()(double r) const {
    const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
    return cumulative_[static_cast<std::size_t>(it - radii_.begin())];
  }

  const std::vector<double>& radii() const { return radii_; }

 private:
  std::vector<double> radii_;
  std::vector<double> cumulative_;  // cumulative_[k] = mass of the k smallest radii
};

bool condition_at(const BallMasses& mass, double gamma, double r) {
  const double inner = mass(r);
  const double outer = mass(2.0 * r);
  return outer <= std::exp(gamma * r * r) * inner * (1.0 + kConditionRelTol);
}

// {0} U {d} U {d / 2}, sorted and deduplicated.
std::vector<double> critical_radii(const BallMasses& mass) {
  std::vector<double> c{0.0};
  for (double d : mass.radii()) {
    c.push_back(d);
    c.push_back(0.5 * d);
  }
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

bool same_family(const FamilySpec& a, const FamilySpec& b) {
  if (a.family != b.family) return false;
  switch (a.family) {
    case Family::uniform_scale: return true;
    case Family::uniform_cube: return a.cube_dim == b.cube_dim;
    case Family::gamma_translation: return a.gamma_alpha == b.gamma_alpha;
    case Family::histogram: return a.breakpoints == b.breakpoints;
    case Family::exp_family: return a.exp.degree == b.exp.degree;
  }
  return false;
}

double expected_psi_uniform_scale(double a, double b, double c) {
  // s = U(0, a), t = U(0, b), t' = U(0, c).
  const double lo = std::min(b, c);
  const double hi = std::max(b, c);
  const double inner = psi_sqrt_ratio(1.0 / c, 1.0 / b);
  const double outer = b < c ? 1.0 : (c < b ? -1.0 : 0.0);
  return (std::min(a, lo) * inner + std::max(0.0, std::min(a, hi) - lo) * outer) / a;
}

double cube_overlap(std::span<const double> s, std::span<const double> t) {
  double p = 1.0;
  for (std::size_t j = 0; j < s.size(); ++j) p *= std::max(0.0, 1.0 - std::abs(s[j] - t[j]));
  return p;
}

double expected_psi_gamma(const DensityMember& s, const DensityMember& t, const DensityMember& tp) {
  // Substituting x = theta_s + v^(1 / 2 alpha) turns s(x) dx into
  // (c / 2 alpha) exp(-g) dv with g = v^(1 / 2 alpha): the singularity of s
  // at its left end disappears. The integrand still has kinks where t and t'
  // start, so the v-range is split there.
  const FamilySpec& spec = s.spec();
  const double alpha = spec.gamma_alpha;
  const double shape_m1 = 2.0 * alpha - 1.0;
  const double theta_s = s.params()[0];
  const double scale = std::exp(s.log_normalizer()) / (2.0 * alpha);

  auto log_density = [shape_m1](const DensityMember& m, double x) {
    const double y = x - m.params()[0];
    if (y < 0.0) return -kInfinity;
    if (y == 0.0) return shape_m1 < 0.0 ? kInfinity : (shape_m1 > 0.0 ? -kInfinity : m.log_normalizer());
    return m.log_normalizer() + shape_m1 * std::log(y) - y;
  };
  auto integrand = [&](double v) {
    const double g = std::pow(v, 1.0 / (2.0 * alpha));
    const double x = theta_s + g;
    return scale * std::exp(-g) * psi_from_logs(log_density(tp, x), log_density(t, x));
  };

  double far = 0.0;
  std::vector<double> cuts{0.0};
  for (double th : {t.params()[0], tp.params()[0]}) {
    if (th > theta_s) {
      cuts.push_back(std::pow(th - theta_s, 2.0 * alpha));
      far = std::max(far, th - theta_s);
    }
  }
  cuts.push_back(std::pow(far + 45.0, 2.0 * alpha));  // exp(-45) tail is far below tolerance
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    QuadratureSpec q = spec.quadrature;
    q.lower = cuts[k];
    q.upper = cuts[k + 1];
    q.abs_tol = spec.quadrature.abs_tol / static_cast<double>(cuts.size());
    total += integrate(integrand, q).value;
  }
  return total;
}

double expected_psi_exp_family(const DensityMember& s, const DensityMember& t, const DensityMember& tp) {
  QuadratureSpec q = s.spec().quadrature;
  q.lower = 0.0;
  q.upper = 1.0;
  auto f = [&](double x) { return s.density(x) * psi_sqrt_ratio(tp.density(x), t.density(x)); };
  return integrate(f, q).value;
}

}  // namespace

double eps_finite_bound(std::size_t net_size, std::size_t n) {
  if (net_size == 0 || n == 0) throw DomainError("eps_finite_bound: net size and n must be >= 1");
  const double c0 = constant_c0();
  const double size = static_cast<double>(net_size);
  const double finite_branch = (1.0 + c0 * std::sqrt(2.0)) * std::log(2.0 * size * size);
  return std::sqrt(c0 / 3.0 * std::min(finite_branch, static_cast<double>(n)));
}

double eps_vc_bound(double dimension, std::size_t n) {
  if (!(dimension >= 1.0) || !std::isfinite(dimension)) throw DomainError("eps_vc_bound: dimension must be >= 1");
  if (n == 0) throw DomainError("eps_vc_bound: n must be >= 1");
  const Constants c = make_constants(kDefaultBeta, n);
  const double nn = static_cast<double>(n);
  const double d = std::min(dimension, nn);
  return 11.0 * c.c0 / 4.0 * std::sqrt(c.cbar * d) * std::pow(std::log(std::exp(1.0) * nn / d), 1.5);
}

std::vector<double> default_y_grid(std::size_t n, double q) {
  if (n == 0) throw DomainError("default_y_grid: n must be >= 1");
  if (!(q > 1.0)) throw DomainError("default_y_grid: ratio must be > 1");
  const double cap = std::sqrt(constant_c0() * static_cast<double>(n) / 3.0);
  std::vector<double> grid;
  for (double y = 1.0; y <= cap; y *= q) grid.push_back(y);
  return grid;
}

double expected_psi(const DensityMember& s, const DensityMember& t, const DensityMember& t_prime) {
  if (!same_family(s.spec(), t.spec()) || !same_family(s.spec(), t_prime.spec())) {
    throw DomainError("expected_psi: s, t and t' must belong to the same family");
  }
  switch (s.family()) {
    case Family::uniform_scale:
      return expected_psi_uniform_scale(s.params()[0], t.params()[0], t_prime.params()[0]);
    case Family::uniform_cube:
      // psi is +1 where only t' is positive, -1 where only t is, 0 elsewhere.
      return cube_overlap(s.params(), t_prime.params()) - cube_overlap(s.params(), t.params());
    case Family::histogram: {
      const auto& b = s.spec().breakpoints;
      double e = 0.0;
      for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        const double w = b[j + 1] - b[j];
        e += s.params()[j] * psi_sqrt_ratio(t_prime.params()[j] / w, t.params()[j] / w);
      }
      return e;
    }
    case Family::gamma_translation: return expected_psi_gamma(s, t, t_prime);
    case Family::exp_family: return expected_psi_exp_family(s, t, t_prime);
  }
  throw DomainError("expected_psi: unsupported family");
}

EpsEstimate eps_monte_carlo(const DensityMember& truth, const Net& net, std::span<const double> y_grid,
                            std::size_t n, std::size_t reps, std::uint64_t seed, unsigned threads,
                            std::size_t pair_cap) {
  if (net.empty()) throw DomainError("eps_monte_carlo: empty net");
  if (n == 0 || reps == 0) throw DomainError("eps_monte_carlo: n and reps must be >= 1");
  if (y_grid.empty()) throw DomainError("eps_monte_carlo: empty y grid");
  for (std::size_t k = 0; k < y_grid.size(); ++k) {
    if (!(y_grid[k] >= 1.0) || !std::isfinite(y_grid[k]) || (k > 0 && !(y_grid[k] > y_grid[k - 1]))) {
      throw DomainError("eps_monte_carlo: y grid must be finite, >= 1 and strictly increasing");
    }
  }
  if (pair_cap == 0) throw DomainError("eps_monte_carlo: pair cap must be >= 1");

  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<double> h(net.size());
  for (std::size_t j = 0; j < net.size(); ++j) h[j] = root_n * hellinger_pair(truth, net[j]);

  // Ball members sorted by distance to s; ball(y_k) is a prefix of this list.
  std::vector<std::size_t> ball;
  for (std::size_t j = 0; j < net.size(); ++j) {
    if (h[j] <= y_grid.back()) ball.push_back(j);
  }
  std::stable_sort(ball.begin(), ball.end(), [&](std::size_t a, std::size_t b) { return h[a] < h[b]; });
  const std::size_t grid_size = y_grid.size();
  std::vector<std::size_t> entry(ball.size());  // first grid index whose ball holds the member
  for (std::size_t k = 0; k < ball.size(); ++k) {
    entry[k] = static_cast<std::size_t>(std::lower_bound(y_grid.begin(), y_grid.end(), h[ball[k]]) - y_grid.begin());
  }

  struct Pair {
    std::size_t a, b;  // positions in ball, a < b
    double mean = 0.0;
  };
  std::vector<Pair> pairs;
  EpsEstimate out;
  const std::size_t m = ball.size();
  const double all_pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m > 0 ? m - 1 : 0);
  if (all_pairs <= static_cast<double>(pair_cap)) {
    pairs.reserve(static_cast<std::size_t>(all_pairs));
    for (std::size_t b = 1; b < m; ++b) {
      for (std::size_t a = 0; a < b; ++a) pairs.push_back({a, b});
    }
  } else {
    out.subsampled = true;
    std::mt19937_64 rng(stream_seed(seed, std::numeric_limits<std::uint64_t>::max()));
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    pairs.reserve(pair_cap);
    while (pairs.size() < pair_cap) {
      std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      pairs.push_back({a, b});
    }
  }

  const unsigned pair_workers = detail::resolve_threads(threads, pairs.size());
  detail::parallel_for(pairs.size(), pair_workers, [&](unsigned, std::size_t p) {
    pairs[p].mean = static_cast<double>(n) * expected_psi(truth, net[ball[pairs[p].a]], net[ball[pairs[p].b]]);
  });

  std::vector<DensityMember> ball_members;
  ball_members.reserve(m);
  for (std::size_t j : ball) ball_members.push_back(net[j]);

  // sup_by_rep[r * grid_size + k] = sup over pairs inside ball(y_k) of |Z|.
  std::vector<double> sup_by_rep(reps * grid_size, 0.0);
  const unsigned rep_workers = detail::resolve_threads(threads, reps);
  detail::parallel_for(reps, rep_workers, [&](unsigned, std::size_t r) {
    if (pairs.empty()) return;
    const Dataset data = sample_dataset(truth, ContaminationSpec{}, n, stream_seed(seed, r));
    const DensityMatrix dm(ball_members, data);
    double* row = &sup_by_rep[r * grid_size];
    for (const Pair& p : pairs) {
      const double z = std::abs(psi_statistic(dm, p.a, p.b) - p.mean);
      const std::size_t k = entry[p.b];
      if (k < grid_size) row[k] = std::max(row[k], z);
    }
    for (std::size_t k = 1; k < grid_size; ++k) row[k] = std::max(row[k], row[k - 1]);
  });

  const double c0 = constant_c0();
  const double cap = std::sqrt(c0 * static_cast<double>(n) / 3.0);
  std::vector<double> column(reps);
  std::ptrdiff_t last = -1;
  for (std::size_t k = 0; k < grid_size; ++k) {
    for (std::size_t r = 0; r < reps; ++r) column[r] = sup_by_rep[r * grid_size + k];
    const double mean = detail::accurate_sum(column) / static_cast<double>(reps);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double se = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps)) : 0.0;
    out.w_curve.push_back({y_grid[k], mean, se});
    if (mean > 6.0 * y_grid[k] * y_grid[k] / c0) last = static_cast<std::ptrdiff_t>(k);
  }
  out.replications = reps;
  if (last >= 0) {
    const auto k = static_cast<std::size_t>(last);
    out.epsilon = y_grid[k];
    out.epsilon_upper = k + 1 < grid_size ? y_grid[k + 1] : cap;
  } else {
    out.epsilon = 1.0;
    const auto above = std::upper_bound(y_grid.begin(), y_grid.end(), 1.0);
    out.epsilon_upper = above != y_grid.end() ? *above : cap;
  }
  out.epsilon_upper = std::max(out.epsilon, std::min(out.epsilon_upper, cap));
  return out;
}

bool ball_condition_holds(std::span<const double> distances, std::span<const double> prior, double gamma,
                          double r) {
  check_distances(distances, prior, "ball_condition_holds");
  if (!(gamma > 0.0)) throw DomainError("ball_condition_holds: gamma must be > 0");
  return condition_at(BallMasses(distances, prior), gamma, r);
}

EtaResult eta_from_distances(std::span<const double> distances, std::span<const double> prior, double gamma) {
  check_distances(distances, prior, "eta_exact");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("eta_exact: gamma must be finite and > 0");
  const BallMasses mass(distances, prior);
  const std::vector<double> c = critical_radii(mass);

  // On [c_k, c_{k+1}) both masses are constant, so the condition fails
  // exactly on [c_k, sqrt(log(ratio) / gamma)).
  EtaResult out;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (condition_at(mass, gamma, c[k])) continue;
    const double inner = mass(c[k]);
    const double outer = mass(2.0 * c[k]);
    const double next = k + 1 < c.size() ? c[k + 1] : kInfinity;
    const double solve = inner > 0.0 ? std::sqrt(std::log(outer / inner) / gamma) : kInfinity;
    out.eta = std::max(out.eta, std::min(solve, next));
  }

  std::vector<double> audit = c;
  for (std::size_t k = 0; k + 1 < c.size(); ++k) audit.push_back(0.5 * (c[k] + c[k + 1]));
  std::sort(audit.begin(), audit.end());
  for (double r : audit) {
    if (!condition_at(mass, gamma, r)) out.violating_radii.push_back(r);
  }
  return out;
}

std::vector<double> product_distances(const Net& net, std::size_t t, std::size_t n) {
  if (t >= net.size()) throw DomainError("product_distances: member index out of range");
  if (n == 0) throw DomainError("product_distances: n must be >= 1");
  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<double> d(net.size());
  for (std::size_t j = 0; j < net.size(); ++j) d[j] = root_n * net.distance(t, j);
  return d;
}

EtaResult eta_exact(const Net& net, const WeightVector& prior, std::size_t t, double gamma, std::size_t n) {
  prior.validate(net.size());
  return eta_from_distances(product_distances(net, t, n), prior.weights, gamma);
}

double eta_param_bound(double a_bar, double a_low, double alpha_exp, double kappa0, double gamma) {
  if (!(a_low > 0.0) || !(a_bar >= a_low)) throw DomainError("eta_param_bound: need 0 < a_low <= a_bar");
  if (!(alpha_exp > 0.0)) throw DomainError("eta_param_bound: alpha must be > 0");
  if (!(kappa0 >= 1.0)) throw DomainError("eta_param_bound: kappa0 must be >= 1");
  if (!(gamma > 0.0)) throw DomainError("eta_param_bound: gamma must be > 0");
  const double bracket = std::log(2.0 * a_bar / a_low) / (alpha_exp * std::log(2.0)) + 1.0;
  return std::sqrt(std::log(kappa0) / gamma * bracket);
}

double kappa0_bounded_density(std::size_t dim, double b_bar, double b_low) {
  if (dim == 0) throw DomainError("kappa0_bounded_density: dimension must be >= 1");
  if (!(b_low > 0.0) || !(b_bar >= b_low)) throw DomainError("kappa0_bounded_density: need 0 < b_low <= b_bar");
  return std::ldexp(b_bar / b_low, static_cast<int>(dim));
}

double kappa0_power_law(double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw DomainError("kappa0_power_law: xi must lie in (0, 1)");
  return std::pow(2.0, 1.0 + xi) / (std::pow(2.0, xi) - 1.0);
}

double eta_dirichlet_bound(std::span<const double> alpha, double gamma) {
  const std::size_t k = alpha.size();
  if (k < 2) throw DomainError("eta_dirichlet_bound: need k >= 2");
  if (!(gamma > 0.0)) throw DomainError("eta_dirichlet_bound: gamma must be > 0");
  double log_lambda = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("eta_dirichlet_bound: alpha must lie in (0, 1]");
    log_lambda += std::log(std::min(2.0 * a, 1.0));
  }
  log_lambda /= static_cast<double>(k);
  const double kk = static_cast<double>(k);
  return std::sqrt(kk / gamma * (std::log(75.0 * kk * kk) - log_lambda));
}

double eta_smallmass_exponent(double alpha_shape, double delta) {
  if (!(alpha_shape > 0.0 && alpha_shape < 1.0)) throw DomainError("eta_smallmass_exponent: alpha must lie in (0, 1)");
  if (!(delta > 0.0)) throw DomainError("eta_smallmass_exponent: delta must be > 0");
  return delta / (2.0 * (2.0 * alpha_shape + delta));
}

double eta_bar_sq_from_distances(std::span<const double> distances, std::span<const double> prior, double beta) {
  check_distances(distances, prior, "eta_bar_sq");
  const Constants c = make_constants(beta);
  const BallMasses mass(distances, prior);
  // Within a constancy interval of the mass the quadratic term is smallest at
  // the left end, so the radii 0 and d_j are enough.
  double best = kInfinity;
  std::vector<double> radii{0.0};
  radii.insert(radii.end(), mass.radii().begin(), mass.radii().end());
  for (double r : radii) {
    const double m = mass(r);
    if (!(m > 0.0)) continue;
    best = std::min(best, c.c7 * r * r + std::log(1.0 / m) / (2.0 * beta));
  }
  return best;
}

double eta_bar_sq(const Net& net, const WeightVector& prior, std::size_t t, double beta, std::size_t n) {
  prior.validate(net.size());
  return eta_bar_sq_from_distances(product_distances(net, t, n), prior.weights, beta);
}

RbarResult rbar(std::span<const RbarTerm> terms, double eps, double xi, double xi_prime, double beta,
                std::size_t n) {
  if (terms.empty()) throw DomainError("rbar: no candidate terms");
  if (!(eps >= 0.0) || !(xi >= 0.0) || !(xi_prime >= 0.0)) throw DomainError("rbar: inputs must be >= 0");
  if (n == 0) throw DomainError("rbar: n must be >= 1");
  const Constants c = make_constants(beta, n);
  double best = kInfinity;
  for (const RbarTerm& t : terms) {
    if (!(t.h >= 0.0) || !(t.eta >= 0.0)) throw DomainError("rbar: h and eta must be >= 0");
    best = std::min(best, c.c1 * t.h + c.c2 * t.eta);
  }
  const double value = best + c.c3 * eps + c.c4 * std::sqrt(xi + xi_prime + 2.61);
  return {value, value >= std::sqrt(static_cast<double>(n))};
}

PropIntResult prop_int_from_distances(std::span<const double> distances, std::span<const double> prior, double a,
                                      double b, double r, int J) {
  check_distances(distances, prior, "prop_int_check");
  PropIntResult out;
  bool numeric_ok = true;
  auto fail = [&](const char* why) {
    numeric_ok = false;
    if (out.message.empty()) out.message = why;
  };
  if (!(r > 0.0) || !std::isfinite(r)) fail("r must be finite and > 0");
  if (!(a > 0.0) || !std::isfinite(a)) fail("a must be finite and > 0");
  if (!(b >= a) || !std::isfinite(b)) fail("need a <= b");
  if (numeric_ok && a * r * r < 1.0) fail("need r^-2 <= a");
  if (J < 1) fail("J must be >= 1");
  if (numeric_ok && std::ldexp(1.0, 2 * (J - 1)) < b / a) fail("need 4^(J-1) >= b/a");
  if (!numeric_ok) return out;

  const double r0 = std::ldexp(r, -J);
  out.ball_condition_ok = eta_from_distances(distances, prior, 3.0 * a / 8.0).eta <= r0;
  if (!out.ball_condition_ok) out.message = "ball condition fails at gamma = 3a/8 above r0";
  out.precondition_ok = out.ball_condition_ok;

  std::vector<double> num;
  std::vector<double> den;
  for (std::size_t j = 0; j < distances.size(); ++j) {
    if (!(prior[j] > 0.0)) continue;
    const double lp = std::log(prior[j]);
    const double d2 = distances[j] * distances[j];
    if (distances[j] > r) num.push_back(lp - a * d2);
    den.push_back(lp - b * d2);
  }
  const double log_lhs = num.empty() ? -kInfinity : log_sum_exp(num) - log_sum_exp(den);
  const double log_rhs = (1.0 - a * r * r) / 4.0;
  out.lhs = std::exp(log_lhs);
  out.rhs = std::exp(log_rhs);
  out.holds = log_lhs <= log_rhs + 1e-12;
  return out;
}

PropIntResult prop_int_check(const Net& net, const WeightVector& prior, std::size_t t, double a, double b,
                             double r, int J, std::size_t n) {
  prior.validate(net.size());
  return prop_int_from_distances(product_distances(net, t, n), prior.weights, a, b, r, J);
}

std::string bounds_report_json(std::span<const BoundsRow> rows) {
  auto number = [](std::optional<double> v) -> nlohmann::json {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
  };
  nlohmann::json out = nlohmann::json::array();
  for (const BoundsRow& row : rows) {
    out.push_back({{"quantity", row.quantity},
                   {"formula_value", number(row.formula_value)},
                   {"mc_estimate", number(row.mc_estimate)},
                   {"std_err", number(row.std_err)},
                   {"vacuous_flag", row.vacuous}});
  }
  return out.dump(2);
}

}  // namespace rho_bayes
