#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "rho_bayes/error.hpp"
#include "rho_bayes/posterior.hpp"

using namespace rho_bayes;

namespace {

Dataset data_1d(std::vector<double> xs) {
  Dataset d;
  d.dim = 1;
  d.values = std::move(xs);
  return d;
}

Net scale_net(std::vector<double> ts) { return build_grid_net(FamilySpec::uniform_scale(), GridSpec{{std::move(ts)}}); }

// Naive Psi straight from the definition, one observation at a time.
double naive_psi(const Net& net, const Dataset& data, std::size_t t, std::size_t tp) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double num = net[tp].density(data.observation(i));
    const double den = net[t].density(data.observation(i));
    s += psi_sqrt_ratio(num, den);
  }
  return s;
}

std::vector<double> naive_rho_weights(const Net& net, const Dataset& data, const WeightVector& prior, double beta) {
  std::vector<long double> logw(net.size());
  for (std::size_t t = 0; t < net.size(); ++t) {
    double sup = -1e300;
    for (std::size_t u = 0; u < net.size(); ++u) sup = std::max(sup, naive_psi(net, data, t, u));
    logw[t] = std::log(static_cast<long double>(prior[t])) - beta * static_cast<long double>(sup);
  }
  const long double top = *std::max_element(logw.begin(), logw.end());
  long double total = 0;
  for (auto& l : logw) total += std::exp(l - top);
  std::vector<double> w(net.size());
  for (std::size_t t = 0; t < net.size(); ++t) w[t] = static_cast<double>(std::exp(logw[t] - top) / total);
  return w;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k, bool zeros) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution z(0.25);
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) s += (v = (zeros && z(rng)) ? 0.0 : e(rng));
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : p) v /= s;
  return p;
}

double h2(const std::vector<double>& p, const std::vector<double>& q) {
  double rho = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) rho += std::sqrt(p[i] * q[i]);
  return 1.0 - rho;
}

}  // namespace

TEST_CASE("psi_statistic examples") {
  auto net = scale_net({1.0, 2.0});
  auto one = data_1d({0.5});
  DensityMatrix dm(net, one);
  CHECK(psi_statistic(dm, 0, 0) == 0.0);
  const double expected = (std::sqrt(0.5) - 1.0) / (std::sqrt(0.5) + 1.0);
  CHECK(psi_statistic(dm, 0, 1) == doctest::Approx(expected).epsilon(1e-15));

  // t = U(0,2) positive on every observation, t' = U(0,1) vanishes on all of them.
  auto beyond = data_1d({1.2, 1.5, 1.9});
  DensityMatrix dm2(net, beyond);
  CHECK(psi_statistic(dm2, 1, 0) == -3.0);
  CHECK(psi_statistic(dm2, 0, 1) == 3.0);  // 0/0 is never hit: t' > 0, t = 0 gives psi(inf)
}

TEST_CASE("sup_psi agrees with brute force") {
  auto net = scale_net({0.8, 1.0, 1.7});
  auto data = data_1d({0.1, 0.5, 0.75, 0.9, 1.3});
  DensityMatrix dm(net, data);
  for (std::size_t t = 0; t < 3; ++t) {
    double brute = -10.0;
    for (std::size_t u = 0; u < 3; ++u) brute = std::max(brute, naive_psi(net, data, t, u));
    CHECK(sup_psi(dm, t) == doctest::Approx(brute).epsilon(1e-14));
    CHECK(sup_psi(dm, t) >= 0.0);
  }
  auto all = sup_psi_all(dm);
  for (std::size_t t = 0; t < 3; ++t) CHECK(all[t] == sup_psi(dm, t));

  DensityMatrix single(scale_net({2.0}), data);
  CHECK(sup_psi(single, 0) == 0.0);
}

TEST_CASE("Psi antisymmetry, range and thread independence") {
  DensityMember truth(FamilySpec::uniform_scale(), {3.0});
  auto data = sample_dataset(truth, ContaminationSpec{0.1, UniformBox{{5.0}, {6.0}}}, 300, 4);
  auto net = scale_net(linspace(0.5, 7.0, 67));
  DensityMatrix dm(net, data);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, net.size() - 1);
  for (int i = 0; i < 500; ++i) {
    const auto a = pick(rng);
    const auto b = pick(rng);
    CHECK(psi_statistic(dm, a, b) == -psi_statistic(dm, b, a));
    CHECK(std::abs(psi_statistic(dm, a, b)) <= 300.0);
  }
  const auto one = sup_psi_all(dm, 1);
  CHECK(sup_psi_all(dm, 3) == one);
  CHECK(sup_psi_all(dm, 8) == one);
  for (std::size_t t = 0; t < net.size(); t += 7) CHECK(one[t] == sup_psi(dm, t));
}

TEST_CASE("histogram data collapses to one column per bin") {
  auto spec = FamilySpec::histogram({0.0, 0.5, 1.0});
  Net hist({DensityMember(spec, {0.2, 0.8}), DensityMember(spec, {0.5, 0.5}), DensityMember(spec, {0.7, 0.3})});
  auto data = sample_dataset(hist[1], ContaminationSpec{}, 400, 8);
  DensityMatrix dm(hist, data);
  CHECK(dm.columns() == 2);
  CHECK(dm.observations() == 400);
  double total = 0.0;
  for (double m : dm.multiplicities()) total += m;
  CHECK(total == 400.0);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t u = 0; u < 3; ++u) {
      CHECK(psi_statistic(dm, t, u) == doctest::Approx(naive_psi(hist, data, t, u)).epsilon(1e-12));
    }
  }
  for (std::size_t i = 0; i < 400; i += 37) CHECK(dm.value(2, i) == hist[2].density(data.observation(i)));
}

TEST_CASE("rho_posterior examples") {
  auto data = data_1d({0.5});
  auto single = rho_posterior(data, scale_net({1.0}), WeightVector::uniform(1));
  CHECK(single.weights[0] == 1.0);

  auto twins = rho_posterior(data, scale_net({1.0, 1.0}), WeightVector::uniform(2));
  CHECK(twins.weights[0] == 0.5);
  CHECK(twins.weights[1] == 0.5);

  std::vector<double> xs;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) xs.push_back(u(rng));
  auto fifty = data_1d(xs);
  auto net = scale_net({1.0, 2.0});
  auto prior = WeightVector::uniform(2);
  auto post = rho_posterior(fifty, net, prior, 4.0);
  auto oracle = naive_rho_weights(net, fifty, prior, 4.0);
  for (std::size_t t = 0; t < 2; ++t) CHECK(post.weights[t] == doctest::Approx(oracle[t]).epsilon(1e-12));

  // Larger net with contamination against the same oracle.
  auto big = scale_net(linspace(0.6, 3.0, 25));
  DensityMember truth(FamilySpec::uniform_scale(), {1.5});
  auto dirty = sample_dataset(truth, ContaminationSpec{0.05, UniformBox{{2.5}, {2.6}}}, 80, 12);
  auto skewed = WeightVector::normalized(linspace(1.0, 3.0, 25));
  auto p2 = rho_posterior(dirty, big, skewed, 2.5, 2);
  auto o2 = naive_rho_weights(big, dirty, skewed, 2.5);
  for (std::size_t t = 0; t < big.size(); ++t) CHECK(p2.weights[t] == doctest::Approx(o2[t]).epsilon(1e-10));

  CHECK_THROWS_AS(rho_posterior(fifty, net, prior, 0.0), DomainError);
  CHECK_THROWS_AS(rho_posterior(fifty, net, WeightVector::uniform(3)), DomainError);
}

TEST_CASE("rho_posterior invariances") {
  auto net = scale_net(linspace(0.5, 2.0, 16));
  DensityMember truth(FamilySpec::uniform_scale(), {1.0});
  auto data = sample_dataset(truth, ContaminationSpec{}, 60, 3);
  DensityMatrix dm(net, data);
  std::vector<double> raw = linspace(1.0, 4.0, 16);
  auto a = rho_posterior(dm, WeightVector::normalized(raw), 4.0);
  for (double& r : raw) r *= 1234.5;
  auto b = rho_posterior(dm, WeightVector::normalized(raw), 4.0);
  for (std::size_t t = 0; t < net.size(); ++t) CHECK(a.weights[t] == doctest::Approx(b.weights[t]).epsilon(1e-12));

  std::vector<double> shifted = a.log_unnormalized;
  for (double& l : shifted) l -= 4.0 * 17.25;  // same constant added to every sup_psi
  auto c = normalize_log_weights(shifted);
  for (std::size_t t = 0; t < net.size(); ++t) CHECK(c[t] == doctest::Approx(a.weights[t]).epsilon(1e-12));

  // Enlarging the net can only raise the supremum.
  auto bigger = scale_net(linspace(0.3, 2.2, 40));
  std::vector<DensityMember> merged(net.members().begin(), net.members().end());
  merged.insert(merged.end(), bigger.members().begin(), bigger.members().end());
  DensityMatrix dm_big(merged, data);
  auto sup_small = sup_psi_all(dm);
  auto sup_big = sup_psi_all(dm_big);
  for (std::size_t t = 0; t < net.size(); ++t) CHECK(sup_big[t] >= sup_small[t] - 1e-12);
}

TEST_CASE("log-likelihood and the classical posterior") {
  auto net = scale_net({2.0, 0.5});
  auto data = data_1d({0.3, 1.0, 1.9});
  DensityMatrix dm(net, data);
  CHECK(log_likelihood(dm, 0) == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-15));
  CHECK(log_likelihood(dm, 1) == -kInfinity);

  auto post = classical_posterior(dm, WeightVector::uniform(2));
  CHECK(post.weights[0] == 1.0);
  CHECK(post.weights[1] == 0.0);

  auto single = classical_posterior(data, scale_net({2.0}), WeightVector::uniform(1));
  CHECK(single.weights[0] == 1.0);

  CHECK_THROWS_AS(classical_posterior(data, scale_net({0.5, 1.0}), WeightVector::uniform(2)),
                  DegeneratePosteriorError);
  // The rho-posterior has no such failure.
  auto robust = rho_posterior(data, scale_net({0.5, 1.0}), WeightVector::uniform(2));
  CHECK(robust.weights[1] > robust.weights[0]);
}

TEST_CASE("closed-form posterior CDF for the uniform scale model") {
  // a v X_(n) = 1 and n + alpha - 1 = 2.
  auto one = data_1d({1.0});
  CHECK(uniform_scale_posterior_cdf(one, 0.5, 2.0, 2.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(uniform_scale_posterior_cdf(one, 0.5, 2.0, 1.0) == 0.0);
  CHECK(uniform_scale_posterior_cdf(one, 0.5, 2.0, 0.7) == 0.0);
  CHECK(uniform_scale_posterior_cdf(one, 0.5, 2.0, 1e12) == doctest::Approx(1.0));
  CHECK_THROWS_AS(uniform_scale_posterior_cdf(one, 0.0, 2.0, 1.0), DomainError);
  CHECK_THROWS_AS(uniform_scale_posterior_cdf(one, 1.0, 1.0, 1.0), DomainError);
}

TEST_CASE("classical posterior on a fine grid matches the closed form") {
  const double a = 1.0;
  const double alpha = 2.0;
  DensityMember truth(FamilySpec::uniform_scale(), {3.0});
  auto data = sample_dataset(truth, ContaminationSpec{}, 20, 5);
  const double lower = std::max(a, data.max_value());
  // 10^4 grid points on (a, a + 4 (lower - a) + 4] covering the posterior.
  const std::size_t points = 10000;
  const double top = lower * 3.0;
  std::vector<double> grid = linspace(a, top, points + 1);
  grid.erase(grid.begin());
  std::vector<double> prior(points);
  for (std::size_t k = 0; k < points; ++k) prior[k] = std::pow(grid[k], -alpha);
  auto net = scale_net(grid);
  auto post = classical_posterior(data, net, WeightVector::normalized(prior));
  double cdf = 0.0;
  double worst = 0.0;
  double cell = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    cdf += post.weights[k];
    const double exact = uniform_scale_posterior_cdf(data, a, alpha, grid[k]);
    worst = std::max(worst, std::abs(cdf - exact));
    const double prev = k ? uniform_scale_posterior_cdf(data, a, alpha, grid[k - 1]) : 0.0;
    cell = std::max(cell, exact - prev);
  }
  CHECK(worst <= cell);
  CHECK(worst > 0.0);
}

TEST_CASE("classical posterior on Dirichlet atoms matches conjugacy") {
  const std::vector<double> alpha = {0.5, 1.0, 1.0};
  const std::vector<double> bp = {0.0, 0.2, 0.5, 1.0};
  auto [net, prior] = dirichlet_prior_net(alpha, bp, 40000, 99);
  DensityMember truth(FamilySpec::histogram(bp), {0.2, 0.3, 0.5});
  auto data = sample_dataset(truth, ContaminationSpec{}, 15, 21);
  std::vector<double> counts(3, 0.0);
  for (double x : data.values) counts[x < 0.2 ? 0 : (x < 0.5 ? 1 : 2)] += 1.0;
  auto post = classical_posterior(data, net, prior);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) mean += post.weights[i] * net[i].params()[j];
    double var = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
      const double d = net[i].params()[j] - mean;
      var += post.weights[i] * post.weights[i] * d * d;
    }
    const double exact = (alpha[j] + counts[j]) / (2.5 + 15.0);
    CHECK(std::abs(mean - exact) <= 3.0 * std::sqrt(var));
  }
}

TEST_CASE("ball mass and posterior distance") {
  auto net = scale_net({1.0, 1.5, 3.0});
  WeightVector w{{0.2, 0.3, 0.5}};
  DensityMember center(FamilySpec::uniform_scale(), {1.2});
  CHECK(posterior_ball_mass(w, net, center, 1.0) == doctest::Approx(1.0));
  CHECK(posterior_ball_mass(w, net, center, 0.0) == 0.0);
  for (double r : {0.05, 0.2, 0.4, 0.6}) {
    double brute = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (hellinger_pair(center, net[j]) <= r) brute += w[j];
    }
    CHECK(posterior_ball_mass(w, net, center, r) == brute);
  }

  WeightVector p{{1.0, 0.0}};
  WeightVector q{{0.5, 0.5}};
  WeightVector s{{0.0, 1.0}};
  CHECK(posterior_hellinger_sq(p, p) == 0.0);
  CHECK(posterior_hellinger_sq(p, s) == 1.0);
  CHECK(posterior_hellinger_sq(p, q) == doctest::Approx(1.0 - std::sqrt(0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(posterior_hellinger_sq(p, w), DomainError);
}

TEST_CASE("expectation and variance bounds of psi on finite spaces") {
  std::mt19937_64 rng(31);
  const double a0 = 4.0;
  const double a1 = 3.0 / 8.0;
  const double a2_sq = 3.0 * std::sqrt(2.0);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t k = 2 + trial % 6;
    auto s = random_simplex(rng, k, trial % 2 == 0);
    auto t = random_simplex(rng, k, trial % 3 == 0);
    auto tp = random_simplex(rng, k, trial % 5 == 0);
    double mean = 0.0;
    double second = 0.0;
    for (std::size_t x = 0; x < k; ++x) {
      const double v = psi_sqrt_ratio(tp[x], t[x]);
      mean += s[x] * v;
      second += s[x] * v * v;
    }
    CHECK(mean <= a0 * h2(s, t) - a1 * h2(s, tp));
    CHECK(second <= a2_sq * (h2(s, t) + h2(s, tp)));
  }
}

TEST_CASE("penalty arithmetic") {
  const Constants c = make_constants(4.0, 100);
  const double d = 3.0;
  const double eps = 11.0 * 1000.0 / 4.0 * std::sqrt(c.cbar * d) * std::pow(std::log(std::exp(1.0) * 100.0 / d), 1.5);
  const Penalty p = penalty(0, d, 100, 4.0, std::log(2.0));
  CHECK(p.eps_bar == doctest::Approx(eps).epsilon(1e-14));
  CHECK(p.pen == doctest::Approx(0.016 * eps * eps + (7e4 + 0.25) * std::log(2.0)).epsilon(1e-14));

  const Penalty full = penalty(0, 100.0, 100, 4.0, 0.0);
  CHECK(full.eps_bar == doctest::Approx(2750.0 * std::sqrt(c.cbar * 100.0)).epsilon(1e-14));
  const Penalty capped = penalty(0, 500.0, 100, 4.0, 0.0);
  CHECK(capped.eps_bar == full.eps_bar);

  const Penalty once = penalty(1, 4.0, 500, 4.0, 1.3);
  const Penalty twice = penalty(1, 4.0, 500, 4.0, 2.6);
  CHECK(twice.pen - once.pen == doctest::Approx((7e4 + 0.25) * 1.3).epsilon(1e-9));
  CHECK_THROWS_AS(penalty(0, 0.5, 10, 4.0, 0.0), DomainError);
  CHECK_THROWS_AS(penalty(0, 2.0, 10, 4.0, -1.0), DomainError);
}

TEST_CASE("ladder weights") {
  for (std::size_t models : {1u, 2u, 5u, 12u}) {
    auto L = truncated_ladder_weights(models);
    double total = 0.0;
    for (double l : L) total += std::exp(-l);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  auto L = truncated_ladder_weights(5);
  CHECK(L[0] == doctest::Approx(std::log(2.0)));
  CHECK(L[3] == doctest::Approx(4.0 * std::log(2.0)));
  CHECK(L[4] == doctest::Approx(4.0 * std::log(2.0)));
}

TEST_CASE("penalized supremum") {
  DensityMember truth(FamilySpec::uniform_scale(), {1.4});
  auto data = sample_dataset(truth, ContaminationSpec{}, 40, 14);
  ModelCollection coll;
  coll.add_with_penalty(scale_net({1.0, 1.3, 1.6}), WeightVector::uniform(3), std::log(2.0), 2.0);
  coll.add_with_penalty(scale_net({1.2, 1.45, 2.5}), WeightVector{{0.2, 0.3, 0.5}}, std::log(2.0), 5.5);
  auto members = union_members(coll);
  DensityMatrix dm(members, data);
  auto all = penalized_sup_psi_all(dm, coll);
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t j = 0; j < 3; ++j) {
      double brute = -1e300;
      for (std::size_t mp = 0; mp < 2; ++mp) {
        for (std::size_t k = 0; k < 3; ++k) {
          brute = std::max(brute, naive_psi(Net(members), data, 3 * m + j, 3 * mp + k) - coll[mp].pen);
        }
      }
      CHECK(penalized_sup_psi(dm, coll, m, j) == doctest::Approx(brute).epsilon(1e-13));
      CHECK(all[3 * m + j] == doctest::Approx(brute).epsilon(1e-13));
    }
  }

  // A huge penalty on model 1 leaves the within-model-0 supremum minus pen(0).
  ModelCollection dominated;
  dominated.add_with_penalty(scale_net({1.0, 1.3, 1.6}), WeightVector::uniform(3), std::log(2.0), 2.0);
  dominated.add_with_penalty(scale_net({1.2, 1.45, 2.5}), WeightVector::uniform(3), std::log(2.0), 1e9);
  DensityMatrix dm0(scale_net({1.0, 1.3, 1.6}), data);
  auto dom = penalized_sup_psi_all(DensityMatrix(union_members(dominated), data), dominated);
  for (std::size_t j = 0; j < 3; ++j) CHECK(dom[j] == doctest::Approx(sup_psi(dm0, j) - 2.0).epsilon(1e-13));

  ModelCollection alone;
  alone.add_with_penalty(scale_net({1.0, 1.3, 1.6}), WeightVector::uniform(3), 0.0, 0.0);
  auto solo = penalized_sup_psi_all(DensityMatrix(union_members(alone), data), alone);
  for (std::size_t j = 0; j < 3; ++j) CHECK(solo[j] == sup_psi(dm0, j));
}

TEST_CASE("model selection posterior") {
  DensityMember truth(FamilySpec::uniform_scale(), {1.4});
  auto data = sample_dataset(truth, ContaminationSpec{0.05, UniformBox{{3.0}, {3.5}}}, 70, 15);
  auto net = scale_net(linspace(0.8, 3.6, 30));
  auto prior = WeightVector::normalized(linspace(1.0, 2.0, 30));

  ModelCollection one;
  one.add(net, prior, 0.0, 2.0, data.size());
  auto ms = model_selection_posterior(data, one, 4.0, 2);
  auto rho = rho_posterior(data, net, prior, 4.0, 3);
  CHECK(ms.posterior.weights.weights == rho.weights.weights);
  CHECK(ms.posterior.log_unnormalized == rho.log_unnormalized);
  CHECK(ms.model_mass.size() == 1);
  CHECK(ms.model_mass[0] == doctest::Approx(1.0));

  ModelCollection twins;
  twins.add(net, prior, std::log(2.0), 2.0, data.size());
  twins.add(net, prior, std::log(2.0), 2.0, data.size());
  auto tw = model_selection_posterior(data, twins);
  CHECK(tw.model_mass[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tw.model_mass[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tw.shifted_pen[0] == 0.0);

  // Brute-force log-weights with unshifted penalties agree after normalization.
  ModelCollection pair;
  pair.add_with_penalty(scale_net({1.0, 1.4, 2.0}), WeightVector::uniform(3), std::log(2.0), 1.0);
  pair.add_with_penalty(scale_net({1.2, 1.5}), WeightVector{{0.4, 0.6}}, std::log(2.0), 3.0);
  auto members = union_members(pair);
  DensityMatrix dm(members, data);
  auto res = model_selection_posterior(dm, pair, 2.0);
  std::vector<double> logw;
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t j = 0; j < pair[m].net.size(); ++j) {
      logw.push_back(std::log(pair[m].prior[j]) - 2.0 * pair[m].pen - 2.0 * penalized_sup_psi(dm, pair, m, j));
    }
  }
  auto expected = normalize_log_weights(logw);
  for (std::size_t t = 0; t < 5; ++t) CHECK(res.posterior.weights[t] == doctest::Approx(expected[t]).epsilon(1e-11));
  CHECK(res.model_mass[0] + res.model_mass[1] == doctest::Approx(1.0));
  CHECK(res.selected() == (res.model_mass[0] >= res.model_mass[1] ? 0u : 1u));

  ModelCollection broken;
  broken.add_with_penalty(net, prior, 0.5, 0.0);
  CHECK_THROWS_AS(model_selection_posterior(data, broken), DomainError);

  std::stringstream csv;
  write_posterior_csv(csv, pair, res);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "model_id,member_id,param_0,prior_w,log_unnorm,post_w");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 5);
}
