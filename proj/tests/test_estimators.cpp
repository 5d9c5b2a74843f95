#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "rho_bayes/error.hpp"
#include "rho_bayes/estimators.hpp"
#include "rho_bayes/posterior.hpp"

using namespace rho_bayes;

namespace {

Net scale_net(std::vector<double> ts) { return build_grid_net(FamilySpec::uniform_scale(), GridSpec{{std::move(ts)}}); }

// Upper 0.1% points of the chi-square distribution, df = 1..9.
constexpr double kChi2Critical[] = {10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877};

}  // namespace

TEST_CASE("draw_estimator") {
  const Net net = scale_net({1.0, 2.0, 3.0});
  const WeightVector point{{0.0, 1.0, 0.0}};
  for (std::uint64_t s = 0; s < 200; ++s) CHECK(draw_estimator(point, net, s) == 1);

  const Net two = scale_net({1.0, 2.0});
  const WeightVector half{{0.5, 0.5}};
  int ones = 0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) ones += draw_estimator(half, two, stream_seed(12, s)) == 1;
  CHECK(std::abs(ones / double(draws) - 0.5) <= 3.0 * std::sqrt(0.25 / draws));

  for (std::uint64_t s : {0ull, 1ull, 99ull}) CHECK(draw_estimator(half, two, s) == draw_estimator(half, two, s));
  CHECK_THROWS_AS(draw_estimator(half, net, 1), DomainError);
}

TEST_CASE("draw_estimator goodness of fit") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(1.0);
  for (std::size_t k : {2, 5, 10}) {
    std::vector<double> w(k);
    for (auto& v : w) v = e(rng) + 0.05;
    const WeightVector post = WeightVector::normalized(w);
    std::vector<double> ts(k);
    for (std::size_t j = 0; j < k; ++j) ts[j] = 1.0 + j;
    const Net net = scale_net(ts);
    std::vector<int> counts(k, 0);
    const int draws = 100000;
    for (int s = 0; s < draws; ++s) ++counts[draw_estimator(post, net, stream_seed(k, s))];
    double chi2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double expected = draws * post[j];
      chi2 += (counts[j] - expected) * (counts[j] - expected) / expected;
    }
    CHECK(chi2 < kChi2Critical[k - 2]);
  }
}

TEST_CASE("loss_minimizer examples") {
  const Net net = scale_net({1.0, 2.0, 4.0});
  const LossSpec sq = LossSpec::power(2.0);
  CHECK(loss_minimizer(WeightVector{{0.0, 0.0, 1.0}}, net, sq) == 2);

  // Two atoms, (0.9, 0.1): H(t1) = 0.1 w(D) < H(t2) = 0.9 w(D).
  const Net two = scale_net({1.0, 3.0});
  for (double d : {0.5, 1.0, 3.0}) CHECK(loss_minimizer(WeightVector{{0.9, 0.1}}, two, LossSpec::power(d)) == 0);
  CHECK(loss_minimizer(WeightVector{{0.1, 0.9}}, two, sq) == 1);

  // Symmetric 3-net (equal distances to the middle): the middle member.
  auto hist = FamilySpec::histogram({0.0, 1.0, 2.0});
  const Net sym({DensityMember(hist, {0.3, 0.7}), DensityMember(hist, {0.5, 0.5}), DensityMember(hist, {0.7, 0.3})});
  CHECK(sym.distance(0, 1) == doctest::Approx(sym.distance(1, 2)).epsilon(1e-14));
  CHECK(loss_minimizer(WeightVector::uniform(3), sym, sq) == 1);

  // Ties go to the lowest index.
  CHECK(loss_minimizer(WeightVector::uniform(2), two, sq) == 0);
}

TEST_CASE("loss_minimizer is an exact minimizer and scale invariant") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.5, 20.0);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ts(2 + trial % 12);
    for (auto& t : ts) t = u(rng);
    const Net net = scale_net(ts);
    std::vector<double> w(ts.size());
    for (auto& v : w) v = e(rng);
    const WeightVector post = WeightVector::normalized(w);
    const double delta = 0.5 + trial % 4;
    LossSpec loss = LossSpec::power(delta);
    const std::size_t best = loss_minimizer(post, net, loss);
    const auto H = loss_criterion(post, net, loss);
    for (double v : H) CHECK(H[best] <= v);
    // Brute force from the definition.
    for (std::size_t t = 0; t < ts.size(); ++t) {
      double direct = 0.0;
      for (std::size_t j = 0; j < ts.size(); ++j) direct += post[j] * std::pow(hellinger_pair(net[t], net[j]), delta);
      CHECK(H[t] == doctest::Approx(direct).epsilon(1e-12));
    }
    // c * w has the same minimizer.
    std::vector<std::pair<double, double>> knots, scaled_knots;
    for (int k = 0; k <= 50; ++k) {
      const double z = k / 50.0;
      knots.emplace_back(z, std::pow(z, delta) + 0.2 * z);
      scaled_knots.emplace_back(z, 7.5 * (std::pow(z, delta) + 0.2 * z));
    }
    const LossSpec base = LossSpec::from_table(knots, delta, 1.0, 1.0);
    const LossSpec scaled = LossSpec::from_table(scaled_knots, delta, 1.0, 1.0);
    CHECK(loss_minimizer(post, net, base) == loss_minimizer(post, net, scaled));
  }
  // Exact power losses: scaling the criterion by c leaves the argmin index unchanged.
  const Net net = scale_net({1.0, 1.5, 2.2, 5.0});
  const WeightVector post{{0.1, 0.4, 0.3, 0.2}};
  LossSpec a = LossSpec::power(1.5);
  const auto Ha = loss_criterion(post, net, a);
  std::vector<double> scaled(Ha.size());
  for (std::size_t i = 0; i < Ha.size(); ++i) scaled[i] = 3.0 * Ha[i];
  CHECK(std::min_element(scaled.begin(), scaled.end()) - scaled.begin() ==
        static_cast<std::ptrdiff_t>(loss_minimizer(post, net, a)));
}

TEST_CASE("validate_loss") {
  for (double d : {0.5, 1.0, 2.0, 3.0}) {
    const auto v = validate_loss(LossSpec::power(d));
    CHECK(v.ok);
    CHECK(v.violations.empty());
  }
  // With a' = 1 a too small B' breaks the upper inequality at x = 2.
  LossSpec tight = LossSpec::power(2.0);
  tight.B_prime = 0.1;
  CHECK_FALSE(validate_loss(tight).ok);
  // Raising a' to sup_x x^delta exp(-B' x^2) = (delta / (2 e B'))^(delta / 2) repairs it.
  tight.a_prime = std::pow(2.0 / (2.0 * std::exp(1.0) * 0.1), 1.0);
  CHECK(validate_loss(tight).ok);

  const LossSpec step = LossSpec::from_table({{0.0, 0.0}, {1e-9, 1.0}, {1.0, 1.0}}, 1.0, 1.0, 1.0);
  const auto sv = validate_loss(step);
  CHECK_FALSE(sv.ok);
  CHECK_FALSE(sv.violations.empty());

  const LossSpec zero = LossSpec::from_table({{0.0, 0.0}, {1.0, 0.0}}, 1.0, 1.0, 1.0);
  CHECK(validate_loss(zero).ok);

  const LossSpec offset = LossSpec::from_table({{0.0, 0.1}, {1.0, 1.0}}, 1.0, 1.0, 1.0);
  CHECK_FALSE(validate_loss(offset).ok);
  const LossSpec decreasing = LossSpec::from_table({{0.0, 0.0}, {0.5, 1.0}, {1.0, 0.5}}, 1.0, 1.0, 1.0);
  CHECK_FALSE(validate_loss(decreasing).ok);

  CHECK_THROWS_AS(LossSpec::from_table({{0.1, 0.0}, {1.0, 1.0}}, 1.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(LossSpec::power(0.0), DomainError);
}

TEST_CASE("quantile") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.1) == doctest::Approx(1.3));
  CHECK(quantile({5.0}, 0.9) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), DomainError);
}

TEST_CASE("risk_eval") {
  auto hist = FamilySpec::histogram({0.0, 1.0, 2.0, 3.0});
  const DensityMember truth(hist, {0.2, 0.3, 0.5});

  // Singleton net: the risk is h^2(s, member) exactly.
  const Net single({DensityMember(hist, {0.4, 0.3, 0.3})});
  const double h = hellinger_pair(truth, single[0]);
  RiskScenario sc{"single", truth, ContaminationSpec{}, single, WeightVector::uniform(1),
                  EstimatorKind::loss_minimizer, LossSpec::power(2.0), 4.0};
  const RiskSummary one = risk_eval(sc, 30, 5, 3);
  CHECK(one.mean_h2 == doctest::Approx(h * h).epsilon(1e-14));
  CHECK(one.std_err == doctest::Approx(0.0));
  CHECK(one.q10 == one.q90);

  // Truth in a grid net: the mean risk falls along an n ladder.
  std::vector<DensityMember> members;
  for (int a = 1; a <= 8; ++a) {
    for (int b = 1; a + b <= 9; ++b) members.emplace_back(hist, std::vector<double>{a / 10.0, b / 10.0, (10 - a - b) / 10.0});
  }
  const Net grid(members);
  for (EstimatorKind kind : {EstimatorKind::loss_minimizer, EstimatorKind::draw}) {
    RiskScenario g{"grid", truth, ContaminationSpec{}, grid, WeightVector::uniform(grid.size()), kind,
                   LossSpec::power(2.0), 4.0};
    double prev = 1.0;
    for (std::size_t n : {20, 200, 2000}) {
      const RiskSummary r = risk_eval(g, n, 60, 17, 4);
      CHECK(r.mean_h2 < prev);
      CHECK(r.q10 <= r.q50);
      CHECK(r.q50 <= r.q90);
      prev = r.mean_h2;
    }
    const RiskSummary a = risk_eval(g, 100, 30, 5, 1);
    const RiskSummary b = risk_eval(g, 100, 30, 5, 3);
    CHECK(a.h2 == b.h2);
    CHECK(a.mean_h2 == b.mean_h2);
  }

  std::ostringstream csv;
  write_risk_csv(csv, std::span<const RiskSummary>(&one, 1));
  CHECK(csv.str().rfind("scenario_id,estimator,n,mean_h2,q10,q50,q90,stderr,seed\nsingle,loss_minimizer,30,", 0) == 0);
}
