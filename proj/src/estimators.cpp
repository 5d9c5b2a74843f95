#include "rho_bayes/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "numeric.hpp"
#include "parallel.hpp"
#include "rho_bayes/error.hpp"
#include "rho_bayes/posterior.hpp"

namespace rho_bayes {

namespace {

constexpr double kLossRelTol = 1e-12;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double LossSpec::operator()(double z) const {
  if (!(z >= 0.0 && z <= 1.0 + 1e-12)) throw DomainError("loss: argument must lie in [0, 1], got " + fmt(z));
  z = std::min(z, 1.0);
  if (kind == LossKind::power) return std::pow(z, delta);
  if (table.empty()) throw DomainError("loss: empty table");
  auto it = std::lower_bound(table.begin(), table.end(), z,
                             [](const std::pair<double, double>& k, double v) { return k.first < v; });
  if (it == table.end()) return table.back().second;
  if (it->first == z || it == table.begin()) return it->second;
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  return lo.second + (hi.second - lo.second) * (z - lo.first) / (hi.first - lo.first);
}

LossSpec LossSpec::power(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("power loss: delta must be > 0");
  LossSpec s;
  s.kind = LossKind::power;
  s.delta = delta;
  s.a_prime = 1.0;
  s.B_prime = delta * std::log(2.0) / 4.0;
  return s;
}

LossSpec LossSpec::from_table(std::vector<std::pair<double, double>> knots, double delta, double a_prime,
                              double B_prime) {
  if (knots.size() < 2) throw DomainError("table loss: need at least two knots");
  if (knots.front().first != 0.0 || knots.back().first != 1.0) {
    throw DomainError("table loss: knots must start at z = 0 and end at z = 1");
  }
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (!(knots[k].first > knots[k - 1].first)) throw DomainError("table loss: knots must be strictly increasing");
  }
  for (const auto& k : knots) {
    if (!(k.second >= 0.0) || !std::isfinite(k.second)) throw DomainError("table loss: values must be finite and >= 0");
  }
  LossSpec s;
  s.kind = LossKind::table;
  s.table = std::move(knots);
  s.delta = delta;
  s.a_prime = a_prime;
  s.B_prime = B_prime;
  return s;
}

LossValidation validate_loss(const LossSpec& loss, std::size_t resolution) {
  LossValidation out;
  auto report = [&](std::string why) {
    out.ok = false;
    if (out.violations.size() < 20) out.violations.push_back(std::move(why));
  };
  if (!(loss.delta > 0.0) || !(loss.a_prime > 0.0) || !(loss.B_prime > 0.0)) {
    report("delta, a' and B' must be positive");
    return out;
  }
  if (resolution < 2) resolution = 2;
  if (loss(0.0) != 0.0) report("w(0) = " + fmt(loss(0.0)) + " != 0");

  double prev = loss(0.0);
  for (std::size_t i = 1; i <= 4 * resolution; ++i) {
    const double z = static_cast<double>(i) / static_cast<double>(4 * resolution);
    const double w = loss(z);
    if (!(w >= 0.0)) report("w(" + fmt(z) + ") is negative");
    if (w < prev * (1.0 - kLossRelTol)) report("w decreases at z = " + fmt(z));
    prev = w;
  }

  for (std::size_t i = 1; i <= resolution; ++i) {
    const double z = 0.5 * static_cast<double>(i) / static_cast<double>(resolution);
    const double wz = loss(z);
    for (std::size_t j = 0; j <= resolution; ++j) {
      const double x = std::min(2.0 + (1.0 / z - 2.0) * static_cast<double>(j) / static_cast<double>(resolution),
                                1.0 / z);
      const double wxz = loss(std::min(x * z, 1.0));
      const double lower = std::pow(x, loss.delta) * wz;
      const double upper = loss.a_prime * std::exp(loss.B_prime * x * x) * wz;
      if (lower > wxz * (1.0 + kLossRelTol) + 1e-300) {
        report("x^delta w(z) > w(xz) at z = " + fmt(z) + ", x = " + fmt(x));
      }
      if (wxz > upper * (1.0 + kLossRelTol)) report("w(xz) > a' exp(B' x^2) w(z) at z = " + fmt(z) + ", x = " + fmt(x));
    }
  }
  return out;
}

std::size_t draw_estimator(const WeightVector& post, const Net& net, std::uint64_t seed) {
  post.validate(net.size());
  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * detail::accurate_sum(post.weights);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < post.size(); ++j) {
    if (post[j] <= 0.0) continue;
    acc += post[j];
    last_positive = j;
    if (u < acc) return j;
  }
  return last_positive;  // u landed on the rounding slack at the top
}

std::vector<double> loss_criterion(const WeightVector& post, const Net& net, const LossSpec& loss) {
  post.validate(net.size());
  const std::size_t m = net.size();
  const auto& h = net.hellinger_matrix();
  std::vector<double> H(m);
  std::vector<double> terms(m);
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t j = 0; j < m; ++j) terms[j] = post[j] > 0.0 ? post[j] * loss(h[t * m + j]) : 0.0;
    H[t] = detail::accurate_sum(terms);
  }
  return H;
}

std::size_t loss_minimizer(const WeightVector& post, const Net& net, const LossSpec& loss) {
  const std::vector<double> H = loss_criterion(post, net, loss);
  std::size_t best = 0;
  for (std::size_t t = 1; t < H.size(); ++t) {
    if (H[t] < H[best]) best = t;
  }
  return best;
}

std::string_view estimator_name(EstimatorKind kind) {
  return kind == EstimatorKind::draw ? "draw" : "loss_minimizer";
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

RiskSummary risk_eval(const RiskScenario& scenario, std::size_t n, std::size_t reps, std::uint64_t seed,
                      unsigned threads) {
  if (reps == 0 || n == 0) throw DomainError("risk_eval: n and reps must be >= 1");
  scenario.prior.validate(scenario.net.size());
  scenario.contamination.validate(scenario.truth.spec().sample_dim());
  std::vector<double> h_truth(scenario.net.size());
  for (std::size_t j = 0; j < h_truth.size(); ++j) h_truth[j] = hellinger_pair(scenario.truth, scenario.net[j]);

  RiskSummary out{scenario.id, scenario.estimator, n, reps, 0.0, 0.0, 0.0, 0.0, 0.0, seed, std::vector<double>(reps)};
  const unsigned workers = detail::resolve_threads(threads, reps);
  detail::parallel_for(reps, workers, [&](unsigned, std::size_t r) {
    const std::uint64_t stream = stream_seed(seed, r);
    const Dataset data = sample_dataset(scenario.truth, scenario.contamination, n, stream);
    const PosteriorResult post = rho_posterior(data, scenario.net, scenario.prior, scenario.beta);
    const std::size_t idx = scenario.estimator == EstimatorKind::draw
                                ? draw_estimator(post.weights, scenario.net, stream_seed(stream, 1))
                                : loss_minimizer(post.weights, scenario.net, scenario.loss);
    out.h2[r] = h_truth[idx] * h_truth[idx];
  });

  const double m = static_cast<double>(reps);
  out.mean_h2 = detail::accurate_sum(out.h2) / m;
  double ss = 0.0;
  for (double v : out.h2) ss += (v - out.mean_h2) * (v - out.mean_h2);
  out.std_err = reps > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
  out.q10 = quantile(out.h2, 0.1);
  out.q50 = quantile(out.h2, 0.5);
  out.q90 = quantile(out.h2, 0.9);
  return out;
}

void write_risk_csv(std::ostream& out, std::span<const RiskSummary> rows) {
  out << "scenario_id,estimator,n,mean_h2,q10,q50,q90,stderr,seed\n";
  char buf[512];
  for (const RiskSummary& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%llu\n", r.scenario_id.c_str(),
                  std::string(estimator_name(r.estimator)).c_str(), r.n, r.mean_h2, r.q10, r.q50, r.q90, r.std_err,
                  static_cast<unsigned long long>(r.seed));
    out << buf;
  }
}

}  // namespace rho_bayes
