#include "rho_bayes/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "rho_bayes/error.hpp"

namespace rho_bayes {

namespace {

void require_extended_nonneg(double x, const char* what) {
  if (std::isnan(x) || x < 0.0) {
    throw DomainError(std::string(what) + ": argument must be >= 0 or +inf, got " +
                      std::to_string(x));
  }
}

constexpr double kNormalizationTol = 1e-12;

void require_probability_vector(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || std::isinf(v)) {
      throw DomainError(std::string("hellinger_discrete: ") + name + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormalizationTol) {
    throw DomainError(std::string("hellinger_discrete: ") + name + " sums to " + std::to_string(sum));
  }
}

}  // namespace

double psi(double x) {
  require_extended_nonneg(x, "psi");
  if (std::isinf(x)) return 1.0;
  return (x - 1.0) / (x + 1.0);
}

double phi(double x) {
  require_extended_nonneg(x, "phi");
  return 4.0 * psi(std::sqrt(x));
}

double psi_sqrt_ratio(double num, double den) {
  require_extended_nonneg(num, "psi_sqrt_ratio");
  require_extended_nonneg(den, "psi_sqrt_ratio");
  if (std::isinf(num) || std::isinf(den)) {
    if (std::isinf(num) && std::isinf(den)) {
      throw DomainError("psi_sqrt_ratio: inf/inf is undefined");
    }
    return std::isinf(num) ? 1.0 : -1.0;
  }
  return psi_from_roots(std::sqrt(num), std::sqrt(den));
}

HellingerAffinity hellinger_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DomainError("hellinger_discrete: length mismatch (" + std::to_string(p.size()) + " vs " +
                      std::to_string(q.size()) + ")");
  }
  require_probability_vector(p, "p");
  require_probability_vector(q, "q");
  double rho = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) rho += std::sqrt(p[i] * q[i]);
  rho = std::min(rho, 1.0);
  return {std::sqrt(std::max(0.0, 1.0 - rho)), rho};
}

void QuadratureSpec::validate() const {
  if (std::isnan(lower) || std::isnan(upper) || !(lower < upper)) {
    throw DomainError("QuadratureSpec: need lower < upper");
  }
  if (!(abs_tol > 0.0)) throw DomainError("QuadratureSpec: abs_tol must be positive");
  if (max_subdivisions == 0 || initial_panels == 0) {
    throw DomainError("QuadratureSpec: subdivision budget must be positive");
  }
}

namespace {

struct Panel {
  double a, b;
  double fa, fl, fm, fr, fb;  // values at a, a+w/4, a+w/2, a+3w/4, b
  double value;
  double error;

  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel make_panel(const F& g, double a, double b, double fa, double fm, double fb) {
  const double m = 0.5 * (a + b);
  const double fl = g(0.5 * (a + m));
  const double fr = g(0.5 * (m + b));
  const double w = b - a;
  const double coarse = w / 6.0 * (fa + 4.0 * fm + fb);
  const double fine = w / 12.0 * (fa + 4.0 * fl + 2.0 * fm + 4.0 * fr + fb);
  const double diff = fine - coarse;
  // |diff| / 15 is the textbook estimate but only holds for smooth g; at a
  // jump the true error is of the order of |diff| itself.
  return Panel{a, b, fa, fl, fm, fr, fb, fine + diff / 15.0, std::abs(diff)};
}

// Integrates g over the finite interval [lo, hi].
template <class F>
QuadratureResult integrate_finite(const F& g, double lo, double hi, const QuadratureSpec& spec) {
  std::priority_queue<Panel> heap;
  const std::size_t panels = spec.initial_panels;
  const double width = (hi - lo) / static_cast<double>(panels);
  std::vector<double> edges(panels + 1);
  std::vector<double> values(panels + 1);
  for (std::size_t i = 0; i <= panels; ++i) {
    edges[i] = (i == panels) ? hi : lo + width * static_cast<double>(i);
    values[i] = g(edges[i]);
  }
  double total_error = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    const double m = 0.5 * (edges[i] + edges[i + 1]);
    Panel p = make_panel(g, edges[i], edges[i + 1], values[i], g(m), values[i + 1]);
    total_error += p.error;
    heap.push(p);
  }

  auto recount = [&heap] {
    auto copy = heap;
    double sum = 0.0;
    while (!copy.empty()) {
      sum += copy.top().error;
      copy.pop();
    }
    return sum;
  };

  std::size_t splits = 0;
  for (;;) {
    // The running sum drifts under cancellation; confirm before stopping.
    if (total_error <= spec.abs_tol) {
      total_error = recount();
      if (total_error <= spec.abs_tol) break;
    }
    if (splits >= spec.max_subdivisions || heap.empty()) break;
    Panel worst = heap.top();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(worst.a < 0.5 * (worst.a + m)) || !(0.5 * (m + worst.b) < worst.b)) break;
    heap.pop();
    Panel left = make_panel(g, worst.a, m, worst.fa, worst.fl, worst.fm);
    Panel right = make_panel(g, m, worst.b, worst.fm, worst.fr, worst.fb);
    total_error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }

  double value = 0.0;
  double compensation = 0.0;
  double error = 0.0;
  while (!heap.empty()) {
    const Panel& p = heap.top();
    const double y = p.value - compensation;
    const double t = value + y;
    compensation = (t - value) - y;
    value = t;
    error += p.error;
    heap.pop();
  }
  if (!(error <= spec.abs_tol)) {
    throw QuadratureError("integrate: no convergence within " + std::to_string(spec.max_subdivisions) +
                              " subdivisions (error estimate " + std::to_string(error) + ")",
                          value, error);
  }
  return {value, error, splits};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, const QuadratureSpec& spec) {
  spec.validate();
  const bool lo_inf = std::isinf(spec.lower);
  const bool hi_inf = std::isinf(spec.upper);
  if (!lo_inf && !hi_inf) {
    return integrate_finite(f, spec.lower, spec.upper, spec);
  }
  // Infinite endpoints map onto open ends of the unit interval; the
  // integrand is taken to vanish there.
  if (lo_inf && hi_inf) {
    auto g = [&f](double u) {
      const double d = 1.0 - u * u;
      if (d <= 0.0) return 0.0;
      return f(u / d) * (1.0 + u * u) / (d * d);
    };
    return integrate_finite(g, -1.0, 1.0, spec);
  }
  if (hi_inf) {
    const double a = spec.lower;
    auto g = [&f, a](double u) {
      const double d = 1.0 - u;
      if (d <= 0.0) return 0.0;
      return f(a + u / d) / (d * d);
    };
    return integrate_finite(g, 0.0, 1.0, spec);
  }
  const double b = spec.upper;
  auto g = [&f, b](double u) {
    const double d = 1.0 - u;
    if (d <= 0.0) return 0.0;
    return f(b - u / d) / (d * d);
  };
  return integrate_finite(g, 0.0, 1.0, spec);
}

double hellinger_quadrature(const std::function<double(double)>& f,
                            const std::function<double(double)>& g, const QuadratureSpec& spec) {
  const double mass_f = integrate(f, spec).value;
  const double mass_g = integrate(g, spec).value;
  const double slack = 10.0 * spec.abs_tol;
  if (std::abs(mass_f - 1.0) > slack || std::abs(mass_g - 1.0) > slack) {
    throw DomainError("hellinger_quadrature: densities integrate to " + std::to_string(mass_f) + " and " +
                      std::to_string(mass_g));
  }
  auto root_product = [&f, &g](double x) {
    const double fx = f(x);
    const double gx = g(x);
    return (fx > 0.0 && gx > 0.0) ? std::sqrt(fx * gx) : 0.0;
  };
  const double rho = integrate(root_product, spec).value;
  return std::sqrt(std::max(0.0, 1.0 - std::min(rho, 1.0)));
}

Constants make_constants(double beta, std::size_t n) {
  if (!(beta > 0.0) || std::isinf(beta)) throw DomainError("make_constants: beta must be positive");
  if (n == 0) throw DomainError("make_constants: n must be >= 1");
  Constants c{};
  c.beta = beta;
  c.n = n;
  c.gamma = beta / 8.0;
  c.c0 = 1e3;
  c.c1 = 15.0;
  c.c2 = 16.0;
  c.c3 = 0.62;
  c.c4 = 3.5 * std::max(375.0, 1.0 / std::sqrt(beta));
  c.c5 = 16e-3;
  c.c6 = 7e4;
  c.c7 = 4.01;
  c.c8 = 0.365;
  c.c9 = std::max(2.0 * c.c6, 1.0 / beta) / c.c8;
  c.cbar = 1.0 + std::log(2.0) / (1.0 + std::log(static_cast<double>(n)));
  c.a0 = 4.0;
  c.a1 = 3.0 / 8.0;
  c.a2_sq = 3.0 * std::sqrt(2.0);
  return c;
}

}  // namespace rho_bayes
