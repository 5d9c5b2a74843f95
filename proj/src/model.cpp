#include "rho_bayes/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <string>

#include "numeric.hpp"
#include "rho_bayes/error.hpp"

namespace rho_bayes {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kSimplexFloor = 1e-12;
// Gamma(2 alpha) tail beyond this many units past the support start is far
// below any quadrature tolerance we use (e^-40 ~ 4e-18).
constexpr double kGammaTruncation = 40.0;

std::string to_str(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DomainError(std::string(what) + ": dimension " + std::to_string(got) + ", expected " +
                      std::to_string(want));
  }
}

double exp_family_exponent(std::span<const double> theta, double x) {
  // Horner on sum_j theta_j x^j.
  double acc = 0.0;
  for (std::size_t j = theta.size(); j-- > 0;) acc = acc * x + theta[j];
  return acc;
}

double gamma_log_density(double alpha, double log_c, double y) {
  if (y < 0.0) return -kInfinity;
  const double shape_m1 = 2.0 * alpha - 1.0;
  if (y == 0.0) {
    if (shape_m1 < 0.0) return kInfinity;
    if (shape_m1 > 0.0) return -kInfinity;
    return log_c;
  }
  return log_c + shape_m1 * std::log(y) - y;
}

QuadratureSpec unit_interval(const FamilySpec& spec) {
  QuadratureSpec q = spec.quadrature;
  q.lower = 0.0;
  q.upper = 1.0;
  return q;
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::uniform_scale: return "uniform_scale";
    case Family::uniform_cube: return "uniform_cube";
    case Family::gamma_translation: return "gamma_translation";
    case Family::histogram: return "histogram";
    case Family::exp_family: return "exp_family";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::uniform_scale, Family::uniform_cube, Family::gamma_translation, Family::histogram,
                   Family::exp_family}) {
    if (family_name(f) == name) return f;
  }
  throw DomainError("unknown family '" + std::string(name) + "'");
}

std::size_t FamilySpec::sample_dim() const { return family == Family::uniform_cube ? cube_dim : 1; }

std::size_t FamilySpec::param_count() const {
  switch (family) {
    case Family::uniform_scale: return 1;
    case Family::uniform_cube: return cube_dim;
    case Family::gamma_translation: return 1;
    case Family::histogram: return bins();
    case Family::exp_family: return exp.degree + 1;
  }
  return 0;
}

void FamilySpec::validate() const {
  switch (family) {
    case Family::uniform_scale: break;
    case Family::uniform_cube:
      if (cube_dim == 0) throw DomainError("uniform_cube: dimension must be >= 1");
      break;
    case Family::gamma_translation:
      if (!(gamma_alpha > 0.0 && gamma_alpha < 1.0)) {
        throw DomainError("gamma_translation: alpha must lie in (0, 1), got " + to_str(gamma_alpha));
      }
      break;
    case Family::histogram:
      if (breakpoints.size() < 3) throw DomainError("histogram: need at least two bins");
      for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (!(breakpoints[i] < breakpoints[i + 1]) || !std::isfinite(breakpoints[i + 1]) ||
            !std::isfinite(breakpoints[i])) {
          throw DomainError("histogram: breakpoints must be finite and strictly increasing");
        }
      }
      break;
    case Family::exp_family:
      if (exp.degree == 0) throw DomainError("exp_family: degree must be >= 1");
      if (!(exp.box > 0.0) || !std::isfinite(exp.box)) throw DomainError("exp_family: box bound must be positive");
      break;
  }
}

std::shared_ptr<const FamilySpec> FamilySpec::uniform_scale() {
  auto s = std::make_shared<FamilySpec>();
  s->family = Family::uniform_scale;
  return s;
}

std::shared_ptr<const FamilySpec> FamilySpec::uniform_cube(std::size_t dim) {
  auto s = std::make_shared<FamilySpec>();
  s->family = Family::uniform_cube;
  s->cube_dim = dim;
  s->validate();
  return s;
}

std::shared_ptr<const FamilySpec> FamilySpec::gamma_translation(double alpha) {
  auto s = std::make_shared<FamilySpec>();
  s->family = Family::gamma_translation;
  s->gamma_alpha = alpha;
  s->validate();
  return s;
}

std::shared_ptr<const FamilySpec> FamilySpec::histogram(std::vector<double> breakpoints) {
  auto s = std::make_shared<FamilySpec>();
  s->family = Family::histogram;
  s->breakpoints = std::move(breakpoints);
  s->validate();
  return s;
}

std::shared_ptr<const FamilySpec> FamilySpec::exp_family(std::size_t degree, double box) {
  auto s = std::make_shared<FamilySpec>();
  s->family = Family::exp_family;
  s->exp.degree = degree;
  s->exp.box = box;
  s->validate();
  return s;
}

double exp_family_log_partition(const FamilySpec& spec, std::span<const double> theta) {
  // Factor out the maximum of the exponent on a coarse grid so the
  // integrand stays O(1) whatever the box size.
  double shift = -kInfinity;
  for (int i = 0; i <= 64; ++i) shift = std::max(shift, exp_family_exponent(theta, i / 64.0));
  auto integrand = [theta, shift](double x) { return std::exp(exp_family_exponent(theta, x) - shift); };
  const QuadratureResult r = integrate(integrand, unit_interval(spec));
  return shift + std::log(r.value);
}

DensityMember::DensityMember(FamilyPtr spec, std::vector<double> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  if (!spec_) throw DomainError("DensityMember: null family spec");
  const FamilySpec& s = *spec_;
  require_dim(params_.size(), s.param_count(), "DensityMember parameters");
  for (double p : params_) {
    if (!std::isfinite(p)) throw DomainError("DensityMember: non-finite parameter");
  }
  switch (s.family) {
    case Family::uniform_scale:
      if (!(params_[0] > 0.0)) throw DomainError("uniform_scale: t must be > 0, got " + to_str(params_[0]));
      break;
    case Family::uniform_cube: {
      double l1 = 0.0;
      for (double p : params_) l1 += std::abs(p);
      if (l1 > 0.5 + kSimplexTol) throw DomainError("uniform_cube: |theta|_1 must be <= 1/2, got " + to_str(l1));
      break;
    }
    case Family::gamma_translation:
      if (params_[0] < -1.0 || params_[0] > 1.0) {
        throw DomainError("gamma_translation: theta must lie in [-1, 1], got " + to_str(params_[0]));
      }
      log_normalizer_ = -std::lgamma(2.0 * s.gamma_alpha);
      break;
    case Family::histogram: {
      double sum = 0.0;
      for (double p : params_) {
        if (!(p > 0.0)) throw DomainError("histogram: weights must be strictly positive");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kSimplexTol) throw DomainError("histogram: weights sum to " + to_str(sum));
      break;
    }
    case Family::exp_family:
      for (double p : params_) {
        if (std::abs(p) > s.exp.box * (1.0 + kSimplexTol)) {
          throw DomainError("exp_family: |theta_j| exceeds box bound " + to_str(s.exp.box));
        }
      }
      log_normalizer_ = exp_family_log_partition(s, params_);
      break;
  }
}

double DensityMember::density(std::span<const double> x) const {
  const FamilySpec& s = *spec_;
  require_dim(x.size(), s.sample_dim(), "density_eval");
  switch (s.family) {
    case Family::uniform_scale: {
      const double t = params_[0];
      return (x[0] >= 0.0 && x[0] <= t) ? 1.0 / t : 0.0;
    }
    case Family::uniform_cube:
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] < params_[j] || x[j] > params_[j] + 1.0) return 0.0;
      }
      return 1.0;
    case Family::gamma_translation:
      return std::exp(gamma_log_density(s.gamma_alpha, log_normalizer_, x[0] - params_[0]));
    case Family::histogram: {
      const auto& b = s.breakpoints;
      const double v = x[0];
      if (v < b.front() || v > b.back()) return 0.0;
      // Bins are [b_j, b_{j+1}), the last one closed.
      auto it = std::upper_bound(b.begin(), b.end(), v);
      std::size_t j = static_cast<std::size_t>(it - b.begin());
      j = std::min(j, b.size() - 1) - 1;
      return params_[j] / (b[j + 1] - b[j]);
    }
    case Family::exp_family:
      if (x[0] < 0.0 || x[0] > 1.0) return 0.0;
      return std::exp(exp_family_exponent(params_, x[0]) - log_normalizer_);
  }
  return 0.0;
}

double DensityMember::density(double x) const { return density(std::span<const double>(&x, 1)); }

std::pair<double, double> DensityMember::support() const {
  const FamilySpec& s = *spec_;
  switch (s.family) {
    case Family::uniform_scale: return {0.0, params_[0]};
    case Family::uniform_cube:
      if (s.cube_dim != 1) throw DomainError("support: uniform_cube with d > 1 is not an interval");
      return {params_[0], params_[0] + 1.0};
    case Family::gamma_translation: return {params_[0], kInfinity};
    case Family::histogram: return {s.breakpoints.front(), s.breakpoints.back()};
    case Family::exp_family: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

double density_eval(const DensityMember& member, std::span<const double> x) { return member.density(x); }

namespace {

double from_affinity(double rho) { return std::sqrt(std::max(0.0, 1.0 - std::min(rho, 1.0))); }

double gamma_hellinger(const DensityMember& a, const DensityMember& b) {
  const double ta = a.params()[0];
  const double tb = b.params()[0];
  if (ta == tb) return 0.0;
  const double early = std::min(ta, tb);
  const double late = std::max(ta, tb);
  const double alpha = a.spec().gamma_alpha;
  const double log_c = a.log_normalizer();
  // sqrt(f_early f_late) vanishes left of `late`. With x = late + u^2 the
  // singular factor y^(2 alpha - 1) of f_late becomes u^(4 alpha - 2), and
  // dx = 2u du tames it to a bounded integrand.
  auto integrand = [=](double u) {
    const double u2 = u * u;
    const double log_early = gamma_log_density(alpha, log_c, late - early + u2);
    const double log_late_regular = log_c - u2;  // f_late without u^(4 alpha - 2)
    return 2.0 * std::pow(u, 2.0 * alpha) * std::exp(0.5 * (log_early + log_late_regular));
  };
  QuadratureSpec q = a.spec().quadrature;
  q.lower = 0.0;
  q.upper = std::sqrt(kGammaTruncation);
  return from_affinity(integrate(integrand, q).value);
}

}  // namespace

double hellinger_pair(const DensityMember& a, const DensityMember& b) {
  if (a.family() != b.family()) {
    throw DomainError(std::string("hellinger_pair: family mismatch (") + std::string(family_name(a.family())) +
                      " vs " + std::string(family_name(b.family())) + ")");
  }
  if (a.params().size() != b.params().size()) throw DomainError("hellinger_pair: parameter length mismatch");
  const auto pa = a.params();
  const auto pb = b.params();
  switch (a.family()) {
    case Family::uniform_scale: {
      const double lo = std::min(pa[0], pb[0]);
      const double hi = std::max(pa[0], pb[0]);
      return from_affinity(std::sqrt(lo / hi));
    }
    case Family::uniform_cube: {
      double rho = 1.0;
      for (std::size_t j = 0; j < pa.size(); ++j) rho *= std::max(0.0, 1.0 - std::abs(pa[j] - pb[j]));
      return from_affinity(rho);
    }
    case Family::gamma_translation:
      if (a.spec().gamma_alpha != b.spec().gamma_alpha) throw DomainError("hellinger_pair: gamma shape mismatch");
      return gamma_hellinger(a, b);
    case Family::histogram: {
      if (a.spec().breakpoints != b.spec().breakpoints) {
        throw DomainError("hellinger_pair: histogram partitions differ");
      }
      double h2 = 0.0;
      for (std::size_t j = 0; j < pa.size(); ++j) {
        const double d = std::sqrt(pa[j]) - std::sqrt(pb[j]);
        h2 += d * d;
      }
      return std::sqrt(std::min(1.0, 0.5 * h2));
    }
    case Family::exp_family: {
      std::vector<double> mid(pa.size());
      for (std::size_t j = 0; j < pa.size(); ++j) mid[j] = 0.5 * (pa[j] + pb[j]);
      const double a_mid = exp_family_log_partition(a.spec(), mid);
      return from_affinity(std::exp(a_mid - 0.5 * (a.log_normalizer() + b.log_normalizer())));
    }
  }
  return 0.0;
}

struct Net::Cache {
  std::once_flag once;
  std::vector<double> matrix;
};

Net::Net(std::vector<DensityMember> members) : members_(std::move(members)), cache_(std::make_shared<Cache>()) {
  if (members_.empty()) throw DomainError("Net: must contain at least one member");
  const Family f = members_.front().family();
  for (const auto& m : members_) {
    if (m.family() != f) throw DomainError("Net: members must share a family");
  }
}

const std::vector<double>& Net::hellinger_matrix() const {
  if (!cache_) throw DomainError("Net: empty net has no distance matrix");
  std::call_once(cache_->once, [this] {
    const std::size_t n = members_.size();
    auto& m = cache_->matrix;
    m.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double h = hellinger_pair(members_[i], members_[j]);
        m[i * n + j] = h;
        m[j * n + i] = h;
      }
    }
  });
  return cache_->matrix;
}

void WeightVector::validate(std::size_t expected_size) const {
  if (weights.size() != expected_size) {
    throw DomainError("WeightVector: length " + std::to_string(weights.size()) + ", expected " +
                      std::to_string(expected_size));
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("WeightVector: negative or non-finite weight");
  }
  const double sum = detail::accurate_sum(weights);
  if (std::abs(sum - 1.0) > kSimplexTol) throw DomainError("WeightVector: weights sum to " + to_str(sum));
}

WeightVector WeightVector::uniform(std::size_t n) {
  if (n == 0) throw DomainError("WeightVector: empty");
  return WeightVector{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

WeightVector WeightVector::normalized(std::vector<double> unnormalized) {
  for (double w : unnormalized) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("WeightVector: negative or non-finite weight");
  }
  const double sum = detail::accurate_sum(unnormalized);
  if (!(sum > 0.0)) throw DomainError("WeightVector: total mass is zero");
  for (double& w : unnormalized) w /= sum;
  return WeightVector{std::move(unnormalized)};
}

double UniformBox::density(std::span<const double> x) const {
  require_dim(x.size(), dim(), "UniformBox");
  double vol = 1.0;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (x[j] < lower[j] || x[j] > upper[j]) return 0.0;
    vol *= upper[j] - lower[j];
  }
  return 1.0 / vol;
}

void ContaminationSpec::validate(std::size_t dim) const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("ContaminationSpec: rate must lie in [0, 1]");
  if (rate == 0.0 && contaminant.dim() == 0) return;
  require_dim(contaminant.dim(), dim, "ContaminationSpec contaminant");
  if (contaminant.upper.size() != contaminant.lower.size()) throw DomainError("UniformBox: bound length mismatch");
  for (std::size_t j = 0; j < dim; ++j) {
    if (!(contaminant.lower[j] < contaminant.upper[j])) throw DomainError("UniformBox: need lower < upper");
  }
}

double Dataset::max_value() const {
  if (values.empty()) throw DomainError("Dataset: empty");
  return *std::max_element(values.begin(), values.end());
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) throw DomainError("linspace: count must be >= 1");
  if (count == 1) return {lo};
  std::vector<double> v(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) v[i] = lo + step * static_cast<double>(i);
  v.back() = hi;
  return v;
}

Net build_grid_net(const FamilyPtr& spec, const GridSpec& grid) {
  if (!spec) throw DomainError("build_grid_net: null family spec");
  require_dim(grid.axes.size(), spec->param_count(), "build_grid_net axes");
  std::size_t total = 1;
  for (const auto& axis : grid.axes) {
    if (axis.empty()) throw DomainError("build_grid_net: empty grid axis");
    total *= axis.size();
  }
  std::vector<DensityMember> members;
  members.reserve(total);
  std::vector<std::size_t> idx(grid.axes.size(), 0);
  std::vector<double> params(grid.axes.size());
  for (std::size_t count = 0; count < total; ++count) {
    for (std::size_t a = 0; a < idx.size(); ++a) params[a] = grid.axes[a][idx[a]];
    members.emplace_back(spec, params);
    for (std::size_t a = idx.size(); a-- > 0;) {
      if (++idx[a] < grid.axes[a].size()) break;
      idx[a] = 0;
    }
  }
  return Net(std::move(members));
}

EpsNet build_eps_net(const Net& candidates, double eps) {
  if (!(eps >= 0.0)) throw DomainError("build_eps_net: eps must be >= 0");
  const std::size_t n = candidates.size();
  std::vector<bool> covered(n, false);
  EpsNet out;
  std::vector<DensityMember> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (covered[i]) continue;
    out.retained.push_back(i);
    kept.push_back(candidates[i]);
    for (std::size_t j = i; j < n; ++j) {
      if (!covered[j] && candidates.distance(i, j) <= eps) covered[j] = true;
    }
  }
  out.net = Net(std::move(kept));
  return out;
}

namespace {

// For each probe, the sorted distances to every net member.
std::vector<std::vector<double>> probe_distances(const Net& net, std::span<const DensityMember> probes) {
  std::vector<std::vector<double>> out;
  out.reserve(probes.size());
  for (const auto& s : probes) {
    std::vector<double> d(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) d[i] = hellinger_pair(s, net[i]);
    std::sort(d.begin(), d.end());
    out.push_back(std::move(d));
  }
  return out;
}

// Smallest D for which every count check passes, given sorted distances.
double required_dimension(const std::vector<double>& sorted, double eps) {
  double need = 0.5;
  const double r0 = 2.0 * eps;
  // The binding radii are r = 2 eps and each distance >= 2 eps: the count is
  // a step function and exp(D (r/eps)^2) increases, so checking the left end
  // of every constancy interval suffices.
  auto consider = [&](double r, std::size_t count) {
    if (count <= 1) return;
    need = std::max(need, std::log(static_cast<double>(count)) / ((r / eps) * (r / eps)));
  };
  const std::size_t at_r0 =
      static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), r0) - sorted.begin());
  consider(r0, at_r0);
  for (std::size_t i = at_r0; i < sorted.size(); ++i) {
    std::size_t count =
        static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), sorted[i]) - sorted.begin());
    consider(sorted[i], count);
  }
  return need;
}

}  // namespace

bool verify_metric_dimension(const Net& net, double dimension, double eps, std::span<const DensityMember> probes) {
  if (!(dimension >= 0.5)) throw DomainError("verify_metric_dimension: D must be >= 1/2");
  if (!(eps > 0.0)) throw DomainError("verify_metric_dimension: eps must be > 0");
  for (const auto& sorted : probe_distances(net, probes)) {
    const double r0 = 2.0 * eps;
    auto check = [&](double r) {
      const auto count =
          static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), r) - sorted.begin());
      return count <= std::exp(dimension * (r / eps) * (r / eps));
    };
    if (!check(r0)) return false;
    for (double r : sorted) {
      if (r >= r0 && !check(r)) return false;
    }
  }
  return true;
}

double metric_dimension_boundary(const Net& net, double eps, std::span<const DensityMember> probes) {
  if (!(eps > 0.0)) throw DomainError("metric_dimension_boundary: eps must be > 0");
  double need = 0.5;
  for (const auto& sorted : probe_distances(net, probes)) need = std::max(need, required_dimension(sorted, eps));
  return need;
}

std::pair<Net, WeightVector> dirichlet_prior_net(std::span<const double> alpha, std::vector<double> breakpoints,
                                                 std::size_t atoms, std::uint64_t seed) {
  if (alpha.size() < 2) throw DomainError("dirichlet_prior_net: need k >= 2");
  if (atoms == 0) throw DomainError("dirichlet_prior_net: need at least one atom");
  for (double a : alpha) {
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("dirichlet_prior_net: alpha must lie in (0, 1]");
  }
  require_dim(breakpoints.size(), alpha.size() + 1, "dirichlet_prior_net breakpoints");
  auto spec = FamilySpec::histogram(std::move(breakpoints));
  std::mt19937_64 rng(seed);
  std::vector<std::gamma_distribution<double>> gammas;
  for (double a : alpha) gammas.emplace_back(a, 1.0);
  std::vector<DensityMember> members;
  members.reserve(atoms);
  std::vector<double> theta(alpha.size());
  for (std::size_t i = 0; i < atoms; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      theta[j] = gammas[j](rng);
      sum += theta[j];
    }
    if (!(sum > 0.0)) {
      // Every coordinate underflowed; fall back to the barycenter.
      std::fill(theta.begin(), theta.end(), 1.0);
      sum = static_cast<double>(theta.size());
    }
    bool clamped = false;
    for (double& t : theta) {
      t /= sum;
      if (t < kSimplexFloor) {
        t = kSimplexFloor;
        clamped = true;
      }
    }
    if (clamped) {
      double s = 0.0;
      for (double t : theta) s += t;
      for (double& t : theta) t /= s;
    }
    members.emplace_back(spec, theta);
  }
  return {Net(std::move(members)), WeightVector::uniform(atoms)};
}

namespace {

// Draws one observation from the member into out.
void draw_member(const DensityMember& m, std::mt19937_64& rng, std::span<double> out) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const FamilySpec& s = m.spec();
  const auto p = m.params();
  switch (s.family) {
    case Family::uniform_scale: out[0] = p[0] * unif(rng); return;
    case Family::uniform_cube:
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = p[j] + unif(rng);
      return;
    case Family::gamma_translation: {
      std::gamma_distribution<double> g(2.0 * s.gamma_alpha, 1.0);
      out[0] = p[0] + g(rng);
      return;
    }
    case Family::histogram: {
      double u = unif(rng);
      std::size_t j = 0;
      while (j + 1 < p.size() && u >= p[j]) u -= p[j++];
      const auto& b = s.breakpoints;
      out[0] = b[j] + (b[j + 1] - b[j]) * unif(rng);
      return;
    }
    case Family::exp_family: {
      // Rejection from U(0,1): the exponent is at most sum |theta_j|.
      double bound = 0.0;
      for (double t : p) bound += std::abs(t);
      const double envelope = std::exp(bound - m.log_normalizer());
      for (;;) {
        const double x = unif(rng);
        if (unif(rng) * envelope <= m.density(x)) {
          out[0] = x;
          return;
        }
      }
    }
  }
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset sample_dataset(const DensityMember& truth, const ContaminationSpec& contamination, std::size_t n,
                       std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_dataset: n must be >= 1");
  const std::size_t dim = truth.spec().sample_dim();
  contamination.validate(dim);
  Dataset data;
  data.dim = dim;
  data.values.resize(n * dim);
  data.truth = truth;
  data.contamination = contamination;
  data.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> out(data.values.data() + i * dim, dim);
    const bool contaminated = contamination.rate > 0.0 && unif(rng) < contamination.rate;
    if (contaminated) {
      const auto& box = contamination.contaminant;
      for (std::size_t j = 0; j < dim; ++j) out[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * unif(rng);
    } else {
      draw_member(truth, rng, out);
    }
  }
  return data;
}

}  // namespace rho_bayes
