#pragma once

// Density families, finite nets of candidate densities, priors over them and
// seeded data generation (optionally contaminated).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rho_bayes/kernel.hpp"

namespace rho_bayes {

enum class Family { uniform_scale, uniform_cube, gamma_translation, histogram, exp_family };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

/// Exponential family exp(<theta, T(x)> - A(theta)) on [0, 1] with the
/// monomial basis T_j(x) = x^j, j = 0..degree. T_0 = 1 is absorbed by A.
struct ExpFamilySpec {
  std::size_t degree = 1;
  double box = 1.0;  // every |theta_j| <= box
};

/// Shared, immutable description of a family. Members of one family hold a
/// pointer to the same spec.
struct FamilySpec {
  Family family = Family::uniform_scale;
  std::size_t cube_dim = 1;          // uniform_cube: dimension d
  std::vector<double> breakpoints;   // histogram: b_0 < ... < b_k
  double gamma_alpha = 0.5;          // gamma_translation: shape 2 alpha, 0 < alpha < 1
  ExpFamilySpec exp;                 // exp_family
  QuadratureSpec quadrature{};       // gamma / exp_family integrals (bounds set per use)

  std::size_t sample_dim() const;
  std::size_t param_count() const;
  std::size_t bins() const { return breakpoints.empty() ? 0 : breakpoints.size() - 1; }
  void validate() const;

  static std::shared_ptr<const FamilySpec> uniform_scale();
  static std::shared_ptr<const FamilySpec> uniform_cube(std::size_t dim);
  static std::shared_ptr<const FamilySpec> gamma_translation(double alpha);
  static std::shared_ptr<const FamilySpec> histogram(std::vector<double> breakpoints);
  static std::shared_ptr<const FamilySpec> exp_family(std::size_t degree, double box);
};

using FamilyPtr = std::shared_ptr<const FamilySpec>;

/// One candidate density t_theta. Parameters are validated against the
/// family's parameter set on construction; the log-normalizer of the
/// gamma and exponential families is computed once here.
class DensityMember {
 public:
  DensityMember(FamilyPtr spec, std::vector<double> params);

  Family family() const { return spec_->family; }
  const FamilySpec& spec() const { return *spec_; }
  const FamilyPtr& spec_ptr() const { return spec_; }
  std::span<const double> params() const { return params_; }
  double log_normalizer() const { return log_normalizer_; }

  double density(std::span<const double> x) const;
  double density(double x) const;

  /// Interval carrying all the mass (one-dimensional families only).
  std::pair<double, double> support() const;

 private:
  FamilyPtr spec_;
  std::vector<double> params_;
  double log_normalizer_ = 0.0;
};

double density_eval(const DensityMember& member, std::span<const double> x);

/// Log-partition A(theta) of the exponential family, by quadrature on [0, 1].
double exp_family_log_partition(const FamilySpec& spec, std::span<const double> theta);

/// Hellinger distance between two members of the same family. Closed forms
/// where available; gamma translations go through quadrature.
double hellinger_pair(const DensityMember& a, const DensityMember& b);

/// Finite ordered collection of members of one family.
class Net {
 public:
  Net() = default;
  explicit Net(std::vector<DensityMember> members);

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const DensityMember& operator[](std::size_t i) const { return members_[i]; }
  std::span<const DensityMember> members() const { return members_; }
  Family family() const { return members_.front().family(); }
  const FamilyPtr& spec_ptr() const { return members_.front().spec_ptr(); }

  /// Pairwise Hellinger distances, row-major size() x size(). Computed once
  /// on first use and shared between copies.
  const std::vector<double>& hellinger_matrix() const;
  double distance(std::size_t i, std::size_t j) const { return hellinger_matrix()[i * size() + j]; }

 private:
  struct Cache;
  std::vector<DensityMember> members_;
  std::shared_ptr<Cache> cache_;
};

/// Nonnegative weights aligned with a net, summing to one.
struct WeightVector {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
  void validate(std::size_t expected_size) const;

  static WeightVector uniform(std::size_t n);
  static WeightVector normalized(std::vector<double> unnormalized);
};

/// Uniform distribution on a box (an interval in one dimension).
struct UniformBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  double density(std::span<const double> x) const;
};

struct ContaminationSpec {
  double rate = 0.0;
  UniformBox contaminant;

  void validate(std::size_t dim) const;
};

/// i.i.d. observations stored row-major, plus how they were generated.
struct Dataset {
  std::size_t dim = 1;
  std::vector<double> values;
  std::optional<DensityMember> truth;
  ContaminationSpec contamination;
  std::uint64_t seed = 0;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> observation(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  double max_value() const;
};

/// Cartesian grid of parameters, one axis per parameter.
struct GridSpec {
  std::vector<std::vector<double>> axes;
};

std::vector<double> linspace(double lo, double hi, std::size_t count);

/// Enumerates the grid in row-major order (last axis fastest).
Net build_grid_net(const FamilyPtr& spec, const GridSpec& grid);

struct EpsNet {
  Net net;
  std::vector<std::size_t> retained;  // indices into the candidate net
};

/// Greedy cover: walk the candidates in order and keep each one not already
/// within Hellinger distance eps of a kept member.
EpsNet build_eps_net(const Net& candidates, double eps);

/// Checks |{t in net : h(s, t) <= r}| <= exp(D (r/eps)^2) for every probe s
/// and every radius r >= 2 eps where the count can change.
bool verify_metric_dimension(const Net& net, double dimension, double eps,
                             std::span<const DensityMember> probes);

/// Smallest D >= 1/2 accepted by verify_metric_dimension.
double metric_dimension_boundary(const Net& net, double eps, std::span<const DensityMember> probes);

/// Monte Carlo discretization of the Dirichlet(alpha) prior on histograms:
/// N i.i.d. draws with equal weights.
std::pair<Net, WeightVector> dirichlet_prior_net(std::span<const double> alpha,
                                                 std::vector<double> breakpoints, std::size_t atoms,
                                                 std::uint64_t seed);

/// Seed of the index-th independent stream derived from a base seed
/// (splitmix64 finalizer, so neighbouring indices give unrelated seeds).
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index);

/// n i.i.d. draws from (1 - rate) truth + rate contaminant.
Dataset sample_dataset(const DensityMember& truth, const ContaminationSpec& contamination, std::size_t n,
                       std::uint64_t seed);

/// Line-oriented text format: a header line, optional '@' family-context
/// lines, then one member per line (comma-separated parameters, optional
/// trailing weight).
void write_net(std::ostream& out, const Net& net, const WeightVector* weights = nullptr);

struct NetFile {
  Net net;
  std::optional<WeightVector> weights;
};

NetFile read_net(std::istream& in);

}  // namespace rho_bayes
