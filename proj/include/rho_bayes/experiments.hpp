#pragma once

// Batch experiments behind the command line tool: a JSON configuration, one
// runner per scenario, long-format result tables and threshold checks.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rho_bayes/bounds.hpp"
#include "rho_bayes/model.hpp"

namespace rho_bayes {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Scenario { contamination, agreement, histogram, model_selection, bounds_report };

std::string_view scenario_name(Scenario s);

struct AxisSpec {
  std::vector<double> values;  // explicit values, or
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  bool log_spacing = false;

  std::vector<double> materialize() const;
};

enum class NetKind { grid, members, dirichlet, file };

struct NetConfig {
  NetKind kind = NetKind::grid;
  std::vector<AxisSpec> axes;
  // Axis values are offsets around the truth in units of 1/sqrt(n): the grid
  // then resolves the posterior at every sample size.
  bool local = false;
  std::vector<std::vector<double>> members;
  std::vector<double> dirichlet_alpha;
  std::size_t atoms = 0;
  std::uint64_t dirichlet_seed = 0;
  std::string path;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::contamination;
  std::string name;  // output stem, defaults to the scenario name
  std::uint64_t seed = 1;
  std::size_t replications = 1;
  std::vector<std::size_t> n_ladder;
  double beta = 4.0;
  FamilyPtr family;
  std::vector<double> truth;
  ContaminationSpec contamination;
  NetConfig net;
  std::vector<double> prior_weights;  // empty: uniform (or the Dirichlet net's own weights)
  std::string output;                 // CSV path, may be relative

  // contamination
  double classical_prior_a = 1.0;
  double classical_prior_alpha = 2.0;
  double ball_radius = 0.1;
  std::optional<double> outlier_center;
  double far_offset = 50.0;   // classical median counted as captured above t0 + far_offset
  double near_band = 0.2;     // rho median counted as near inside [(1 - b) t0, (1 + b) t0]

  // histogram
  bool truth_nearest_atom = false;

  // model_selection
  std::size_t max_model = 4;
  std::size_t grid_points = 5;
  double box = 2.0;
  double dimension_offset = 3.0;  // weak-VC dimension of model m is m + offset
  std::vector<std::size_t> target_models{1, 2};
  double target_mass = 0.8;
  double penalty_scale = 1.0;  // != 1: sensitivity study, penalties overridden as scale * pen

  // bounds_report
  double dimension = 0.0;  // 0: number of free parameters
  double xi = 1.0, xi_prime = 1.0;
  std::size_t eps_replications = 200;
  std::optional<double> a_bar, a_low, alpha_exponent;

  // check thresholds
  double check_rho_fraction = 0.9;
  double check_binomial_sigmas = 3.0;
  double check_slope_max = -0.35;
  double check_ratio_max = 0.45;
  double check_fraction_min = 0.8;

  std::string source;       // file name used in messages
  std::string config_text;  // raw text, hashed into the metadata
};

/// Parses and validates a configuration. Errors are ConfigError with
/// "source:line: /json/pointer: message".
ExperimentConfig parse_config(std::string_view text, std::string source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// One long-format value. replication < 0 marks a summary row.
struct ResultRow {
  std::string scenario;
  std::size_t n;
  long replication;
  std::string metric;
  double value;
};

struct ResultTable {
  std::string scenario;
  std::vector<ResultRow> rows;
  std::vector<ResultRow> summary;
  std::string report_json;  // bounds_report only
};

/// Fixed metric names; `model_mass_<m>`, `mean_model_mass_<m>`, `pen_<m>`
/// and `mean_bin_<j>` are the indexed families.
std::span<const std::string_view> metric_vocabulary();
bool is_known_metric(std::string_view name);

/// Replications run in parallel (threads = 0: all cores); results do not
/// depend on the thread count.
ResultTable run_contamination(const ExperimentConfig& cfg, unsigned threads = 0);
ResultTable run_agreement(const ExperimentConfig& cfg, unsigned threads = 0);
ResultTable run_histogram(const ExperimentConfig& cfg, unsigned threads = 0);
ResultTable run_model_selection(const ExperimentConfig& cfg, unsigned threads = 0);
ResultTable run_bounds_report(const ExperimentConfig& cfg, unsigned threads = 0);
ResultTable run_experiment(const ExperimentConfig& cfg, unsigned threads = 0);

/// Bounds rows for one sample size (what run_bounds_report tabulates).
std::vector<BoundsRow> bounds_rows(const ExperimentConfig& cfg, std::size_t n, unsigned threads = 0);

struct CheckOutcome {
  std::string name;
  bool passed;
  double observed;
  double threshold;
  std::string detail;
};

std::vector<CheckOutcome> evaluate_checks(const ExperimentConfig& cfg, const ResultTable& table);

/// Least-squares fit of log y on log x.
struct SlopeFit {
  double slope;
  double intercept;
  double std_err;
};
SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y);

/// scenario,n,replication,metric,value (summary rows leave replication empty).
void write_rows_csv(std::ostream& out, std::span<const ResultRow> rows);

/// 64-bit FNV-1a of the raw configuration text, as 16 hex digits.
std::string config_hash(std::string_view text);

void write_metadata(std::ostream& out, const ExperimentConfig& cfg, const ResultTable& table, unsigned threads);

}  // namespace rho_bayes
