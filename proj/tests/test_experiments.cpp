#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rho_bayes/error.hpp"
#include "rho_bayes/experiments.hpp"
#include "rho_bayes/kernel.hpp"

using namespace rho_bayes;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kContamination = R"({
  "scenario": "contamination",
  "seed": 4,
  "replications": 12,
  "n": [60],
  "family": {"name": "uniform_scale"},
  "truth": [10],
  "contamination": {"rate": 0, "lower": [110], "upper": [110.01]},
  "net": {"grid": [{"lo": 5, "hi": 200, "count": 300, "spacing": "log"}]}
})";

void check_vocabulary(const ResultTable& t) {
  for (const auto& r : t.rows) CHECK_MESSAGE(is_known_metric(r.metric), r.metric);
  for (const auto& r : t.summary) CHECK_MESSAGE(is_known_metric(r.metric), r.metric);
}

double summary(const ResultTable& t, const std::string& metric, std::size_t n) {
  for (const auto& r : t.summary) {
    if (r.metric == metric && r.n == n) return r.value;
  }
  FAIL("missing summary " << metric);
  return 0.0;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(kContamination, "c.json");
  CHECK(c.scenario == Scenario::contamination);
  CHECK(c.name == "contamination");
  CHECK(c.replications == 12);
  CHECK(c.n_ladder == std::vector<std::size_t>{60});
  CHECK(c.net.axes.at(0).materialize().size() == 300);
  CHECK(c.net.axes[0].materialize().front() == 5.0);
  CHECK(c.net.axes[0].materialize().back() == 200.0);
  CHECK(c.family->family == Family::uniform_scale);
}

TEST_CASE("config errors carry line and pointer") {
  std::string text = kContamination;
  text.replace(text.find("\"seed\""), 6, "\"sede\"");
  CHECK(error_of(text) == "cfg.json:3: /sede: unknown key 'sede'");

  text = kContamination;
  text.replace(text.find("[60]"), 4, "[60, 60]");
  CHECK(error_of(text) == "cfg.json:5: /n/1: the n ladder must be strictly increasing");

  text = kContamination;
  text.replace(text.find("\"count\": 300"), 12, "\"count\": \"x\"");
  CHECK(error_of(text) == "cfg.json:9: /net/grid/0/count: expected a nonnegative integer");

  text = kContamination;
  text.replace(text.find("[10]"), 4, "[-1]");
  CHECK(error_of(text).rfind("cfg.json:7: /truth: ", 0) == 0);

  text = kContamination;
  text.replace(text.find("\"uniform_scale\""), 15, "\"histogram\", \"breakpoints\": [0, 1, 2]");
  CHECK(error_of(text).rfind("cfg.json:6: /family/name: contamination needs", 0) == 0);

  // Syntax errors point at line and column.
  text = kContamination;
  text.replace(text.find("\"n\": [60],"), 10, "\"n\": [60]");
  CHECK(error_of(text).rfind("cfg.json:6:", 0) == 0);

  CHECK(error_of(R"({"scenario": "nope", "n": [1]})").rfind("cfg.json:1: /scenario: unknown scenario", 0) == 0);
  CHECK(error_of("{\n  \"scenario\": \"contamination\"\n}") == "cfg.json:1: /: missing required key 'n'");

  const std::string agreement = R"({
    "scenario": "agreement", "n": [10, 20], "beta": 3,
    "family": {"name": "histogram", "breakpoints": [0, 1, 2]}, "truth": [0.5, 0.5],
    "net": {"members": [[0.5, 0.5], [0.3, 0.7]]}
  })";
  CHECK(error_of(agreement) == "cfg.json:2: /beta: agreement is defined for beta = 4");

  // Comments are allowed and do not shift line numbers.
  CHECK(error_of("// comment\n/* two\nlines */ {\"scenario\": 1}") == "cfg.json:3: /scenario: expected a string");
}

TEST_CASE("contamination without contaminant") {
  const ExperimentConfig c = parse_config(kContamination);
  const ResultTable t = run_contamination(c, 2);
  check_vocabulary(t);
  CHECK(t.rows.size() == 12 * 8);
  // Grid cell at t0 for 300 log-spaced points on [5, 200].
  const double cell = 10.0 * (std::pow(200.0 / 5.0, 1.0 / 299.0) - 1.0);
  for (const auto& r : t.rows) {
    if (r.metric == "classical_median" || r.metric == "rho_median" || r.metric == "classical_median_closed_form") {
      CHECK(std::abs(r.value - 10.0) <= cell + 10.0 * 10.0 / 60.0);
    }
    if (r.metric == "classical_median" || r.metric == "classical_median_closed_form") {
      CHECK(r.value >= 9.0);  // at least X_(n), which is close to t0
    }
    if (r.metric == "observations_above_truth") CHECK(r.value == 0.0);
  }
  // Exactly R rows per metric.
  std::size_t count = 0;
  for (const auto& r : t.rows) count += r.metric == "rho_median";
  CHECK(count == 12);
  CHECK(summary(t, "expected_frac_classical_far", 60) == 0.0);
}

TEST_CASE("contamination captures the classical posterior") {
  std::string text = kContamination;
  text.replace(text.find("\"rate\": 0"), 9, "\"rate\": 0.5");
  const ResultTable t = run_contamination(parse_config(text), 1);
  CHECK(summary(t, "frac_classical_far", 60) == 1.0);
  CHECK(summary(t, "expected_frac_classical_far", 60) == doctest::Approx(1.0 - std::pow(0.5, 60)));
  for (const auto& r : t.rows) {
    if (r.metric == "classical_mass_truth") CHECK(r.value == 0.0);
  }
}

TEST_CASE("runs are bit-reproducible and thread independent") {
  const ExperimentConfig c = parse_config(kContamination);
  const ResultTable a = run_contamination(c, 1);
  const ResultTable b = run_contamination(c, 3);
  std::ostringstream sa, sb;
  write_rows_csv(sa, a.rows);
  write_rows_csv(sb, b.rows);
  CHECK(sa.str() == sb.str());
  ExperimentConfig d = c;
  d.seed = 5;
  std::ostringstream sd;
  write_rows_csv(sd, run_contamination(d, 1).rows);
  CHECK(sd.str() != sa.str());
}

TEST_CASE("agreement") {
  const std::string text = R"({
    "scenario": "agreement", "seed": 2, "replications": 15, "n": [40, 160, 640],
    "family": {"name": "exp_family", "degree": 2, "box": 6}, "truth": [0, 0.5, -0.5],
    "net": {"grid": [{"values": [0]}, {"lo": -5, "hi": 5, "count": 9}, {"lo": -5, "hi": 5, "count": 9}],
            "local": true}
  })";
  const ExperimentConfig c = parse_config(text);
  const ResultTable t = run_agreement(c, 2);
  check_vocabulary(t);
  CHECK(t.rows.size() == 3 * 15);
  for (const auto& r : t.rows) {
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
  CHECK(summary(t, "h2_self", 0) == 0.0);
  CHECK(std::isfinite(summary(t, "slope", 0)));
  CHECK(summary(t, "slope_std_err", 0) >= 0.0);
  CHECK(summary(t, "slope", 0) < 0.0);
  const ResultTable again = run_agreement(c, 1);
  CHECK(summary(again, "slope", 0) == summary(t, "slope", 0));
}

TEST_CASE("histogram") {
  // k = 2, symmetric truth and a symmetric net.
  const std::string text = R"({
    "scenario": "histogram", "seed": 8, "replications": 40, "n": [50, 800],
    "family": {"name": "histogram", "breakpoints": [0, 1, 2]}, "truth": [0.5, 0.5],
    "net": {"members": [[0.1, 0.9], [0.3, 0.7], [0.5, 0.5], [0.7, 0.3], [0.9, 0.1]]},
    "ball_radius": 0.01
  })";
  const ExperimentConfig c = parse_config(text);
  const ResultTable t = run_histogram(c, 2);
  check_vocabulary(t);
  CHECK(t.rows.size() == 2 * 40 * 4);
  std::vector<double> bin0;
  for (const auto& r : t.rows) {
    if (r.metric == "mean_bin_0" && r.n == 50) bin0.push_back(r.value);
  }
  double m = 0.0, ss = 0.0;
  for (double v : bin0) m += v / bin0.size();
  for (double v : bin0) ss += (v - m) * (v - m);
  CHECK(std::abs(m - 0.5) <= 3.0 * std::sqrt(ss / (bin0.size() - 1) / bin0.size()) + 1e-12);
  // Truth in the net: the ball around it takes almost all the mass at n = 800.
  for (const auto& r : t.rows) {
    if (r.metric == "ball_mass_truth" && r.n == 800) CHECK(r.value > 0.99);
  }
  CHECK(summary(t, "risk_ratio", 0) < 1.0);
}

TEST_CASE("model selection") {
  const std::string base = R"({
    "scenario": "model_selection", "seed": 1, "replications": 4, "n": [400],
    "family": {"name": "exp_family", "degree": 2, "box": 2}, "truth": TRUTH,
    "ladder": {"max_model": 2, "grid_points": 3, "box": 1.5, "target_models": [1] SCALE}
  })";
  auto make = [&](const std::string& truth, const std::string& scale) {
    std::string s = base;
    s.replace(s.find("TRUTH"), 5, truth);
    s.replace(s.find("SCALE"), 5, scale);
    return parse_config(s);
  };
  // Truth in model 0: model 0 dominates.
  const ResultTable t0 = run_model_selection(make("[0, 0, 0]", ""), 2);
  check_vocabulary(t0);
  CHECK(summary(t0, "mean_model_mass_0", 400) > 0.99);
  CHECK(summary(t0, "ladder_weight_sum", 400) == 1.0);
  CHECK(t0.rows.size() == 4 * (3 + 2));
  CHECK(summary(t0, "pen_1", 400) > summary(t0, "pen_0", 400));

  // With the penalties scaled down the data decide: truth in model 1.
  const ResultTable t1 = run_model_selection(make("[0, 1.5, 0]", ", \"penalty_scale\": 1e-9"), 2);
  CHECK(summary(t1, "frac_target_mass_ok", 400) == 1.0);
  CHECK(summary(t1, "penalty_scale", 400) == 1e-9);
  CHECK(evaluate_checks(make("[0, 1.5, 0]", ", \"penalty_scale\": 1e-9"), t1).at(0).passed);
  CHECK_FALSE(evaluate_checks(make("[0, 1.5, 0]", ""), run_model_selection(make("[0, 1.5, 0]", ""), 2)).at(0).passed);
}

TEST_CASE("bounds report") {
  SUBCASE("singleton net") {
    const std::string text = R"({
      "scenario": "bounds_report", "n": [50],
      "family": {"name": "uniform_scale"}, "truth": [3],
      "net": {"members": [[3]]}, "bounds": {"xi": 1, "xi_prime": 2, "eps_replications": 10}
    })";
    const ResultTable t = run_bounds_report(parse_config(text));
    check_vocabulary(t);
    const Constants k = make_constants(4.0, 50);
    CHECK(summary(t, "eps_mc", 50) == 1.0);
    CHECK(summary(t, "eta_exact_truth", 50) == 0.0);
    CHECK(summary(t, "rbar", 50) == doctest::Approx(k.c3 * 1.0 + k.c4 * std::sqrt(1.0 + 2.0 + 2.61)));
    const auto doc = nlohmann::json::parse(t.report_json);
    CHECK(doc["reports"][0]["n"] == 50);
    for (const auto& row : doc["reports"][0]["rows"]) {
      CHECK(row.contains("quantity"));
      CHECK(row.contains("formula_value"));
      CHECK(row.contains("mc_estimate"));
      CHECK(row.contains("std_err"));
      CHECK(row.contains("vacuous_flag"));
    }
  }
  SUBCASE("dirichlet k = 2") {
    const std::string text = R"({
      "scenario": "bounds_report", "seed": 3, "n": [100],
      "family": {"name": "histogram", "breakpoints": [0, 0.5, 1]}, "truth": [0.4, 0.6],
      "net": {"dirichlet": {"alpha": [1, 1], "atoms": 200}}, "bounds": {"eps_replications": 20}
    })";
    const ResultTable t = run_bounds_report(parse_config(text));
    CHECK(summary(t, "eta_dirichlet_bound", 100) == doctest::Approx(4.777).epsilon(1e-3));
    CHECK(summary(t, "eta_exact_max", 100) <= summary(t, "eta_dirichlet_bound", 100));
    CHECK(summary(t, "eps_mc", 100) <= summary(t, "eps_finite_bound", 100));
  }
}

TEST_CASE("metric vocabulary") {
  CHECK(is_known_metric("rho_median"));
  CHECK(is_known_metric("model_mass_3"));
  CHECK(is_known_metric("mean_bin_12"));
  CHECK_FALSE(is_known_metric("model_mass_"));
  CHECK_FALSE(is_known_metric("model_mass_x"));
  CHECK_FALSE(is_known_metric("rho_mean"));
  for (std::string_view m : metric_vocabulary()) CHECK(is_known_metric(m));
}

TEST_CASE("slope, csv and hash") {
  const std::vector<double> x{50, 100, 200, 400};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  const SlopeFit f = loglog_slope(x, y);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-13));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-13));
  CHECK(f.std_err == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);

  std::ostringstream csv;
  const std::vector<ResultRow> rows = {{"s", 10, 0, "rho_median", 0.1}, {"s", 10, -1, "slope", -0.5}};
  write_rows_csv(csv, rows);
  CHECK(csv.str() == "scenario,n,replication,metric,value\ns,10,0,rho_median,0.10000000000000001\ns,10,,slope,-0.5\n");

  CHECK(config_hash("") == "cbf29ce484222325");
  CHECK(config_hash("a") == "af63dc4c8601ec8c");
  const ExperimentConfig c = parse_config(kContamination, "c.json");
  std::ostringstream meta;
  write_metadata(meta, c, ResultTable{"contamination", {}, {}, {}}, 2);
  const auto m = nlohmann::json::parse(meta.str());
  CHECK(m["config_hash"] == "fnv1a64:" + config_hash(kContamination));
  CHECK(m["seed"] == 4);
  CHECK(m["version"] == std::string(kVersion));
}
