#include "rho_bayes/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "rho_bayes/error.hpp"
#include "rho_bayes/estimators.hpp"
#include "rho_bayes/posterior.hpp"

namespace rho_bayes {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Source positions. nlohmann/json does not keep them, so a second pass over
// the (already validated) text maps every JSON pointer to the line where its
// value starts.

class LineIndex {
 public:
  explicit LineIndex(std::string_view text) : text_(text) {
    skip_ws();
    if (pos_ < text_.size()) value("");
  }

  int line(std::string pointer) const {
    for (;;) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      if (pointer.empty()) return 1;
      pointer.resize(pointer.rfind('/'));
    }
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        pos_ += 2;
        while (pos_ + 1 < text_.size() && !(text_[pos_] == '*' && text_[pos_ + 1] == '/')) {
          if (text_[pos_] == '\n') ++line_;
          ++pos_;
        }
        pos_ += 2;
      } else {
        break;
      }
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
        out += text_[pos_ + 1];
        pos_ += 2;
      } else {
        out += text_[pos_++];
      }
    }
    ++pos_;
    return out;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& pointer) {
    lines_.emplace(pointer, line_);
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == '}') break;
        const std::string key = string_token();
        skip_ws();
        ++pos_;  // ':'
        skip_ws();
        value(pointer + "/" + escape(key));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      for (std::size_t i = 0;; ++i) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == ']') break;
        value(pointer + "/" + std::to_string(i));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && std::string_view(",]} \t\r\n/").find(text_[pos_]) == std::string_view::npos) ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::unordered_map<std::string, int> lines_;
};

// Typed access to the parsed document with positioned errors.
class Reader {
 public:
  Reader(const json& root, const LineIndex& lines, std::string source)
      : root_(root), lines_(lines), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    throw ConfigError(source_ + ":" + std::to_string(lines_.line(pointer)) + ": " +
                      (pointer.empty() ? std::string("/") : pointer) + ": " + message);
  }

  const json* find(const std::string& pointer) const {
    const json::json_pointer p(pointer);
    return root_.contains(p) ? &root_.at(p) : nullptr;
  }

  const json& at(const std::string& pointer) const {
    const json* v = find(pointer);
    if (!v) fail(parent(pointer), "missing required key '" + pointer.substr(pointer.rfind('/') + 1) + "'");
    return *v;
  }

  double number(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_number()) fail(pointer, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(pointer, "expected a finite number");
    return d;
  }

  double number_or(const std::string& pointer, double fallback) const {
    return find(pointer) ? number(pointer) : fallback;
  }

  std::optional<double> optional_number(const std::string& pointer) const {
    if (!find(pointer)) return std::nullopt;
    return number(pointer);
  }

  std::uint64_t count(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(pointer, "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::uint64_t count_or(const std::string& pointer, std::uint64_t fallback) const {
    return find(pointer) ? count(pointer) : fallback;
  }

  std::string string(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_string()) fail(pointer, "expected a string");
    return v.get<std::string>();
  }

  bool boolean_or(const std::string& pointer, bool fallback) const {
    const json* v = find(pointer);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(pointer, "expected true or false");
    return v->get<bool>();
  }

  std::vector<double> numbers(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_array()) fail(pointer, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(pointer + "/" + std::to_string(i)));
    return out;
  }

  void only_keys(const std::string& pointer, std::initializer_list<std::string_view> allowed) const {
    const json& v = at(pointer);
    if (!v.is_object()) fail(pointer, "expected an object");
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
        fail(pointer + "/" + it.key(), "unknown key '" + it.key() + "'");
      }
    }
  }

  static std::string parent(const std::string& pointer) { return pointer.substr(0, pointer.rfind('/')); }

 private:
  const json& root_;
  const LineIndex& lines_;
  std::string source_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Scenario parse_scenario(const Reader& r) {
  const std::string s = r.string("/scenario");
  for (Scenario sc : {Scenario::contamination, Scenario::agreement, Scenario::histogram, Scenario::model_selection,
                      Scenario::bounds_report}) {
    if (scenario_name(sc) == s) return sc;
  }
  r.fail("/scenario", "unknown scenario '" + s +
                          "' (expected contamination, agreement, histogram, model_selection or bounds_report)");
}

FamilyPtr parse_family(const Reader& r) {
  r.only_keys("/family", {"name", "dim", "breakpoints", "alpha", "degree", "box"});
  const std::string name = r.string("/family/name");
  try {
    if (name == "uniform_scale") return FamilySpec::uniform_scale();
    if (name == "uniform_cube") return FamilySpec::uniform_cube(r.count("/family/dim"));
    if (name == "gamma_translation") return FamilySpec::gamma_translation(r.number("/family/alpha"));
    if (name == "histogram") return FamilySpec::histogram(r.numbers("/family/breakpoints"));
    if (name == "exp_family") return FamilySpec::exp_family(r.count("/family/degree"), r.number("/family/box"));
  } catch (const DomainError& e) {
    r.fail("/family", e.what());
  }
  r.fail("/family/name", "unknown family '" + name + "'");
}

AxisSpec parse_axis(const Reader& r, const std::string& p) {
  r.only_keys(p, {"values", "lo", "hi", "count", "spacing"});
  AxisSpec a;
  if (r.find(p + "/values")) {
    a.values = r.numbers(p + "/values");
    if (a.values.empty()) r.fail(p + "/values", "axis has no values");
    return a;
  }
  a.lo = r.number(p + "/lo");
  a.hi = r.number(p + "/hi");
  a.count = r.count(p + "/count");
  if (a.count == 0) r.fail(p + "/count", "count must be >= 1");
  if (a.count > 1 && !(a.hi > a.lo)) r.fail(p + "/hi", "hi must exceed lo");
  if (r.find(p + "/spacing")) {
    const std::string s = r.string(p + "/spacing");
    if (s == "log") a.log_spacing = true;
    else if (s != "linear") r.fail(p + "/spacing", "spacing must be 'linear' or 'log'");
  }
  if (a.log_spacing && !(a.lo > 0.0)) r.fail(p + "/lo", "log spacing needs lo > 0");
  return a;
}

NetConfig parse_net(const Reader& r, std::uint64_t seed) {
  r.only_keys("/net", {"grid", "local", "members", "dirichlet", "file"});
  NetConfig n;
  int kinds = 0;
  if (r.find("/net/grid")) {
    ++kinds;
    n.kind = NetKind::grid;
    const json& g = r.at("/net/grid");
    if (!g.is_array() || g.empty()) r.fail("/net/grid", "expected a nonempty array of axes");
    for (std::size_t i = 0; i < g.size(); ++i) n.axes.push_back(parse_axis(r, "/net/grid/" + std::to_string(i)));
    n.local = r.boolean_or("/net/local", false);
  } else if (r.find("/net/local")) {
    r.fail("/net/local", "'local' only applies to grid nets");
  }
  if (r.find("/net/members")) {
    ++kinds;
    n.kind = NetKind::members;
    const json& m = r.at("/net/members");
    if (!m.is_array() || m.empty()) r.fail("/net/members", "expected a nonempty array of parameter vectors");
    for (std::size_t i = 0; i < m.size(); ++i) n.members.push_back(r.numbers("/net/members/" + std::to_string(i)));
  }
  if (r.find("/net/dirichlet")) {
    ++kinds;
    n.kind = NetKind::dirichlet;
    r.only_keys("/net/dirichlet", {"alpha", "atoms", "seed"});
    n.dirichlet_alpha = r.numbers("/net/dirichlet/alpha");
    n.atoms = r.count("/net/dirichlet/atoms");
    n.dirichlet_seed = r.count_or("/net/dirichlet/seed", stream_seed(seed, 0xd1));
  }
  if (r.find("/net/file")) {
    ++kinds;
    n.kind = NetKind::file;
    n.path = r.string("/net/file");
  }
  if (kinds != 1) r.fail("/net", "give exactly one of grid, members, dirichlet or file");
  return n;
}

std::size_t free_parameters(const FamilySpec& f) {
  switch (f.family) {
    case Family::uniform_scale: return 1;
    case Family::uniform_cube: return f.cube_dim;
    case Family::gamma_translation: return 1;
    case Family::histogram: return f.bins() - 1;
    case Family::exp_family: return f.exp.degree;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Nets

struct Prepared {
  Net net;
  WeightVector prior;
  bool dirichlet = false;
};

Prepared prepare(const ExperimentConfig& cfg, std::size_t n) {
  const NetConfig& nc = cfg.net;
  Prepared p;
  switch (nc.kind) {
    case NetKind::grid: {
      GridSpec g;
      for (std::size_t i = 0; i < nc.axes.size(); ++i) {
        std::vector<double> v = nc.axes[i].materialize();
        if (nc.local) {
          for (double& x : v) x = cfg.truth.at(i) + x / std::sqrt(static_cast<double>(n));
        }
        g.axes.push_back(std::move(v));
      }
      p.net = build_grid_net(cfg.family, g);
      break;
    }
    case NetKind::members: {
      std::vector<DensityMember> m;
      for (const auto& params : nc.members) m.emplace_back(cfg.family, params);
      p.net = Net(std::move(m));
      break;
    }
    case NetKind::dirichlet: {
      auto [net, w] = dirichlet_prior_net(nc.dirichlet_alpha, cfg.family->breakpoints, nc.atoms, nc.dirichlet_seed);
      p.net = std::move(net);
      p.prior = std::move(w);
      p.dirichlet = true;
      break;
    }
    case NetKind::file: {
      std::ifstream in(nc.path);
      if (!in) throw ConfigError("cannot open net file '" + nc.path + "'");
      NetFile f = read_net(in);
      p.net = std::move(f.net);
      if (f.weights) p.prior = std::move(*f.weights);
      break;
    }
  }
  if (!cfg.prior_weights.empty()) {
    p.prior = WeightVector::normalized(cfg.prior_weights);
  } else if (p.prior.size() == 0) {
    p.prior = WeightVector::uniform(p.net.size());
  }
  p.prior.validate(p.net.size());
  return p;
}

// Nets that do not depend on n are built once.
class NetCache {
 public:
  explicit NetCache(const ExperimentConfig& cfg) : cfg_(cfg) {}
  const Prepared& get(std::size_t n) {
    const std::size_t key = cfg_.net.local ? n : 0;
    if (!current_ || key != key_) {
      current_ = prepare(cfg_, n);
      key_ = key;
    }
    return *current_;
  }

 private:
  const ExperimentConfig& cfg_;
  std::optional<Prepared> current_;
  std::size_t key_ = 0;
};

std::size_t nearest_member(const Net& net, const DensityMember& s) {
  std::size_t best = 0;
  double best_h = kInfinity;
  for (std::size_t j = 0; j < net.size(); ++j) {
    const double h = hellinger_pair(s, net[j]);
    if (h < best_h) {
      best_h = h;
      best = j;
    }
  }
  return best;
}

// The truth on the net's family; optionally snapped to the nearest member.
DensityMember truth_for(const ExperimentConfig& cfg, const Net& net) {
  DensityMember s(net.spec_ptr(), cfg.truth);
  if (cfg.truth_nearest_atom) return net[nearest_member(net, s)];
  return s;
}

std::uint64_t data_seed(const ExperimentConfig& cfg, std::size_t n, std::size_t r) {
  return stream_seed(stream_seed(cfg.seed, n), r);
}

// Runs f(r) -> metric values for every replication and appends the rows in
// (replication, metric) order.
template <class F>
std::vector<std::vector<double>> replicate(const ExperimentConfig& cfg, unsigned threads, F f) {
  std::vector<std::vector<double>> out(cfg.replications);
  const unsigned workers = detail::resolve_threads(threads, cfg.replications);
  detail::parallel_for(cfg.replications, workers, [&](unsigned, std::size_t r) { out[r] = f(r); });
  return out;
}

void append_rows(ResultTable& t, std::size_t n, const std::vector<std::string>& metrics,
                 const std::vector<std::vector<double>>& values) {
  for (std::size_t r = 0; r < values.size(); ++r) {
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      t.rows.push_back({t.scenario, n, static_cast<long>(r), metrics[k], values[r][k]});
    }
  }
}

void add_summary(ResultTable& t, std::size_t n, std::string metric, double value) {
  t.summary.push_back({t.scenario, n, -1, std::move(metric), value});
}

std::vector<double> column(const std::vector<std::vector<double>>& values, std::size_t k) {
  std::vector<double> c;
  c.reserve(values.size());
  for (const auto& v : values) c.push_back(v[k]);
  return c;
}

double mean_of(const std::vector<double>& v) { return detail::accurate_sum(v) / static_cast<double>(v.size()); }

// Posterior median of the scale parameter of a uniform_scale net.
double scale_median(const WeightVector& post, const Net& net) {
  std::vector<std::size_t> order(net.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return net[a].params()[0] < net[b].params()[0]; });
  double acc = 0.0;
  for (std::size_t j : order) {
    acc += post[j];
    if (acc >= 0.5) return net[j].params()[0];
  }
  return net[order.back()].params()[0];
}

// Median of the closed-form posterior, by bisection on its CDF.
double closed_form_median(const Dataset& data, double a, double alpha) {
  double lo = std::max(a, data.max_value());
  double hi = 2.0 * lo;
  while (uniform_scale_posterior_cdf(data, a, alpha, hi) < 0.5) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (uniform_scale_posterior_cdf(data, a, alpha, mid) < 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const ResultRow* find_summary(const ResultTable& t, std::string_view metric, std::size_t n) {
  for (const auto& row : t.summary) {
    if (row.metric == metric && row.n == n) return &row;
  }
  return nullptr;
}

double summary_value(const ResultTable& t, std::string_view metric, std::size_t n) {
  const ResultRow* row = find_summary(t, metric, n);
  return row ? row->value : kNaN;
}

void require_scenario(const ExperimentConfig& cfg, Scenario s) {
  if (cfg.scenario != s) {
    throw ConfigError(cfg.source + ": scenario is '" + std::string(scenario_name(cfg.scenario)) + "', expected '" +
                      std::string(scenario_name(s)) + "'");
  }
}

constexpr std::string_view kMetrics[] = {
    // contamination
    "classical_median", "classical_median_closed_form", "rho_median", "classical_mass_truth", "rho_mass_truth",
    "classical_mass_outlier", "rho_mass_outlier", "observations_above_truth", "frac_classical_far",
    "expected_frac_classical_far", "frac_rho_near", "median_rho_median", "median_classical_median",
    // agreement
    "h2_classical_rho", "median_h2_classical_rho", "h2_self", "slope", "slope_std_err", "net_size",
    // histogram
    "posterior_mean_hellinger", "ball_mass_truth", "median_posterior_mean_hellinger", "risk_ratio",
    "truth_net_distance",
    // model_selection
    "selected_model", "target_mass", "frac_target_mass_ok", "ladder_weight_sum", "penalty_scale",
    // bounds_report
    "eps_mc", "eps_mc_upper", "eps_finite_bound", "eps_vc_bound", "eta_exact_truth", "eta_exact_max",
    "eta_dirichlet_bound", "eta_param_bound", "eta_bar_sq", "rbar", "rbar_vc", "pen", "eps_bar"};

constexpr std::string_view kIndexedMetrics[] = {"model_mass_", "mean_model_mass_", "pen_", "mean_bin_"};

}  // namespace

// ---------------------------------------------------------------------------

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::contamination: return "contamination";
    case Scenario::agreement: return "agreement";
    case Scenario::histogram: return "histogram";
    case Scenario::model_selection: return "model_selection";
    case Scenario::bounds_report: return "bounds_report";
  }
  return "?";
}

std::vector<double> AxisSpec::materialize() const {
  if (!values.empty()) return values;
  if (!log_spacing) return linspace(lo, hi, count);
  std::vector<double> v = linspace(std::log(lo), std::log(hi), count);
  for (double& x : v) x = std::exp(x);
  if (count > 1) {
    v.front() = lo;
    v.back() = hi;
  }
  return v;
}

ExperimentConfig parse_config(std::string_view text, std::string source) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (auto p = what.find(": "); p != std::string::npos) what = what.substr(p + 2);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
  const LineIndex lines(text);
  const Reader r(root, lines, source);
  if (!root.is_object()) r.fail("", "expected a JSON object");
  r.only_keys("", {"scenario", "name", "seed", "replications", "n", "beta", "family", "truth", "contamination", "net",
                   "prior", "output", "classical_prior", "ball_radius", "outlier_center", "far_offset", "near_band",
                   "truth_nearest_atom", "ladder", "bounds", "check"});

  ExperimentConfig c;
  c.source = source;
  c.config_text = std::string(text);
  c.scenario = parse_scenario(r);
  c.name = r.find("/name") ? r.string("/name") : std::string(scenario_name(c.scenario));
  c.seed = r.count_or("/seed", 1);
  c.replications = r.count_or("/replications", 1);
  if (c.replications == 0) r.fail("/replications", "replications must be >= 1");
  c.beta = r.number_or("/beta", kDefaultBeta);
  if (!(c.beta > 0.0)) r.fail("/beta", "beta must be > 0");

  const json& ns = r.at("/n");
  if (!ns.is_array() || ns.empty()) r.fail("/n", "expected a nonempty array of sample sizes");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const std::string p = "/n/" + std::to_string(i);
    const std::size_t n = r.count(p);
    if (n == 0) r.fail(p, "sample sizes must be >= 1");
    if (!c.n_ladder.empty() && n <= c.n_ladder.back()) r.fail(p, "the n ladder must be strictly increasing");
    c.n_ladder.push_back(n);
  }

  c.family = parse_family(r);
  if (r.find("/truth")) c.truth = r.numbers("/truth");
  if (r.find("/output")) c.output = r.string("/output");

  if (r.find("/contamination")) {
    r.only_keys("/contamination", {"rate", "lower", "upper"});
    c.contamination.rate = r.number("/contamination/rate");
    c.contamination.contaminant.lower = r.numbers("/contamination/lower");
    c.contamination.contaminant.upper = r.numbers("/contamination/upper");
    try {
      c.contamination.validate(c.family->sample_dim());
    } catch (const DomainError& e) {
      r.fail("/contamination", e.what());
    }
  }

  if (r.find("/prior")) {
    const json& p = r.at("/prior");
    if (p.is_string()) {
      if (p.get<std::string>() != "uniform") r.fail("/prior", "prior must be \"uniform\" or {\"weights\": [...]}");
    } else {
      r.only_keys("/prior", {"weights"});
      c.prior_weights = r.numbers("/prior/weights");
    }
  }

  if (r.find("/classical_prior")) {
    r.only_keys("/classical_prior", {"a", "alpha"});
    c.classical_prior_a = r.number_or("/classical_prior/a", c.classical_prior_a);
    c.classical_prior_alpha = r.number_or("/classical_prior/alpha", c.classical_prior_alpha);
    if (!(c.classical_prior_a > 0.0)) r.fail("/classical_prior/a", "a must be > 0");
    if (!(c.classical_prior_alpha > 1.0)) r.fail("/classical_prior/alpha", "alpha must be > 1");
  }
  c.ball_radius = r.number_or("/ball_radius", c.ball_radius);
  if (!(c.ball_radius >= 0.0 && c.ball_radius <= 1.0)) r.fail("/ball_radius", "Hellinger radius must lie in [0, 1]");
  c.outlier_center = r.optional_number("/outlier_center");
  c.far_offset = r.number_or("/far_offset", c.far_offset);
  c.near_band = r.number_or("/near_band", c.near_band);
  c.truth_nearest_atom = r.boolean_or("/truth_nearest_atom", false);

  if (r.find("/ladder")) {
    r.only_keys("/ladder", {"max_model", "grid_points", "box", "dimension_offset", "target_models", "target_mass",
                            "penalty_scale"});
    c.penalty_scale = r.number_or("/ladder/penalty_scale", c.penalty_scale);
    if (!(c.penalty_scale >= 0.0)) r.fail("/ladder/penalty_scale", "penalty_scale must be >= 0");
    c.max_model = r.count_or("/ladder/max_model", c.max_model);
    c.grid_points = r.count_or("/ladder/grid_points", c.grid_points);
    c.box = r.number_or("/ladder/box", c.box);
    c.dimension_offset = r.number_or("/ladder/dimension_offset", c.dimension_offset);
    c.target_mass = r.number_or("/ladder/target_mass", c.target_mass);
    if (r.find("/ladder/target_models")) {
      c.target_models.clear();
      const json& t = r.at("/ladder/target_models");
      if (!t.is_array()) r.fail("/ladder/target_models", "expected an array of model indices");
      for (std::size_t i = 0; i < t.size(); ++i) {
        c.target_models.push_back(r.count("/ladder/target_models/" + std::to_string(i)));
      }
    }
  }

  if (r.find("/bounds")) {
    r.only_keys("/bounds", {"dimension", "xi", "xi_prime", "eps_replications", "a_bar", "a_low", "alpha_exponent"});
    c.dimension = r.number_or("/bounds/dimension", 0.0);
    c.xi = r.number_or("/bounds/xi", c.xi);
    c.xi_prime = r.number_or("/bounds/xi_prime", c.xi_prime);
    c.eps_replications = r.count_or("/bounds/eps_replications", c.eps_replications);
    c.a_bar = r.optional_number("/bounds/a_bar");
    c.a_low = r.optional_number("/bounds/a_low");
    c.alpha_exponent = r.optional_number("/bounds/alpha_exponent");
    if (c.dimension != 0.0 && !(c.dimension >= 1.0)) r.fail("/bounds/dimension", "dimension must be >= 1");
    if (c.eps_replications == 0) r.fail("/bounds/eps_replications", "need at least one replication");
  }

  if (r.find("/check")) {
    r.only_keys("/check", {"rho_fraction", "binomial_sigmas", "slope_max", "ratio_max", "fraction_min"});
    c.check_rho_fraction = r.number_or("/check/rho_fraction", c.check_rho_fraction);
    c.check_binomial_sigmas = r.number_or("/check/binomial_sigmas", c.check_binomial_sigmas);
    c.check_slope_max = r.number_or("/check/slope_max", c.check_slope_max);
    c.check_ratio_max = r.number_or("/check/ratio_max", c.check_ratio_max);
    c.check_fraction_min = r.number_or("/check/fraction_min", c.check_fraction_min);
  }

  // Scenario preconditions.
  const Family fam = c.family->family;
  const bool needs_net = c.scenario != Scenario::model_selection;
  if (c.truth.empty()) r.fail("", "missing required key 'truth'");
  switch (c.scenario) {
    case Scenario::contamination:
      if (fam != Family::uniform_scale) r.fail("/family/name", "contamination needs the uniform_scale family");
      break;
    case Scenario::agreement:
      if (fam != Family::exp_family && fam != Family::histogram) {
        r.fail("/family/name", "agreement needs a regular family (exp_family or histogram)");
      }
      if (c.beta != 4.0) r.fail(r.find("/beta") ? "/beta" : "", "agreement is defined for beta = 4");
      break;
    case Scenario::histogram:
      if (fam != Family::histogram) r.fail("/family/name", "histogram needs the histogram family");
      break;
    case Scenario::model_selection:
      if (fam != Family::exp_family) r.fail("/family/name", "model_selection needs the exp_family family");
      if (c.max_model > c.family->exp.degree) {
        r.fail("/ladder/max_model", "max_model exceeds the family degree " + std::to_string(c.family->exp.degree));
      }
      if (c.grid_points < 2) r.fail("/ladder/grid_points", "need at least two grid points");
      if (!(c.box > 0.0 && c.box <= c.family->exp.box)) r.fail("/ladder/box", "box must lie in (0, family box]");
      if (!(c.dimension_offset >= 1.0)) r.fail("/ladder/dimension_offset", "dimension offset must be >= 1");
      for (std::size_t m : c.target_models) {
        if (m > c.max_model) r.fail("/ladder/target_models", "target model " + std::to_string(m) + " out of range");
      }
      break;
    case Scenario::bounds_report: break;
  }
  if (c.truth_nearest_atom && fam != Family::histogram && c.scenario != Scenario::bounds_report) {
    r.fail("/truth_nearest_atom", "only meaningful for histogram nets");
  }

  try {
    DensityMember(c.family, c.truth);
  } catch (const DomainError& e) {
    r.fail("/truth", e.what());
  }

  if (needs_net) {
    if (!r.find("/net")) r.fail("", "missing required key 'net'");
    c.net = parse_net(r, c.seed);
    if (c.net.kind == NetKind::dirichlet && fam != Family::histogram) {
      r.fail("/net/dirichlet", "a Dirichlet prior net needs the histogram family");
    }
    if (c.net.kind == NetKind::dirichlet && c.net.dirichlet_alpha.size() != c.family->bins()) {
      r.fail("/net/dirichlet/alpha", "need one alpha per histogram bin");
    }
    if (c.net.kind == NetKind::grid && c.net.axes.size() != c.family->param_count()) {
      r.fail("/net/grid", "need " + std::to_string(c.family->param_count()) + " axes, got " +
                              std::to_string(c.net.axes.size()));
    }
    // Build once per distinct net to surface member errors here.
    const std::vector<std::size_t> probe = c.net.local ? c.n_ladder : std::vector<std::size_t>{c.n_ladder.front()};
    for (std::size_t n : probe) {
      try {
        prepare(c, n);
      } catch (const DomainError& e) {
        r.fail(c.prior_weights.empty() ? "/net" : "/prior", e.what());
      }
    }
  } else if (r.find("/net")) {
    r.fail("/net", "model_selection builds its own nested ladder; remove 'net'");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::span<const std::string_view> metric_vocabulary() { return kMetrics; }

bool is_known_metric(std::string_view name) {
  if (std::find(std::begin(kMetrics), std::end(kMetrics), name) != std::end(kMetrics)) return true;
  for (std::string_view prefix : kIndexedMetrics) {
    if (name.size() > prefix.size() && name.substr(0, prefix.size()) == prefix) {
      const std::string_view idx = name.substr(prefix.size());
      if (std::all_of(idx.begin(), idx.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Runners

ResultTable run_contamination(const ExperimentConfig& cfg, unsigned threads) {
  require_scenario(cfg, Scenario::contamination);
  ResultTable t{"contamination", {}, {}, {}};
  NetCache nets(cfg);
  const double t0 = cfg.truth.at(0);
  const double outlier = cfg.outlier_center.value_or(
      cfg.contamination.contaminant.lower.empty() ? t0 + 100.0 : cfg.contamination.contaminant.lower[0]);
  const std::vector<std::string> metrics = {"classical_median",       "classical_median_closed_form",
                                            "rho_median",             "classical_mass_truth",
                                            "rho_mass_truth",         "classical_mass_outlier",
                                            "rho_mass_outlier",       "observations_above_truth"};
  for (std::size_t n : cfg.n_ladder) {
    const Prepared& p = nets.get(n);
    const DensityMember truth(p.net.spec_ptr(), cfg.truth);
    const DensityMember far(p.net.spec_ptr(), {outlier});
    const auto values = replicate(cfg, threads, [&](std::size_t r) {
      const Dataset data = sample_dataset(truth, cfg.contamination, n, data_seed(cfg, n, r));
      const DensityMatrix dm(p.net, data);
      const PosteriorResult cl = classical_posterior(dm, p.prior, 1.0);
      const PosteriorResult rho = rho_posterior(dm, p.prior, cfg.beta);
      double above = 0.0;
      for (double x : data.values) above += x > t0;
      return std::vector<double>{scale_median(cl.weights, p.net),
                                 closed_form_median(data, cfg.classical_prior_a, cfg.classical_prior_alpha),
                                 scale_median(rho.weights, p.net),
                                 posterior_ball_mass(cl.weights, p.net, truth, cfg.ball_radius),
                                 posterior_ball_mass(rho.weights, p.net, truth, cfg.ball_radius),
                                 posterior_ball_mass(cl.weights, p.net, far, cfg.ball_radius),
                                 posterior_ball_mass(rho.weights, p.net, far, cfg.ball_radius),
                                 above};
    });
    append_rows(t, n, metrics, values);

    const auto cl_med = column(values, 0);
    const auto rho_med = column(values, 2);
    double far_count = 0.0, near_count = 0.0;
    for (double m : cl_med) far_count += m > t0 + cfg.far_offset;
    for (double m : rho_med) near_count += m >= (1.0 - cfg.near_band) * t0 && m <= (1.0 + cfg.near_band) * t0;
    const double reps = static_cast<double>(cfg.replications);
    add_summary(t, n, "frac_classical_far", far_count / reps);
    add_summary(t, n, "expected_frac_classical_far", 1.0 - std::pow(1.0 - cfg.contamination.rate, static_cast<double>(n)));
    add_summary(t, n, "frac_rho_near", near_count / reps);
    add_summary(t, n, "median_classical_median", quantile(cl_med, 0.5));
    add_summary(t, n, "median_rho_median", quantile(rho_med, 0.5));
    add_summary(t, n, "net_size", static_cast<double>(p.net.size()));
  }
  return t;
}

ResultTable run_agreement(const ExperimentConfig& cfg, unsigned threads) {
  require_scenario(cfg, Scenario::agreement);
  if (cfg.beta != 4.0) throw ConfigError(cfg.source + ": agreement is defined for beta = 4");
  ResultTable t{"agreement", {}, {}, {}};
  NetCache nets(cfg);
  std::vector<double> ns, medians;
  double self = 0.0;
  for (std::size_t n : cfg.n_ladder) {
    const Prepared& p = nets.get(n);
    const DensityMember truth = truth_for(cfg, p.net);
    const auto values = replicate(cfg, threads, [&](std::size_t r) {
      const Dataset data = sample_dataset(truth, cfg.contamination, n, data_seed(cfg, n, r));
      const DensityMatrix dm(p.net, data);
      const PosteriorResult rho = rho_posterior(dm, p.prior, cfg.beta);
      const PosteriorResult cl = classical_posterior(dm, p.prior, 1.0);
      if (r == 0 && n == cfg.n_ladder.front()) self = posterior_hellinger_sq(rho.weights, rho.weights);
      return std::vector<double>{posterior_hellinger_sq(cl.weights, rho.weights)};
    });
    append_rows(t, n, {"h2_classical_rho"}, values);
    const double med = quantile(column(values, 0), 0.5);
    add_summary(t, n, "median_h2_classical_rho", med);
    add_summary(t, n, "net_size", static_cast<double>(p.net.size()));
    ns.push_back(static_cast<double>(n));
    medians.push_back(med);
  }
  add_summary(t, 0, "h2_self", self);
  const bool positive = std::all_of(medians.begin(), medians.end(), [](double m) { return m > 0.0; });
  const SlopeFit fit = medians.size() >= 2 && positive ? loglog_slope(ns, medians) : SlopeFit{kNaN, kNaN, kNaN};
  add_summary(t, 0, "slope", fit.slope);
  add_summary(t, 0, "slope_std_err", fit.std_err);
  return t;
}

ResultTable run_histogram(const ExperimentConfig& cfg, unsigned threads) {
  require_scenario(cfg, Scenario::histogram);
  ResultTable t{"histogram", {}, {}, {}};
  NetCache nets(cfg);
  const std::size_t k = cfg.family->bins();
  std::vector<std::string> metrics = {"posterior_mean_hellinger", "ball_mass_truth"};
  for (std::size_t j = 0; j < k; ++j) metrics.push_back("mean_bin_" + std::to_string(j));
  std::vector<double> medians;
  for (std::size_t n : cfg.n_ladder) {
    const Prepared& p = nets.get(n);
    const DensityMember truth = truth_for(cfg, p.net);
    std::vector<double> h_truth(p.net.size());
    for (std::size_t j = 0; j < h_truth.size(); ++j) h_truth[j] = hellinger_pair(truth, p.net[j]);
    const auto values = replicate(cfg, threads, [&](std::size_t r) {
      const Dataset data = sample_dataset(truth, cfg.contamination, n, data_seed(cfg, n, r));
      const PosteriorResult rho = rho_posterior(data, p.net, p.prior, cfg.beta);
      std::vector<double> out(2 + k, 0.0);
      std::vector<double> terms(p.net.size());
      for (std::size_t j = 0; j < p.net.size(); ++j) terms[j] = rho.weights[j] * h_truth[j];
      out[0] = detail::accurate_sum(terms);
      out[1] = posterior_ball_mass(rho.weights, p.net, truth, cfg.ball_radius);
      for (std::size_t b = 0; b < k; ++b) {
        for (std::size_t j = 0; j < p.net.size(); ++j) terms[j] = rho.weights[j] * p.net[j].params()[b];
        out[2 + b] = detail::accurate_sum(terms);
      }
      return out;
    });
    append_rows(t, n, metrics, values);
    medians.push_back(quantile(column(values, 0), 0.5));
    add_summary(t, n, "median_posterior_mean_hellinger", medians.back());
    add_summary(t, n, "truth_net_distance", *std::min_element(h_truth.begin(), h_truth.end()));
    for (std::size_t b = 0; b < k; ++b) add_summary(t, n, "mean_bin_" + std::to_string(b), mean_of(column(values, 2 + b)));
  }
  add_summary(t, 0, "risk_ratio", medians.back() / medians.front());
  return t;
}

namespace {

// Model m of the nested ladder: theta_1..theta_{m-1} on the grid, theta_m on
// the grid without 0 (so the models are disjoint), higher coefficients 0.
Net ladder_model(const ExperimentConfig& cfg, std::size_t m) {
  const std::size_t D = cfg.family->exp.degree;
  const std::vector<double> g = linspace(-cfg.box, cfg.box, cfg.grid_points);
  GridSpec grid;
  grid.axes.assign(D + 1, std::vector<double>{0.0});
  for (std::size_t j = 1; j <= m; ++j) {
    if (j < m) {
      grid.axes[j] = g;
    } else {
      grid.axes[j].clear();
      for (double v : g) {
        if (std::abs(v) > 1e-12 * cfg.box) grid.axes[j].push_back(v);
      }
    }
  }
  return build_grid_net(cfg.family, grid);
}

}  // namespace

ResultTable run_model_selection(const ExperimentConfig& cfg, unsigned threads) {
  require_scenario(cfg, Scenario::model_selection);
  ResultTable t{"model_selection", {}, {}, {}};
  const std::size_t M = cfg.max_model + 1;
  std::vector<Net> models;
  for (std::size_t m = 0; m < M; ++m) models.push_back(ladder_model(cfg, m));
  const std::vector<double> L = truncated_ladder_weights(M);
  const DensityMember truth(cfg.family, cfg.truth);

  std::vector<std::string> metrics;
  for (std::size_t m = 0; m < M; ++m) metrics.push_back("model_mass_" + std::to_string(m));
  metrics.push_back("selected_model");
  metrics.push_back("target_mass");

  for (std::size_t n : cfg.n_ladder) {
    ModelCollection coll;
    for (std::size_t m = 0; m < M; ++m) {
      const double dim = static_cast<double>(m) + cfg.dimension_offset;
      WeightVector prior = WeightVector::uniform(models[m].size());
      if (cfg.penalty_scale == 1.0) {
        coll.add(models[m], std::move(prior), L[m], dim, n, cfg.beta);
      } else {
        const double pen = cfg.penalty_scale * penalty(m, dim, n, cfg.beta, L[m]).pen;
        coll.add_with_penalty(models[m], std::move(prior), L[m], pen);
      }
    }
    coll.validate();
    const std::vector<DensityMember> all = union_members(coll);
    const auto values = replicate(cfg, threads, [&](std::size_t r) {
      const Dataset data = sample_dataset(truth, cfg.contamination, n, data_seed(cfg, n, r));
      const DensityMatrix dm(std::span<const DensityMember>(all), data);
      const ModelSelectionResult res = model_selection_posterior(dm, coll, cfg.beta);
      std::vector<double> out(res.model_mass);
      out.push_back(static_cast<double>(res.selected()));
      double target = 0.0;
      for (std::size_t m : cfg.target_models) target += res.model_mass[m];
      out.push_back(target);
      return out;
    });
    append_rows(t, n, metrics, values);

    double ok = 0.0;
    for (double v : column(values, M + 1)) ok += v >= cfg.target_mass;
    add_summary(t, n, "frac_target_mass_ok", ok / static_cast<double>(cfg.replications));
    for (std::size_t m = 0; m < M; ++m) {
      add_summary(t, n, "mean_model_mass_" + std::to_string(m), mean_of(column(values, m)));
    }
    for (std::size_t m = 0; m < M; ++m) add_summary(t, n, "pen_" + std::to_string(m), coll[m].pen);
    double wsum = 0.0;
    for (double l : L) wsum += std::exp(-l);
    add_summary(t, n, "ladder_weight_sum", wsum);
    add_summary(t, n, "penalty_scale", cfg.penalty_scale);
  }
  return t;
}

std::vector<BoundsRow> bounds_rows(const ExperimentConfig& cfg, std::size_t n, unsigned threads) {
  const Prepared p = prepare(cfg, n);
  const Net& net = p.net;
  const DensityMember s = truth_for(cfg, net);
  const Constants c = make_constants(cfg.beta, n);
  const double gamma = cfg.beta / 8.0;
  const double root_n = std::sqrt(static_cast<double>(n));
  const double dim = cfg.dimension > 0.0 ? cfg.dimension : static_cast<double>(free_parameters(*cfg.family));
  std::vector<BoundsRow> rows;

  const std::vector<double> grid = default_y_grid(n);
  const EpsEstimate eps = eps_monte_carlo(s, net, grid, n, cfg.eps_replications, stream_seed(cfg.seed, n), threads);
  double se = kNaN;
  for (const WPoint& w : eps.w_curve) {
    if (w.y == eps.epsilon) se = w.std_err;
  }
  rows.push_back({"eps_mc", kNaN, eps.epsilon, se, c.c3 * eps.epsilon >= root_n});
  rows.push_back({"eps_mc_upper", kNaN, eps.epsilon_upper, std::nullopt, c.c3 * eps.epsilon_upper >= root_n});
  const double eps_fin = eps_finite_bound(net.size(), n);
  const double eps_vc = eps_vc_bound(dim, n);
  rows.push_back({"eps_finite_bound", eps_fin, std::nullopt, std::nullopt, c.c3 * eps_fin >= root_n});
  rows.push_back({"eps_vc_bound", eps_vc, std::nullopt, std::nullopt, c.c3 * eps_vc >= root_n});

  const std::size_t t_star = nearest_member(net, s);
  std::vector<RbarTerm> terms(net.size());
  double eta_max = 0.0;
  const unsigned workers = detail::resolve_threads(threads, net.size());
  detail::parallel_for(net.size(), workers, [&](unsigned, std::size_t t) {
    terms[t] = {hellinger_pair(s, net[t]) * root_n, eta_exact(net, p.prior, t, gamma, n).eta};
  });
  for (const auto& term : terms) eta_max = std::max(eta_max, term.eta);
  rows.push_back({"eta_exact_truth", terms[t_star].eta, std::nullopt, std::nullopt, c.c2 * terms[t_star].eta >= root_n});
  rows.push_back({"eta_exact_max", eta_max, std::nullopt, std::nullopt, c.c2 * eta_max >= root_n});
  if (p.dirichlet) {
    const double b = eta_dirichlet_bound(cfg.net.dirichlet_alpha, gamma);
    rows.push_back({"eta_dirichlet_bound", b, std::nullopt, std::nullopt, c.c2 * b >= root_n});
  }
  if (cfg.a_bar && cfg.a_low && cfg.alpha_exponent) {
    const double kappa0 = kappa0_bounded_density(free_parameters(*cfg.family), 1.0, 1.0);
    const double b = eta_param_bound(*cfg.a_bar, *cfg.a_low, *cfg.alpha_exponent, kappa0, gamma);
    rows.push_back({"eta_param_bound", b, std::nullopt, std::nullopt, c.c2 * b >= root_n});
  }
  rows.push_back({"eta_bar_sq", eta_bar_sq(net, p.prior, t_star, cfg.beta, n), std::nullopt, std::nullopt, false});

  const RbarResult rb = rbar(terms, eps.epsilon, cfg.xi, cfg.xi_prime, cfg.beta, n);
  rows.push_back({"rbar", rb.value, std::nullopt, std::nullopt, rb.vacuous});
  const RbarResult rb_vc = rbar(terms, eps_vc, cfg.xi, cfg.xi_prime, cfg.beta, n);
  rows.push_back({"rbar_vc", rb_vc.value, std::nullopt, std::nullopt, rb_vc.vacuous});

  const Penalty pen = penalty(0, dim, n, cfg.beta, std::log(2.0));
  rows.push_back({"pen", pen.pen, std::nullopt, std::nullopt, false});
  rows.push_back({"eps_bar", pen.eps_bar, std::nullopt, std::nullopt, c.c3 * pen.eps_bar >= root_n});
  return rows;
}

ResultTable run_bounds_report(const ExperimentConfig& cfg, unsigned threads) {
  ResultTable t{"bounds_report", {}, {}, {}};
  json reports = json::array();
  for (std::size_t n : cfg.n_ladder) {
    const std::vector<BoundsRow> rows = bounds_rows(cfg, n, threads);
    for (const BoundsRow& row : rows) {
      add_summary(t, n, row.quantity, std::isnan(row.formula_value) ? row.mc_estimate.value_or(kNaN) : row.formula_value);
    }
    reports.push_back({{"n", n}, {"rows", json::parse(bounds_report_json(rows))}});
  }
  json doc = {{"scenario", cfg.name}, {"seed", cfg.seed}, {"beta", cfg.beta}, {"reports", reports}};
  t.report_json = doc.dump(2);
  return t;
}

ResultTable run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  switch (cfg.scenario) {
    case Scenario::contamination: return run_contamination(cfg, threads);
    case Scenario::agreement: return run_agreement(cfg, threads);
    case Scenario::histogram: return run_histogram(cfg, threads);
    case Scenario::model_selection: return run_model_selection(cfg, threads);
    case Scenario::bounds_report: return run_bounds_report(cfg, threads);
  }
  throw ConfigError("unknown scenario");
}

// ---------------------------------------------------------------------------

std::vector<CheckOutcome> evaluate_checks(const ExperimentConfig& cfg, const ResultTable& t) {
  std::vector<CheckOutcome> out;
  const double reps = static_cast<double>(cfg.replications);
  switch (cfg.scenario) {
    case Scenario::contamination:
      for (std::size_t n : cfg.n_ladder) {
        const std::string at = " (n=" + std::to_string(n) + ")";
        const double p = summary_value(t, "expected_frac_classical_far", n);
        const double got = summary_value(t, "frac_classical_far", n);
        const double tol = cfg.check_binomial_sigmas * std::sqrt(p * (1.0 - p) / reps);
        out.push_back({"classical median beyond t0+" + fmt(cfg.far_offset) + at, std::abs(got - p) <= tol, got, p,
                       "|" + fmt(got) + " - " + fmt(p) + "| <= " + fmt(tol)});
        const double near = summary_value(t, "frac_rho_near", n);
        out.push_back({"rho median within t0 band" + at, near >= cfg.check_rho_fraction, near, cfg.check_rho_fraction,
                       fmt(near) + " >= " + fmt(cfg.check_rho_fraction)});
      }
      break;
    case Scenario::agreement: {
      const double slope = summary_value(t, "slope", 0);
      const double se = summary_value(t, "slope_std_err", 0);
      out.push_back({"log-log slope of median h2", slope <= cfg.check_slope_max, slope, cfg.check_slope_max,
                     fmt(slope) + " (se " + fmt(se) + ") <= " + fmt(cfg.check_slope_max)});
      break;
    }
    case Scenario::histogram: {
      const double ratio = summary_value(t, "risk_ratio", 0);
      out.push_back({"risk ratio last/first n", ratio <= cfg.check_ratio_max, ratio, cfg.check_ratio_max,
                     fmt(ratio) + " <= " + fmt(cfg.check_ratio_max)});
      break;
    }
    case Scenario::model_selection:
      for (std::size_t n : cfg.n_ladder) {
        const double f = summary_value(t, "frac_target_mass_ok", n);
        out.push_back({"target model mass >= " + fmt(cfg.target_mass) + " (n=" + std::to_string(n) + ")",
                       f >= cfg.check_fraction_min, f, cfg.check_fraction_min,
                       fmt(f) + " >= " + fmt(cfg.check_fraction_min)});
      }
      break;
    case Scenario::bounds_report:
      for (const auto& row : t.summary) {
        if (row.metric == "eps_mc" || row.metric == "eta_exact_max") {
          const bool finite = std::isfinite(row.value);
          out.push_back({row.metric + " finite (n=" + std::to_string(row.n) + ")", finite, row.value, kNaN, ""});
        }
      }
      break;
  }
  return out;
}

SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need at least two paired points");
  const std::size_t k = x.size();
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = detail::accurate_sum(lx) / static_cast<double>(k);
  const double my = detail::accurate_sum(ly) / static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("loglog_slope: x values must not all be equal");
  SlopeFit f{sxy / sxx, 0.0, kNaN};
  f.intercept = my - f.slope * mx;
  if (k > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double e = ly[i] - f.intercept - f.slope * lx[i];
      ssr += e * e;
    }
    f.std_err = std::sqrt(ssr / static_cast<double>(k - 2) / sxx);
  }
  return f;
}

void write_rows_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << "scenario,n,replication,metric,value\n";
  char buf[64];
  for (const ResultRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.scenario << ',' << r.n << ',';
    if (r.replication >= 0) out << r.replication;
    out << ',' << r.metric << ',' << buf << '\n';
  }
}

std::string config_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_metadata(std::ostream& out, const ExperimentConfig& cfg, const ResultTable& table, unsigned threads) {
  json meta = {{"scenario", table.scenario},
               {"name", cfg.name},
               {"config", cfg.source},
               {"config_hash", "fnv1a64:" + config_hash(cfg.config_text)},
               {"seed", cfg.seed},
               {"replications", cfg.replications},
               {"n", cfg.n_ladder},
               {"rows", table.rows.size()},
               {"summary_rows", table.summary.size()},
               {"threads", threads},
               {"version", std::string(kVersion)},
               {"compiler", std::string(__VERSION__)},
               {"json_library", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  out << meta.dump(2) << '\n';
}

}  // namespace rho_bayes
