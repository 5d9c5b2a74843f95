// rho-bayes: batch experiments for the rho-posterior.
//
//   rho-bayes run <config>      per-replication CSV, summary CSV, metadata
//   rho-bayes check <config>    run, then compare against the thresholds
//   rho-bayes bounds <config>   bounds report for the config's net and prior
//
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 quadrature failure,
// 4 threshold failure (check).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "rho_bayes/error.hpp"
#include "rho_bayes/experiments.hpp"

namespace fs = std::filesystem;
using namespace rho_bayes;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
};

// --out wins over RHO_BAYES_OUT_DIR; without either the config's output path
// is used as given (relative to the working directory).
fs::path output_path(const ExperimentConfig& cfg, const Options& opt, const std::string& extension) {
  fs::path file = cfg.output.empty() ? fs::path(cfg.name + extension) : fs::path(cfg.output);
  if (file.extension() != extension) file.replace_extension(extension);
  std::string dir = opt.out;
  if (dir.empty()) {
    if (const char* env = std::getenv("RHO_BAYES_OUT_DIR"); env && *env) dir = env;
  }
  if (!dir.empty()) file = fs::path(dir) / file.filename();
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  return file;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

ExperimentConfig load(const Options& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

void print_summary(const ResultTable& t) {
  for (const ResultRow& r : t.summary) std::printf("%-34s n=%-6zu %.6g\n", r.metric.c_str(), r.n, r.value);
}

int run(const Options& opt, bool check) {
  const ExperimentConfig cfg = load(opt);
  const ResultTable table = run_experiment(cfg, opt.threads);

  const fs::path csv = output_path(cfg, opt, ".csv");
  std::ostringstream rows, summary, meta;
  write_rows_csv(rows, table.rows);
  write_rows_csv(summary, table.summary);
  write_metadata(meta, cfg, table, opt.threads);
  write_file(csv, rows.str());
  write_file(sibling(csv, "_summary.csv"), summary.str());
  write_file(sibling(csv, ".meta.json"), meta.str());
  if (!table.report_json.empty()) write_file(sibling(csv, ".json"), table.report_json + "\n");
  print_summary(table);
  std::printf("wrote %s\n", csv.string().c_str());

  if (!check) return 0;
  bool ok = true;
  for (const CheckOutcome& c : evaluate_checks(cfg, table)) {
    std::printf("%s %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.passed;
  }
  return ok ? 0 : 4;
}

int bounds(const Options& opt) {
  ExperimentConfig cfg = load(opt);
  if (cfg.scenario == Scenario::model_selection) {
    throw ConfigError(cfg.source + ": model_selection configs have no single net; use a bounds_report config");
  }
  cfg.scenario = Scenario::bounds_report;
  const ResultTable table = run_bounds_report(cfg, opt.threads);
  const fs::path json = output_path(cfg, opt, ".json");
  write_file(json, table.report_json + "\n");
  print_summary(table);
  std::printf("wrote %s\n", json.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust rho-posterior experiments on finite nets of densities"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the configuration seed");
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
    sub->add_option("--out", opt.out, "output directory (else $RHO_BAYES_OUT_DIR)");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment and write its tables");
  CLI::App* check_cmd = app.add_subcommand("check", "run an experiment and test its thresholds");
  CLI::App* bounds_cmd = app.add_subcommand("bounds", "tabulate the concentration bounds of a configuration");
  for (CLI::App* sub : {run_cmd, check_cmd, bounds_cmd}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return run(opt, false);
    if (*check_cmd) return run(opt, true);
    return bounds(opt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const QuadratureError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
