// Python bindings for the core library: families, nets, posteriors,
// bound computations and the experiment runner.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "rho_bayes/bounds.hpp"
#include "rho_bayes/error.hpp"
#include "rho_bayes/estimators.hpp"
#include "rho_bayes/experiments.hpp"
#include "rho_bayes/kernel.hpp"
#include "rho_bayes/model.hpp"
#include "rho_bayes/posterior.hpp"

namespace py = pybind11;
using namespace rho_bayes;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

py::dict table_dict(const ResultTable& t) {
  auto rows = [](const std::vector<ResultRow>& rs) {
    py::list out;
    for (const ResultRow& r : rs) {
      out.append(py::make_tuple(r.scenario, r.n, r.replication < 0 ? py::object(py::none()) : py::int_(r.replication),
                                r.metric, r.value));
    }
    return out;
  };
  py::dict d;
  d["scenario"] = t.scenario;
  d["rows"] = rows(t.rows);
  d["summary"] = rows(t.summary);
  d["report_json"] = t.report_json;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "rho-Bayes posteriors over finite nets of densities";
  m.attr("__version__") = std::string(kVersion);

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<QuadratureError>(m, "QuadratureError", error.ptr());
  py::register_exception<DegeneratePosteriorError>(m, "DegeneratePosteriorError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

  m.def("psi", &psi, py::arg("x"));
  m.def("phi", &phi, py::arg("x"));
  m.def("psi_sqrt_ratio", &psi_sqrt_ratio, py::arg("num"), py::arg("den"));

  py::class_<FamilySpec, std::shared_ptr<FamilySpec>>(m, "FamilySpec")
      .def_static("uniform_scale", [] { return std::const_pointer_cast<FamilySpec>(FamilySpec::uniform_scale()); })
      .def_static("uniform_cube",
                  [](std::size_t d) { return std::const_pointer_cast<FamilySpec>(FamilySpec::uniform_cube(d)); })
      .def_static("gamma_translation",
                  [](double a) { return std::const_pointer_cast<FamilySpec>(FamilySpec::gamma_translation(a)); })
      .def_static("histogram",
                  [](std::vector<double> bp) {
                    return std::const_pointer_cast<FamilySpec>(FamilySpec::histogram(std::move(bp)));
                  })
      .def_static("exp_family",
                  [](std::size_t degree, double box) {
                    return std::const_pointer_cast<FamilySpec>(FamilySpec::exp_family(degree, box));
                  })
      .def_property_readonly("name", [](const FamilySpec& f) { return std::string(family_name(f.family)); })
      .def_property_readonly("param_count", &FamilySpec::param_count);

  py::class_<DensityMember>(m, "DensityMember")
      .def(py::init([](std::shared_ptr<FamilySpec> spec, std::vector<double> params) {
             return DensityMember(std::move(spec), std::move(params));
           }),
           py::arg("family"), py::arg("params"))
      .def_property_readonly("params", [](const DensityMember& d) { return to_vector(d.params()); })
      .def("density", [](const DensityMember& d, double x) { return d.density(x); })
      .def("density", [](const DensityMember& d, std::vector<double> x) { return d.density(x); });

  m.def("hellinger", &hellinger_pair, py::arg("a"), py::arg("b"));

  py::class_<Net>(m, "Net")
      .def(py::init<std::vector<DensityMember>>(), py::arg("members"))
      .def("__len__", &Net::size)
      .def("__getitem__", [](const Net& n, std::size_t i) {
        if (i >= n.size()) throw py::index_error();
        return n[i];
      })
      .def("distance", &Net::distance);

  m.def(
      "grid_net",
      [](std::shared_ptr<FamilySpec> spec, std::vector<std::vector<double>> axes) {
        return build_grid_net(spec, GridSpec{std::move(axes)});
      },
      py::arg("family"), py::arg("axes"));
  m.def(
      "dirichlet_net",
      [](std::vector<double> alpha, std::vector<double> bp, std::size_t atoms, std::uint64_t seed) {
        auto [net, prior] = dirichlet_prior_net(alpha, bp, atoms, seed);
        return py::make_tuple(net, prior.weights);
      },
      py::arg("alpha"), py::arg("breakpoints"), py::arg("atoms"), py::arg("seed"));
  m.def("linspace", &linspace);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("dim", &Dataset::dim)
      .def_readonly("values", &Dataset::values)
      .def("__len__", &Dataset::size);
  m.def(
      "sample",
      [](const DensityMember& truth, std::size_t n, std::uint64_t seed, double rate, std::vector<double> lower,
         std::vector<double> upper) {
        ContaminationSpec c{rate, UniformBox{std::move(lower), std::move(upper)}};
        return sample_dataset(truth, c, n, seed);
      },
      py::arg("truth"), py::arg("n"), py::arg("seed"), py::arg("rate") = 0.0,
      py::arg("lower") = std::vector<double>{}, py::arg("upper") = std::vector<double>{});
  m.def(
      "dataset",
      [](std::vector<double> values, std::size_t dim) {
        Dataset d;
        d.dim = dim;
        d.values = std::move(values);
        return d;
      },
      py::arg("values"), py::arg("dim") = 1);

  auto prior_of = [](const Net& net, const std::optional<std::vector<double>>& w) {
    return w ? WeightVector::normalized(*w) : WeightVector::uniform(net.size());
  };
  m.def(
      "rho_posterior",
      [prior_of](const Dataset& data, const Net& net, std::optional<std::vector<double>> prior, double beta,
                 unsigned threads) { return rho_posterior(data, net, prior_of(net, prior), beta, threads).weights.weights; },
      py::arg("data"), py::arg("net"), py::arg("prior") = py::none(), py::arg("beta") = kDefaultBeta,
      py::arg("threads") = 1);
  m.def(
      "classical_posterior",
      [prior_of](const Dataset& data, const Net& net, std::optional<std::vector<double>> prior) {
        return classical_posterior(data, net, prior_of(net, prior)).weights.weights;
      },
      py::arg("data"), py::arg("net"), py::arg("prior") = py::none());
  m.def(
      "loss_minimizer",
      [](std::vector<double> post, const Net& net, double delta) {
        return loss_minimizer(WeightVector::normalized(std::move(post)), net, LossSpec::power(delta));
      },
      py::arg("posterior"), py::arg("net"), py::arg("delta") = 2.0);

  m.def(
      "eta_from_distances",
      [](std::vector<double> d, std::vector<double> prior, double gamma) {
        return eta_from_distances(d, prior, gamma).eta;
      },
      py::arg("distances"), py::arg("prior"), py::arg("gamma"));
  m.def("eps_finite_bound", &eps_finite_bound, py::arg("net_size"), py::arg("n"));
  m.def("eps_vc_bound", &eps_vc_bound, py::arg("dimension"), py::arg("n"));
  m.def(
      "eta_dirichlet_bound", [](std::vector<double> alpha, double gamma) { return eta_dirichlet_bound(alpha, gamma); },
      py::arg("alpha"), py::arg("gamma"));

  m.def(
      "parse_config", [](const std::string& text, const std::string& source) { return parse_config(text, source); },
      py::arg("text"), py::arg("source") = "<config>");
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("replications", &ExperimentConfig::replications)
      .def_readwrite("n_ladder", &ExperimentConfig::n_ladder)
      .def_property_readonly("scenario",
                             [](const ExperimentConfig& c) { return std::string(scenario_name(c.scenario)); });
  m.def("load_config", &load_config, py::arg("path"));
  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, unsigned threads) {
        ResultTable t;
        {
          py::gil_scoped_release release;
          t = run_experiment(cfg, threads);
        }
        return table_dict(t);
      },
      py::arg("config"), py::arg("threads") = 0);
  m.def(
      "evaluate_checks",
      [](const ExperimentConfig& cfg, unsigned threads) {
        ResultTable t;
        {
          py::gil_scoped_release release;
          t = run_experiment(cfg, threads);
        }
        py::list out;
        for (const CheckOutcome& c : evaluate_checks(cfg, t)) out.append(py::make_tuple(c.name, c.passed, c.detail));
        return out;
      },
      py::arg("config"), py::arg("threads") = 0);
}
