#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hrc/bootstrap.hpp"
#include "hrc/cox.hpp"
#include "hrc/error.hpp"
#include "hrc/frailty.hpp"
#include "hrc/io.hpp"
#include "hrc/sensitivity.hpp"
#include "hrc/simgen.hpp"
#include "hrc/study.hpp"
#include "hrc/survival.hpp"

namespace py = pybind11;
using namespace hrc;

namespace {

using Array = py::array_t<double>;
using OptWeights = std::optional<std::vector<double>>;

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

WeightSpan span_of(const OptWeights& w) {
  return w ? WeightSpan(w->data(), w->size()) : WeightSpan{};
}

SurvivalSample make_sample(const std::vector<double>& time, const std::vector<int>& event,
                           const std::vector<int>& treatment,
                           const std::optional<std::vector<std::vector<double>>>& covariates) {
  const std::size_t n = time.size();
  if (event.size() != n || treatment.size() != n)
    throw Error("time, event and treatment must have the same length");
  if (covariates && covariates->size() != n) throw Error("covariates must have one row per subject");
  std::vector<SubjectRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (event[i] != 0 && event[i] != 1) throw Error("event must be 0 or 1");
    records[i].id = std::to_string(i + 1);
    records[i].time = time[i];
    records[i].event = event[i] == 1;
    records[i].treatment = treatment[i];
    if (covariates) records[i].covariates = (*covariates)[i];
  }
  return SurvivalSample(std::move(records));
}

py::dict step_dict(const StepFunction& f) {
  py::dict d;
  d["times"] = to_array(f.jump_times());
  d["increments"] = to_array(f.increments());
  return d;
}

py::dict curve_dict(const SensitivityCurve& c) {
  py::dict d;
  d["family"] = std::string(to_string(c.family));
  d["tau"] = c.tau;
  d["theta"] = c.theta;
  d["method"] = std::string(to_string(c.method));
  d["t"] = to_array(c.times);
  d["estimate"] = to_array(c.estimates);
  std::vector<std::string> flags;
  for (auto f : c.flags) flags.emplace_back(to_string(f));
  d["flag"] = flags;
  if (!c.se.empty()) {
    d["se"] = to_array(c.se);
    d["ci_lo"] = to_array(c.ci_lo);
    d["ci_hi"] = to_array(c.ci_hi);
  }
  return d;
}

SensitivityRequest make_request(const std::string& method, const std::vector<std::string>& families,
                                const std::vector<double>& taus, bool iptw, bool stabilized,
                                std::optional<double> truncation, std::size_t grid_points,
                                std::size_t min_at_risk,
                                std::optional<std::array<double, 2>> grid_bounds,
                                const std::string& bias) {
  SensitivityRequest req;
  req.method = parse_method(method);
  req.families.clear();
  for (const auto& f : families) req.families.push_back(parse_family(f));
  req.taus = taus;
  req.weighting = {iptw, stabilized, truncation};
  req.grid.n_points = grid_points;
  req.grid.min_at_risk = min_at_risk;
  req.grid.bounds = grid_bounds;
  req.bias_estimator = parse_bias_estimator(bias);
  return req;
}

ScenarioSpec make_scenario(const std::string& scenario, std::size_t n, double tau, double censoring,
                           double beta, double beta_z, double event_rate, double admin_time) {
  ScenarioSpec s;
  s.scenario = parse_scenario(scenario);
  s.n = n;
  s.tau = tau;
  s.censoring_fraction = censoring;
  s.beta = beta;
  s.beta_z = beta_z;
  s.event_rate_target = event_rate;
  s.administrative_time = admin_time;
  return s;
}

#define SCENARIO_ARGS                                                                  \
  py::arg("scenario"), py::arg("n") = 2000, py::arg("tau") = 0.7,                       \
      py::arg("censoring") = 0.2, py::arg("beta") = std::log(0.5),                      \
      py::arg("beta_z") = std::log(0.9), py::arg("event_rate") = 0.05,                  \
      py::arg("admin_time") = 10.0

#define REQUEST_ARGS                                                                      \
  py::arg("method") = "kernel", py::arg("families") = std::vector<std::string>{"gamma"}, \
      py::arg("taus") = std::vector<double>{0.7}, py::arg("iptw") = false,               \
      py::arg("stabilized") = true, py::arg("truncation") = py::none(),                  \
      py::arg("grid_points") = 51, py::arg("min_at_risk") = 10,                          \
      py::arg("grid_bounds") = py::none(), py::arg("bias") = "pilot"

}  // namespace

PYBIND11_MODULE(_hrcsens, m) {
  m.doc() = "Sensitivity analysis of the causal hazard ratio under frailty models";
  m.attr("__version__") = cli::kVersion;
  py::register_exception<Error>(m, "HrcError", PyExc_ValueError);

  py::class_<SurvivalSample>(m, "Sample")
      .def(py::init(&make_sample), py::arg("time"), py::arg("event"), py::arg("treatment"),
           py::arg("covariates") = py::none())
      .def("__len__", &SurvivalSample::size)
      .def_property_readonly("covariate_count", &SurvivalSample::covariate_count)
      .def("arm_size", &SurvivalSample::arm_size)
      .def("event_count", &SurvivalSample::event_count)
      .def_property_readonly("time", [](const SurvivalSample& s) {
        std::vector<double> v;
        for (const auto& r : s.records()) v.push_back(r.time);
        return to_array(v);
      })
      .def_property_readonly("event", [](const SurvivalSample& s) {
        std::vector<int> v;
        for (const auto& r : s.records()) v.push_back(r.event ? 1 : 0);
        return v;
      })
      .def_property_readonly("treatment", [](const SurvivalSample& s) {
        std::vector<int> v;
        for (const auto& r : s.records()) v.push_back(r.treatment);
        return v;
      })
      .def("to_csv", [](const SurvivalSample& s, std::vector<std::string> names) {
        std::ostringstream os;
        write_sample_csv(os, s, names);
        return os.str();
      }, py::arg("covariate_names") = std::vector<std::string>{});

  m.def("read_csv", [](const std::string& path) {
    auto loaded = read_sample_csv_file(path);
    return py::make_tuple(std::move(loaded.sample), loaded.covariate_names);
  }, py::arg("path"), "Load a sample CSV; returns (Sample, covariate names).");

  m.def("nelson_aalen", [](const SurvivalSample& s, int arm, const OptWeights& w) {
    return step_dict(nelson_aalen(s, arm, span_of(w)));
  }, py::arg("sample"), py::arg("arm"), py::arg("weights") = py::none());

  m.def("kaplan_meier", [](const SurvivalSample& s, int arm, const OptWeights& w) {
    return step_dict(kaplan_meier(s, arm, span_of(w)));
  }, py::arg("sample"), py::arg("arm"), py::arg("weights") = py::none());

  m.def("logrank", [](const SurvivalSample& s, const OptWeights& w) {
    const auto r = logrank_test(s, span_of(w));
    return py::make_tuple(r.statistic, r.p_value);
  }, py::arg("sample"), py::arg("weights") = py::none(), "Returns (chi-square, p-value).");

  m.def("time_grid", [](const SurvivalSample& s, std::size_t n, std::size_t min_at_risk) {
    return to_array(build_time_grid(s, n, min_at_risk).points());
  }, py::arg("sample"), py::arg("n_points") = 51, py::arg("min_at_risk") = 10);

  m.def("fit_cox", [](const SurvivalSample& s, const OptWeights& w, std::vector<std::size_t> covariates) {
    CovariateSpec design;
    design.covariates = std::move(covariates);
    const auto fit = fit_cox(s, design, span_of(w));
    const auto ph = ph_score_test(fit, s, span_of(w));
    py::dict d;
    d["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
    d["se"] = std::vector<double>(fit.beta_se.data(), fit.beta_se.data() + fit.beta_se.size());
    d["loglik"] = fit.loglik;
    d["iterations"] = fit.iterations;
    d["baseline"] = step_dict(fit.baseline_cumhaz);
    d["ph_chisq"] = ph.statistic;
    d["ph_p_value"] = ph.p_value;
    return d;
  }, py::arg("sample"), py::arg("weights") = py::none(),
     py::arg("covariates") = std::vector<std::size_t>{});

  m.def("tau_to_theta", [](const std::string& f, double tau) {
    return tau_to_theta(parse_family(f), tau).theta();
  }, py::arg("family"), py::arg("tau"));
  m.def("theta_to_tau", [](const std::string& f, double theta) {
    return theta_to_tau(FrailtySpec(parse_family(f), theta));
  }, py::arg("family"), py::arg("theta"));
  m.def("laplace", [](const std::string& f, double theta, double u) {
    return laplace(FrailtySpec(parse_family(f), theta), u);
  }, py::arg("family"), py::arg("theta"), py::arg("u"));
  m.def("varphi", [](const std::string& f, double theta, double cum1, double cum0) {
    return varphi(FrailtySpec(parse_family(f), theta), cum1, cum0);
  }, py::arg("family"), py::arg("theta"), py::arg("cum1"), py::arg("cum0"));

  m.def("sensitivity", [](const SurvivalSample& s, const std::string& method,
                          const std::vector<std::string>& families, const std::vector<double>& taus,
                          bool iptw, bool stabilized, std::optional<double> truncation,
                          std::size_t grid_points, std::size_t min_at_risk,
                          std::optional<std::array<double, 2>> bounds, const std::string& bias) {
    const auto req = make_request(method, families, taus, iptw, stabilized, truncation, grid_points,
                                  min_at_risk, bounds, bias);
    std::vector<SensitivityCurve> curves;
    {
      py::gil_scoped_release release;
      curves = run_sensitivity(s, req);
    }
    py::list out;
    for (const auto& c : curves) out.append(curve_dict(c));
    return out;
  }, py::arg("sample"), REQUEST_ARGS);

  m.def("bootstrap", [](const SurvivalSample& s, std::size_t replications, std::uint64_t seed,
                        double level, bool reselect, unsigned threads, const std::string& method,
                        const std::vector<std::string>& families, const std::vector<double>& taus,
                        bool iptw, bool stabilized, std::optional<double> truncation,
                        std::size_t grid_points, std::size_t min_at_risk,
                        std::optional<std::array<double, 2>> bounds, const std::string& bias) {
    const auto req = make_request(method, families, taus, iptw, stabilized, truncation, grid_points,
                                  min_at_risk, bounds, bias);
    BootstrapConfig cfg;
    cfg.replications = replications;
    cfg.seed = seed;
    cfg.confidence_level = level;
    cfg.reselect_bandwidths = reselect;
    cfg.threads = threads;
    BootstrapResult res;
    {
      py::gil_scoped_release release;
      res = bootstrap_curves(s, req, cfg);
    }
    py::list out;
    for (const auto& c : res.curves) out.append(curve_dict(c));
    return py::make_tuple(out, res.failed_replicates);
  }, py::arg("sample"), py::arg("replications") = 500, py::arg("seed") = 1,
     py::arg("level") = 0.95, py::arg("reselect") = true, py::arg("threads") = 1, REQUEST_ARGS,
     "Returns (curves with se/ci columns, failed replicate count).");

  m.def("simulate", [](const std::string& scenario, std::size_t n, double tau, double censoring,
                       double beta, double beta_z, double event_rate, double admin_time,
                       std::uint64_t seed) {
    const auto spec = make_scenario(scenario, n, tau, censoring, beta, beta_z, event_rate, admin_time);
    auto d = generate(spec, seed);
    py::dict hidden;
    hidden["frailty"] = to_array(d.frailty);
    hidden["t0"] = to_array(d.t0);
    hidden["t1"] = to_array(d.t1);
    hidden["censoring"] = to_array(d.censoring);
    return py::make_tuple(std::move(d.sample), hidden);
  }, SCENARIO_ARGS, py::arg("seed") = 1, "Returns (Sample, hidden potential outcomes).");

  m.def("true_hrc", [](const std::string& scenario, std::vector<double> t, double tau, double beta) {
    ScenarioSpec s;
    s.scenario = parse_scenario(scenario);
    s.tau = tau;
    s.beta = beta;
    for (auto& x : t) x = true_hrc(s, x);
    return to_array(t);
  }, py::arg("scenario"), py::arg("t"), py::arg("tau") = 0.7, py::arg("beta") = std::log(0.5));

  m.def("study", [](const std::string& scenario, std::size_t n, double tau, double censoring,
                    double beta, double beta_z, double event_rate, double admin_time,
                    std::size_t replications, std::uint64_t seed, std::vector<std::string> methods,
                    std::size_t grid_points, std::optional<std::array<double, 2>> bounds,
                    bool iptw, unsigned threads) {
    StudyConfig cfg;
    cfg.scenario = make_scenario(scenario, n, tau, censoring, beta, beta_z, event_rate, admin_time);
    cfg.replications = replications;
    cfg.seed = seed;
    cfg.methods.clear();
    for (const auto& name : methods) cfg.methods.push_back(parse_study_method(name));
    cfg.grid_points = grid_points;
    cfg.grid_bounds = bounds;
    cfg.iptw = iptw;
    cfg.threads = threads;
    py::gil_scoped_release release;
    return study_csv(run_study(cfg));
  }, SCENARIO_ARGS, py::arg("replications") = 100, py::arg("seed") = 1,
     py::arg("methods") = std::vector<std::string>{"cox", "kernel"}, py::arg("grid_points") = 51,
     py::arg("grid_bounds") = py::none(), py::arg("iptw") = false, py::arg("threads") = 1,
     "Runs a replicated simulation study and returns the summary CSV text.");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> argv{"hrcsens"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::ostringstream out, err;
    const int code = cli::run(argv, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command-line tool in process; returns (exit code, stdout, stderr).");
}
