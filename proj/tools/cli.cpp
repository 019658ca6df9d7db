#include "cli.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrc/bootstrap.hpp"
#include "hrc/cox.hpp"
#include "hrc/io.hpp"
#include "hrc/sensitivity.hpp"
#include "hrc/simgen.hpp"
#include "hrc/study.hpp"
#include "hrc/weights.hpp"

namespace hrc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Collects output files and writes them together with a manifest that lists
/// their hashes, so a rerun can be compared file by file.
class OutputSet {
 public:
  explicit OutputSet(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory '" + dir_ + "': " + ec.message());
  }

  void add(const std::string& name, const std::string& content) {
    const auto path = (fs::path(dir_) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
    files_.push_back({{"file", name}, {"fnv1a64", hex(fnv1a(content))}});
  }

  void write_manifest(ordered_json manifest) {
    manifest["outputs"] = files_;
    const auto text = manifest.dump(2) + "\n";
    std::ofstream out((fs::path(dir_) / "manifest.json").string(), std::ios::binary);
    if (!out) throw Error("cannot write manifest");
    out << text;
  }

 private:
  std::string dir_;
  ordered_json files_ = ordered_json::array();
};

ordered_json manifest_base(const std::string& command, std::uint64_t seed) {
  ordered_json m;
  m["tool"] = "hrcsens";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  return m;
}

std::vector<FrailtyFamily> parse_families(const std::vector<std::string>& names) {
  std::vector<FrailtyFamily> out;
  for (const auto& n : names) out.push_back(parse_family(n));
  return out;
}

struct GridOptions {
  std::size_t points = 51;
  std::size_t min_at_risk = 10;
  std::optional<double> lo;
  std::optional<double> hi;

  void add(CLI::App* app) {
    app->add_option("--grid-points", points, "Number of grid points")->capture_default_str();
    app->add_option("--min-at-risk", min_at_risk, "Grid ends where fewer remain at risk in an arm")
        ->capture_default_str();
    app->add_option("--grid-min", lo, "Fixed lower grid bound");
    app->add_option("--grid-max", hi, "Fixed upper grid bound");
  }

  std::optional<std::array<double, 2>> bounds() const {
    if (lo.has_value() != hi.has_value()) throw Error("--grid-min and --grid-max go together");
    if (!lo) return std::nullopt;
    return std::array<double, 2>{*lo, *hi};
  }

  ordered_json json() const {
    ordered_json j;
    j["points"] = points;
    j["min_at_risk"] = min_at_risk;
    if (lo) j["min"] = *lo;
    if (hi) j["max"] = *hi;
    return j;
  }
};

struct ScenarioOptions {
  std::string scenario = "Ia";
  double tau = 0.7;
  std::size_t n = 2000;
  double censoring = 0.2;
  double beta = std::log(0.5);
  double beta_z = std::log(0.9);
  double event_rate = 0.05;
  double admin_time = 10.0;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario, "Ia, Ib or II")->capture_default_str();
    app->add_option("--tau", tau, "Kendall's tau of the Gamma frailty")->capture_default_str();
    app->add_option("--n", n, "Sample size")->capture_default_str();
    app->add_option("--censoring", censoring, "Target censoring fraction (Ia, Ib)")
        ->capture_default_str();
    app->add_option("--beta", beta, "Treatment log hazard ratio")->capture_default_str();
    app->add_option("--beta-z", beta_z, "Confounder log hazard ratio (II)")->capture_default_str();
    app->add_option("--event-rate", event_rate, "Target event fraction (II)")->capture_default_str();
    app->add_option("--admin-time", admin_time, "Administrative censoring time (II)")
        ->capture_default_str();
  }

  ScenarioSpec spec() const {
    ScenarioSpec s;
    s.scenario = parse_scenario(scenario);
    s.tau = tau;
    s.n = n;
    s.censoring_fraction = censoring;
    s.beta = beta;
    s.beta_z = beta_z;
    s.event_rate_target = event_rate;
    s.administrative_time = admin_time;
    s.validate();
    return s;
  }

  ordered_json json() const {
    ordered_json j;
    j["scenario"] = scenario;
    j["tau"] = tau;
    j["n"] = n;
    j["censoring"] = censoring;
    j["beta"] = beta;
    j["beta_z"] = beta_z;
    j["event_rate"] = event_rate;
    j["admin_time"] = admin_time;
    return j;
  }
};

// ---- estimate ----

struct EstimateOptions {
  std::string input;
  std::string output_dir = "hrcsens-out";
  std::string method = "kernel";
  std::vector<std::string> families{"gamma"};
  std::vector<double> taus{0.1, 0.3, 0.5, 0.7};
  GridOptions grid;
  bool iptw = false;
  bool unstabilized = false;
  std::optional<double> truncate;
  std::size_t bootstrap = 0;
  bool no_reselect = false;
  std::string bias = "pilot";
  double level = 0.95;
  std::string ph_transform = "km";
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

void cmd_estimate(const EstimateOptions& o, std::ostream& out) {
  const auto raw = read_file(o.input);
  std::istringstream in(raw);
  const auto loaded = read_sample_csv(in);
  const auto& sample = loaded.sample;

  SensitivityRequest req;
  req.method = parse_method(o.method);
  req.families = parse_families(o.families);
  req.taus = o.taus;
  req.grid.n_points = o.grid.points;
  req.grid.min_at_risk = o.grid.min_at_risk;
  req.grid.bounds = o.grid.bounds();
  req.weighting.iptw = o.iptw;
  req.weighting.stabilized = !o.unstabilized;
  req.weighting.truncation = o.truncate;
  req.bias_estimator = parse_bias_estimator(o.bias);
  req.validate();

  OutputSet outputs(o.output_dir);
  std::vector<SensitivityCurve> curves;
  std::vector<double> weights;
  std::optional<WeightVector> weight_vector;
  if (o.bootstrap > 0) {
    BootstrapConfig bc;
    bc.replications = o.bootstrap;
    bc.seed = o.seed;
    bc.confidence_level = o.level;
    bc.reselect_bandwidths = !o.no_reselect;
    bc.threads = o.threads;
    curves = bootstrap_curves(sample, req, bc).curves;
  } else {
    curves = run_sensitivity(sample, req);
  }
  if (o.iptw) {
    const auto fit = fit_sensitivity(sample, [&] {
      auto r = req;
      r.method = Method::Cox;
      return r;
    }());
    weights = fit.weights;
    weight_vector = fit.weight_vector;
  }
  outputs.add("sensitivity.csv", sensitivity_csv(curves));

  if (o.iptw && sample.covariate_count() > 0) {
    std::ostringstream bal;
    write_balance_csv(bal, balance_diagnostics(sample, &*weight_vector, loaded.covariate_names));
    outputs.add("balance.csv", bal.str());
  }

  // Proportional hazards check of the treatment-only (weighted) Cox model.
  {
    std::ostringstream ph;
    const auto fit = fit_cox(sample, CovariateSpec::treatment_only(), weights);
    ph << "model,treatment-only Cox" << (o.iptw ? " (IPTW)" : "") << '\n';
    ph << "beta," << format_double(fit.beta[0]) << '\n';
    ph << "beta_se," << format_double(fit.beta_se[0]) << '\n';
    try {
      const auto transform = o.ph_transform == "identity" ? TimeTransform::Identity : TimeTransform::KmRank;
      const auto test = ph_score_test(fit, sample, weights, transform);
      ph << "transform," << o.ph_transform << '\n';
      ph << "chisq," << format_double(test.statistic) << '\n';
      ph << "df," << test.df << '\n';
      ph << "p_value," << format_double(test.p_value) << '\n';
    } catch (const Error& e) {
      ph << "error," << e.what() << '\n';
    }
    const auto lr = logrank_test(sample, weights);
    ph << "logrank_chisq," << format_double(lr.statistic) << '\n';
    ph << "logrank_p_value," << format_double(lr.p_value) << '\n';
    outputs.add("ph_test.csv", ph.str());
  }

  auto m = manifest_base("estimate", o.seed);
  m["input"] = {{"path", fs::path(o.input).filename().string()}, {"fnv1a64", hex(fnv1a(raw))},
                {"records", sample.size()}};
  ordered_json cfg;
  cfg["method"] = o.method;
  cfg["families"] = o.families;
  cfg["taus"] = o.taus;
  cfg["grid"] = o.grid.json();
  cfg["iptw"] = o.iptw;
  cfg["stabilized"] = !o.unstabilized;
  if (o.truncate) cfg["truncate"] = *o.truncate;
  cfg["bootstrap"] = o.bootstrap;
  cfg["reselect_bandwidths"] = !o.no_reselect;
  cfg["bias"] = o.bias;
  cfg["level"] = o.level;
  cfg["ph_transform"] = o.ph_transform;
  m["config"] = cfg;
  outputs.write_manifest(m);
  out << "wrote " << curves.size() << " curves to " << o.output_dir << '\n';
}

// ---- simulate ----

struct SimulateOptions {
  ScenarioOptions scenario;
  std::string output_dir = "hrcsens-sim";
  std::uint64_t seed = 1;
  GridOptions grid;
};

void cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const auto spec = resolve(o.scenario.spec(), o.seed);
  const auto data = generate(spec, o.seed);
  OutputSet outputs(o.output_dir);
  std::ostringstream d, h, t;
  write_sample_csv(d, data.sample);
  write_hidden_csv(h, data);
  outputs.add("data.csv", d.str());
  outputs.add("hidden.csv", h.str());

  TimeGrid grid;
  if (auto b = o.grid.bounds())
    grid = TimeGrid::equally_spaced((*b)[0], (*b)[1], o.grid.points);
  else if (spec.scenario == Scenario::II)
    grid = TimeGrid::equally_spaced(0.0, spec.administrative_time, o.grid.points);
  else
    grid = build_time_grid(data.sample, o.grid.points, o.grid.min_at_risk);
  t << "t,true_hrc\n";
  for (double x : grid.points()) t << format_double(x) << ',' << format_double(true_hrc(spec, x)) << '\n';
  outputs.add("truth.csv", t.str());

  auto m = manifest_base("simulate", o.seed);
  auto cfg = o.scenario.json();
  cfg["grid"] = o.grid.json();
  m["config"] = cfg;
  m["calibrated"] = ordered_json::object();
  if (spec.censoring_rate) m["calibrated"]["censoring_rate"] = *spec.censoring_rate;
  if (spec.event_scale) m["calibrated"]["event_scale"] = *spec.event_scale;
  m["theta"] = spec.theta();
  outputs.write_manifest(m);
  out << "wrote " << data.sample.size() << " records to " << o.output_dir << '\n';
}

// ---- study ----

struct StudyOptions {
  ScenarioOptions scenario;
  std::string output_dir = "hrcsens-study";
  std::uint64_t seed = 1;
  std::size_t replications = 100;
  std::vector<std::string> methods{"cox", "kernel"};
  GridOptions grid;
  std::optional<bool> iptw;
  std::optional<double> truncate;
  std::size_t bootstrap = 0;
  bool no_reselect = false;
  std::string bias = "pilot";
  unsigned threads = 1;
};

void cmd_study(const StudyOptions& o, std::ostream& out) {
  StudyConfig cfg;
  cfg.scenario = o.scenario.spec();
  cfg.replications = o.replications;
  cfg.seed = o.seed;
  cfg.methods.clear();
  for (const auto& m : o.methods) cfg.methods.push_back(parse_study_method(m));
  cfg.grid_points = o.grid.points;
  cfg.min_at_risk = o.grid.min_at_risk;
  cfg.grid_bounds = o.grid.bounds();
  const bool confounded = cfg.scenario.scenario == Scenario::II;
  if (!cfg.grid_bounds && confounded)
    cfg.grid_bounds = std::array<double, 2>{0.0, cfg.scenario.administrative_time};
  cfg.iptw = o.iptw.value_or(confounded);
  cfg.truncation = o.truncate;
  cfg.bootstrap = o.bootstrap;
  cfg.reselect_bandwidths = !o.no_reselect;
  cfg.bias_estimator = parse_bias_estimator(o.bias);
  cfg.threads = o.threads;
  const auto summary = run_study(cfg);

  OutputSet outputs(o.output_dir);
  outputs.add("study.csv", study_csv(summary));
  auto m = manifest_base("study", o.seed);
  auto c = o.scenario.json();
  c["replications"] = o.replications;
  c["methods"] = o.methods;
  c["grid"] = o.grid.json();
  c["iptw"] = cfg.iptw;
  if (o.truncate) c["truncate"] = *o.truncate;
  c["bootstrap"] = o.bootstrap;
  c["reselect_bandwidths"] = !o.no_reselect;
  c["bias"] = o.bias;
  m["config"] = c;
  m["failed_replications"] = summary.failed_replications;
  outputs.write_manifest(m);
  out << "study finished: " << summary.failed_replications << " failed replications\n";
}

// ---- balance ----

struct BalanceOptions {
  std::string input;
  std::string output_dir = "hrcsens-balance";
  bool unstabilized = false;
  std::optional<double> truncate;
};

void cmd_balance(const BalanceOptions& o, std::ostream& out) {
  const auto raw = read_file(o.input);
  std::istringstream in(raw);
  const auto loaded = read_sample_csv(in);
  const auto model = fit_logistic(loaded.sample);
  auto w = compute_weights(model, loaded.sample, !o.unstabilized);
  if (o.truncate) w = truncate_weights(w, *o.truncate);

  OutputSet outputs(o.output_dir);
  std::ostringstream bal;
  write_balance_csv(bal, balance_diagnostics(loaded.sample, &w, loaded.covariate_names));
  outputs.add("balance.csv", bal.str());

  std::ostringstream ps;
  ps << "term,coefficient,se\n";
  for (Eigen::Index j = 0; j < model.coefficients.size(); ++j)
    ps << (j == 0 ? std::string("intercept") : loaded.covariate_names[static_cast<std::size_t>(j - 1)])
       << ',' << format_double(model.coefficients[j]) << ',' << format_double(model.standard_errors[j])
       << '\n';
  outputs.add("propensity.csv", ps.str());

  std::ostringstream wt;
  wt << "id,weight\n";
  for (std::size_t i = 0; i < loaded.sample.size(); ++i)
    wt << loaded.sample[i].id << ',' << format_double(w.weights[i]) << '\n';
  outputs.add("weights.csv", wt.str());

  auto m = manifest_base("balance", 0);
  m["input"] = {{"path", fs::path(o.input).filename().string()}, {"fnv1a64", hex(fnv1a(raw))},
                {"records", loaded.sample.size()}};
  m["config"] = {{"stabilized", !o.unstabilized}};
  if (o.truncate) m["config"]["truncate"] = *o.truncate;
  outputs.write_manifest(m);
  out << "wrote balance table to " << o.output_dir << '\n';
}

void print_error(std::ostream& err, const std::string& command, const std::string& message) {
  ordered_json j;
  j["error"] = message;
  j["command"] = command;
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensitivity analysis for the causal hazard ratio", "hrcsens"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "INI configuration file; [command] sections hold command options");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  EstimateOptions est;
  auto* e = app.add_subcommand("estimate", "Estimate causal hazard ratio curves from a CSV sample");
  e->add_option("-i,--input", est.input, "Input CSV (id,time,event,treatment,z...)")->required();
  e->add_option("-o,--output-dir", est.output_dir, "Output directory")->capture_default_str();
  e->add_option("--method", est.method, "cox or kernel")->capture_default_str();
  e->add_option("--families", est.families, "Frailty families (gamma, ig, ps)")->delimiter(',');
  e->add_option("--taus", est.taus, "Kendall's tau values")->delimiter(',');
  est.grid.add(e);
  e->add_flag("--iptw", est.iptw, "Inverse probability of treatment weighting");
  e->add_flag("--unstabilized", est.unstabilized, "Use unstabilized IPTW weights");
  e->add_option("--truncate", est.truncate, "Truncate weights at this percentile (e.g. 0.99)");
  e->add_option("--bootstrap", est.bootstrap, "Bootstrap replications (0 = none)")->capture_default_str();
  e->add_flag("--no-reselect", est.no_reselect, "Reuse full-sample bandwidths in bootstrap replicates");
  e->add_option("--bias", est.bias, "Bandwidth-selection bias estimate: pilot or richardson")
      ->check(CLI::IsMember({"pilot", "richardson"}))
      ->capture_default_str();
  e->add_option("--level", est.level, "Confidence level")->capture_default_str();
  e->add_option("--ph-transform", est.ph_transform, "km or identity")
      ->check(CLI::IsMember({"km", "identity"}))
      ->capture_default_str();
  e->add_option("--seed", est.seed, "Random seed")->capture_default_str();
  e->add_option("--threads", est.threads, "Worker threads (0 = all cores)")->capture_default_str();

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Generate a dataset from a simulation scenario");
  sim.scenario.add(s);
  sim.grid.add(s);
  s->add_option("-o,--output-dir", sim.output_dir, "Output directory")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();

  StudyOptions st;
  auto* y = app.add_subcommand("study", "Run a replicated simulation study");
  st.scenario.add(y);
  st.grid.add(y);
  y->add_option("-o,--output-dir", st.output_dir, "Output directory")->capture_default_str();
  y->add_option("--seed", st.seed, "Random seed")->capture_default_str();
  y->add_option("--replications", st.replications, "Number of datasets")->capture_default_str();
  y->add_option("--methods", st.methods, "cox, kernel, cox_conditional")->delimiter(',');
  y->add_option("--iptw", st.iptw, "IPTW weighting (default: on for scenario II)");
  y->add_option("--truncate", st.truncate, "Truncate weights at this percentile");
  y->add_option("--bootstrap", st.bootstrap, "Bootstrap replications per dataset")->capture_default_str();
  y->add_flag("--no-reselect", st.no_reselect, "Reuse full-sample bandwidths in bootstrap replicates");
  y->add_option("--bias", st.bias, "Bandwidth-selection bias estimate: pilot or richardson")
      ->check(CLI::IsMember({"pilot", "richardson"}))
      ->capture_default_str();
  y->add_option("--threads", st.threads, "Worker threads (0 = all cores)")->capture_default_str();

  BalanceOptions bal;
  auto* b = app.add_subcommand("balance", "Propensity weights and covariate balance table");
  b->add_option("-i,--input", bal.input, "Input CSV")->required();
  b->add_option("-o,--output-dir", bal.output_dir, "Output directory")->capture_default_str();
  b->add_flag("--unstabilized", bal.unstabilized, "Use unstabilized weights");
  b->add_option("--truncate", bal.truncate, "Truncate weights at this percentile");

  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  std::string command = "hrcsens";
  try {
    app.parse(argv_rest);
    if (e->parsed()) {
      command = "estimate";
      cmd_estimate(est, out);
    } else if (s->parsed()) {
      command = "simulate";
      cmd_simulate(sim, out);
    } else if (y->parsed()) {
      command = "study";
      cmd_study(st, out);
    } else if (b->parsed()) {
      command = "balance";
      cmd_balance(bal, out);
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& ex) {
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    print_error(err, command, ex.what());
    return 2;
  } catch (const std::exception& ex) {
    print_error(err, command, ex.what());
    return 1;
  }
  return 0;
}

}  // namespace hrc::cli
