#include "hrc/study.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hrc/bootstrap.hpp"
#include "hrc/cox.hpp"
#include "hrc/parallel.hpp"
#include "hrc/rng.hpp"

namespace hrc {

namespace {

constexpr std::uint64_t kDatasetLabel = 0x5EED;
constexpr std::uint64_t kStudyBootstrapLabel = 0xB5;

struct ReplicateResult {
  bool ok = false;
  // [method][point]
  std::vector<std::vector<double>> estimate;
  std::vector<std::vector<double>> se;
  std::vector<std::vector<double>> lo;
  std::vector<std::vector<double>> hi;
};

}  // namespace

std::string_view to_string(StudyMethod m) noexcept {
  switch (m) {
    case StudyMethod::Cox:
      return "cox";
    case StudyMethod::Kernel:
      return "kernel";
    case StudyMethod::ConditionalCox:
      return "cox_conditional";
  }
  return "?";
}

StudyMethod parse_study_method(std::string_view name) {
  if (name == "cox") return StudyMethod::Cox;
  if (name == "kernel") return StudyMethod::Kernel;
  if (name == "cox_conditional") return StudyMethod::ConditionalCox;
  throw Error("unknown study method '" + std::string(name) +
              "' (expected cox, kernel or cox_conditional)");
}

void StudyConfig::validate() const {
  scenario.validate();
  if (replications < 1) throw Error("study needs at least one replication");
  if (methods.empty()) throw Error("study needs at least one method");
  if (bootstrap == 1) throw Error("bootstrap needs at least 2 replications");
}

StudySummary run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudySummary summary;
  summary.scenario = resolve(cfg.scenario, cfg.seed);
  const auto& spec = summary.scenario;
  auto dataset_seed = [&](std::size_t r) { return derive_seed(cfg.seed, kDatasetLabel + r); };

  // The grid is fixed across replications, computed from the first dataset.
  if (cfg.grid_bounds) {
    summary.grid = TimeGrid::equally_spaced((*cfg.grid_bounds)[0], (*cfg.grid_bounds)[1], cfg.grid_points);
  } else {
    const auto first = generate(spec, dataset_seed(0));
    summary.grid = build_time_grid(first.sample, cfg.grid_points, cfg.min_at_risk);
  }
  const auto& grid = summary.grid;
  const std::size_t n_points = grid.size();
  const std::size_t n_methods = cfg.methods.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto request_for = [&](Method m) {
    SensitivityRequest req;
    req.method = m;
    req.families = {FrailtyFamily::Gamma};
    req.taus = {spec.tau};
    req.grid.grid = grid;
    req.weighting.iptw = cfg.iptw;
    req.weighting.stabilized = true;
    req.weighting.truncation = cfg.truncation;
    req.bias_estimator = cfg.bias_estimator;
    return req;
  };

  std::vector<ReplicateResult> results(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    ReplicateResult& res = results[r];
    auto blank = [&] { return std::vector<std::vector<double>>(n_methods, std::vector<double>(n_points, nan)); };
    res.estimate = blank();
    res.se = blank();
    res.lo = blank();
    res.hi = blank();
    try {
      const auto data = generate(spec, dataset_seed(r));
      for (std::size_t m = 0; m < n_methods; ++m) {
        const auto method = cfg.methods[m];
        if (method == StudyMethod::ConditionalCox) {
          CovariateSpec design;
          for (std::size_t c = 0; c < data.sample.covariate_count(); ++c) design.covariates.push_back(c);
          const auto fit = fit_cox(data.sample, design);
          std::fill(res.estimate[m].begin(), res.estimate[m].end(), std::exp(fit.beta[0]));
          continue;
        }
        const auto req = request_for(method == StudyMethod::Cox ? Method::Cox : Method::Kernel);
        if (cfg.bootstrap >= 2) {
          BootstrapConfig bc;
          bc.replications = cfg.bootstrap;
          bc.seed = derive_seed(dataset_seed(r), kStudyBootstrapLabel);
          bc.confidence_level = cfg.confidence_level;
          bc.reselect_bandwidths = cfg.reselect_bandwidths;
          const auto boot = bootstrap_curves(data.sample, req, bc);
          const auto& c = boot.curves.front();
          for (std::size_t k = 0; k < n_points; ++k) {
            if (c.flags[k] != PointFlag::Ok) continue;
            res.estimate[m][k] = c.estimates[k];
            res.se[m][k] = c.se[k];
            res.lo[m][k] = c.ci_lo[k];
            res.hi[m][k] = c.ci_hi[k];
          }
        } else {
          const auto c = run_sensitivity(data.sample, req).front();
          for (std::size_t k = 0; k < n_points; ++k)
            if (c.flags[k] == PointFlag::Ok) res.estimate[m][k] = c.estimates[k];
        }
      }
      res.ok = true;
    } catch (const Error&) {
      res.ok = false;
    }
  });

  for (const auto& r : results)
    if (!r.ok) ++summary.failed_replications;
  if (summary.failed_replications == cfg.replications) throw Error("every study replication failed");

  for (std::size_t m = 0; m < n_methods; ++m) {
    StudyMethodSummary ms;
    ms.method = cfg.methods[m];
    for (const auto& r : results)
      if (r.ok) ms.estimates.push_back(r.estimate[m]);
    for (std::size_t k = 0; k < n_points; ++k) {
      StudyPoint p;
      p.t = grid[k];
      p.truth = true_hrc(spec, p.t);
      double sum = 0.0, sum_se = 0.0;
      std::size_t n_se = 0, covered = 0, n_ci = 0;
      std::vector<double> vals;
      for (const auto& r : results) {
        if (!r.ok || std::isnan(r.estimate[m][k])) continue;
        vals.push_back(r.estimate[m][k]);
        sum += r.estimate[m][k];
        if (!std::isnan(r.se[m][k])) {
          sum_se += r.se[m][k];
          ++n_se;
        }
        if (!std::isnan(r.lo[m][k]) && !std::isnan(r.hi[m][k])) {
          ++n_ci;
          if (r.lo[m][k] <= p.truth && p.truth <= r.hi[m][k]) ++covered;
        }
      }
      p.n_valid = vals.size();
      p.mean = vals.empty() ? nan : sum / static_cast<double>(vals.size());
      p.bias = p.mean - p.truth;
      p.relative_bias = p.bias / p.truth;
      if (vals.size() >= 2) {
        double ss = 0.0;
        for (double v : vals) ss += (v - p.mean) * (v - p.mean);
        p.emp_sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
      } else {
        p.emp_sd = nan;
      }
      p.est_se = n_se > 0 ? sum_se / static_cast<double>(n_se) : nan;
      p.se_ratio = p.est_se / p.emp_sd;
      p.coverage = n_ci > 0 ? static_cast<double>(covered) / static_cast<double>(n_ci) : nan;
      ms.points.push_back(p);
    }
    summary.methods.push_back(std::move(ms));
  }
  return summary;
}

namespace {

std::string fmt_num(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::string study_csv(const StudySummary& summary) {
  std::ostringstream os;
  os << "method,t,true,mean,bias,rel_bias,emp_sd,est_se,se_ratio,coverage,n_valid\n";
  for (const auto& ms : summary.methods) {
    for (const auto& p : ms.points) {
      os << to_string(ms.method) << ',' << fmt_num(p.t) << ',' << fmt_num(p.truth) << ','
         << fmt_num(p.mean) << ',' << fmt_num(p.bias) << ',' << fmt_num(p.relative_bias) << ','
         << fmt_num(p.emp_sd) << ',' << fmt_num(p.est_se) << ',' << fmt_num(p.se_ratio) << ','
         << fmt_num(p.coverage) << ',' << p.n_valid << '\n';
    }
  }
  return os.str();
}

}  // namespace hrc
