#include "hrc/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hrc/cox.hpp"

namespace hrc {

namespace {
constexpr double kUnstableRelative = 1e-8;
}

std::string_view to_string(Method m) noexcept { return m == Method::Cox ? "cox" : "kernel"; }

Method parse_method(std::string_view name) {
  if (name == "cox") return Method::Cox;
  if (name == "kernel") return Method::Kernel;
  throw Error("unknown method '" + std::string(name) + "' (expected cox or kernel)");
}

std::string_view to_string(PointFlag f) noexcept {
  switch (f) {
    case PointFlag::Ok:
      return "ok";
    case PointFlag::Unstable:
      return "unstable";
    case PointFlag::Unavailable:
      return "unavailable";
  }
  return "?";
}

TimeGrid GridRule::resolve(const SurvivalSample& sample) const {
  if (grid) return *grid;
  if (bounds) return TimeGrid::equally_spaced((*bounds)[0], (*bounds)[1], n_points);
  return build_time_grid(sample, n_points, min_at_risk);
}

void SensitivityRequest::validate() const {
  if (families.empty()) throw Error("sensitivity request needs at least one frailty family");
  if (taus.empty()) throw Error("sensitivity request needs at least one tau");
  for (auto f : families)
    for (double tau : taus) (void)tau_to_theta(f, tau);
  if (weighting.truncation && !(*weighting.truncation > 0.0 && *weighting.truncation <= 1.0))
    throw Error("truncation percentile must lie in (0, 1]");
}

SensitivityCurve kernel_hrc(const SmoothedHazard& arm1, const SmoothedHazard& arm0,
                            const FrailtySpec& spec) {
  if (!(arm1.grid == arm0.grid)) throw Error("smoothed hazards are on different grids");
  SensitivityCurve out;
  out.family = spec.family();
  out.theta = spec.theta();
  out.method = Method::Kernel;
  out.times = arm1.grid.points();
  const std::size_t n = out.times.size();
  out.estimates.resize(n);
  out.flags.resize(n);
  const double max0 = *std::max_element(arm0.values.begin(), arm0.values.end());
  for (std::size_t k = 0; k < n; ++k) {
    const double l1 = arm1.values[k];
    const double l0 = arm0.values[k];
    const double c1 = arm1.presmoothed_cumulative[k];
    const double c0 = arm0.presmoothed_cumulative[k];
    if (l0 == 0.0 ||
        (spec.family() == FrailtyFamily::PositiveStable && (c1 == 0.0 || c0 == 0.0))) {
      out.estimates[k] = std::numeric_limits<double>::quiet_NaN();
      out.flags[k] = PointFlag::Unavailable;
      continue;
    }
    out.estimates[k] = (l1 / l0) * varphi(spec, c1, c0);
    out.flags[k] = (l0 < kUnstableRelative * max0 || !(out.estimates[k] > 0.0) ||
                    !std::isfinite(out.estimates[k]))
                       ? PointFlag::Unstable
                       : PointFlag::Ok;
  }
  return out;
}

SensitivityFit fit_sensitivity(const SurvivalSample& sample, const SensitivityRequest& req) {
  req.validate();
  if (sample.arm_size(0) == 0 || sample.arm_size(1) == 0) throw Error("empty treatment arm");
  SensitivityFit fit;
  fit.grid = req.grid.resolve(sample);

  if (req.weighting.iptw) {
    const auto model = fit_logistic(sample);
    auto w = compute_weights(model, sample, req.weighting.stabilized);
    if (req.weighting.truncation) w = truncate_weights(w, *req.weighting.truncation);
    fit.weights = w.weights;
    fit.weight_vector = std::move(w);
  }

  if (req.method == Method::Cox) {
    const auto cox = fit_cox(sample, CovariateSpec::treatment_only(), fit.weights);
    fit.cox_beta = cox.beta[0];
    fit.cox_beta_se = cox.beta_se[0];
    fit.cox_baseline = cox.baseline_cumhaz;
    return fit;
  }

  const KernelSpec support(fit.grid.front(), fit.grid.back());
  const auto candidates =
      req.bandwidth_candidates.empty() ? default_candidates(support) : req.bandwidth_candidates;
  for (int arm : {0, 1}) {
    const auto inc = arm_increments(sample, arm, fit.weights);
    BandwidthPlan plan;
    if (req.fixed_bandwidths) {
      const auto& b = (*req.fixed_bandwidths)[static_cast<std::size_t>(arm)];
      if (b.size() != fit.grid.size()) throw Error("fixed bandwidths do not match the grid");
      plan = {fit.grid, b, candidates};
    } else {
      plan = select_bandwidths(inc, support, fit.grid, candidates, req.bias_estimator);
    }
    fit.smoothed[arm] = smooth_hazard(inc.increments, support, plan);
  }
  return fit;
}

std::vector<SensitivityCurve> curves_from_fit(const SensitivityFit& fit,
                                              const SensitivityRequest& req) {
  std::vector<SensitivityCurve> out;
  for (auto family : req.families) {
    for (double tau : req.taus) {
      const auto spec = tau_to_theta(family, tau);
      SensitivityCurve curve;
      if (req.method == Method::Kernel) {
        curve = kernel_hrc(*fit.smoothed[1], *fit.smoothed[0], spec);
      } else {
        CoxFit cox;
        cox.beta = Eigen::VectorXd::Constant(1, fit.cox_beta);
        cox.beta_se = Eigen::VectorXd::Constant(1, fit.cox_beta_se);
        cox.baseline_cumhaz = fit.cox_baseline;
        const auto hrc = cox_hrc(cox, spec, fit.grid);
        curve.family = family;
        curve.theta = spec.theta();
        curve.method = Method::Cox;
        curve.times = hrc.times;
        curve.estimates = hrc.estimates;
        curve.flags.resize(hrc.available.size());
        for (std::size_t k = 0; k < hrc.available.size(); ++k)
          curve.flags[k] = hrc.available[k] ? PointFlag::Ok : PointFlag::Unavailable;
      }
      curve.tau = tau;
      out.push_back(std::move(curve));
    }
  }
  return out;
}

std::vector<SensitivityCurve> run_sensitivity(const SurvivalSample& sample,
                                              const SensitivityRequest& req) {
  return curves_from_fit(fit_sensitivity(sample, req), req);
}

namespace {

std::string fmt_num(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::string sensitivity_csv(const std::vector<SensitivityCurve>& curves) {
  std::ostringstream os;
  os << "family,tau,theta,method,t,estimate,flag,se,ci_lo,ci_hi\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      os << to_string(c.family) << ',' << fmt_num(c.tau) << ',' << fmt_num(c.theta) << ','
         << to_string(c.method) << ',' << fmt_num(c.times[k]) << ',' << fmt_num(c.estimates[k])
         << ',' << to_string(c.flags[k]) << ',';
      if (!c.se.empty()) {
        os << fmt_num(c.se[k]) << ',' << fmt_num(c.ci_lo[k]) << ',' << fmt_num(c.ci_hi[k]);
      } else {
        os << ",,";
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace hrc
