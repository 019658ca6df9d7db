#include "hrc/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

namespace hrc {

namespace {

constexpr int kMaxIterations = 50;
constexpr double kScoreTolerance = 1e-9;
constexpr double kLoglikTolerance = 1e-12;
constexpr double kSeparationBound = 50.0;

// Subjects ordered by decreasing time so risk sets accumulate as we sweep.
std::vector<std::size_t> descending_order(const SurvivalSample& sample) {
  std::vector<std::size_t> idx(sample.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return sample[a].time > sample[b].time; });
  return idx;
}

double weight_of(WeightSpan weights, std::size_t i) { return weights.empty() ? 1.0 : weights[i]; }

// Per distinct event time: weighted risk-set moments evaluated at beta.
struct RiskMoments {
  double time;
  double events;  // weighted event count
  double s0;
  Eigen::VectorXd s1;
  Eigen::MatrixXd s2;
  Eigen::VectorXd event_x;  // weighted sum of covariates over events
};

std::vector<RiskMoments> risk_moments(const SurvivalSample& sample, const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& beta, WeightSpan weights,
                                      bool second_moment, double* eta_shift) {
  const auto p = static_cast<Eigen::Index>(beta.size());
  Eigen::VectorXd eta = x * beta;
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  if (eta_shift) *eta_shift = shift;

  const auto order = descending_order(sample);
  std::vector<RiskMoments> out;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = sample[order[i]].time;
    std::size_t j = i;
    double d = 0.0;
    Eigen::VectorXd ex = Eigen::VectorXd::Zero(p);
    for (; j < order.size() && sample[order[j]].time == t; ++j) {
      const auto k = order[j];
      const double w = weight_of(weights, k);
      const double r = w * std::exp(eta[static_cast<Eigen::Index>(k)] - shift);
      const auto xk = x.row(static_cast<Eigen::Index>(k)).transpose();
      s0 += r;
      s1 += r * xk;
      if (second_moment) s2 += r * xk * xk.transpose();
      if (sample[k].event) {
        d += w;
        ex += w * xk;
      }
    }
    if (d > 0.0) out.push_back({t, d, s0, s1, second_moment ? s2 : Eigen::MatrixXd(), ex});
    i = j;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace

Eigen::MatrixXd design_matrix(const SurvivalSample& sample, const CovariateSpec& design) {
  const auto p = static_cast<Eigen::Index>(design.dimension());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(sample.size()), p);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    Eigen::Index c = 0;
    const auto row = static_cast<Eigen::Index>(i);
    if (design.treatment) x(row, c++) = sample[i].treatment;
    for (auto col : design.covariates) {
      if (col >= sample.covariate_count()) throw Error("covariate column out of range");
      x(row, c++) = sample[i].covariates[col];
    }
  }
  return x;
}

PartialLikelihood cox_partial_likelihood(const SurvivalSample& sample,
                                         const CovariateSpec& design,
                                         const Eigen::VectorXd& beta, WeightSpan weights) {
  check_weights(sample, weights);
  const auto x = design_matrix(sample, design);
  if (beta.size() != x.cols()) throw Error("beta length does not match the design");
  double shift = 0.0;
  const auto moments = risk_moments(sample, x, beta, weights, true, &shift);
  const auto p = x.cols();
  PartialLikelihood out;
  out.score = Eigen::VectorXd::Zero(p);
  out.information = Eigen::MatrixXd::Zero(p, p);
  for (const auto& m : moments) {
    const Eigen::VectorXd xbar = m.s1 / m.s0;
    out.loglik += m.event_x.dot(beta) - m.events * (std::log(m.s0) + shift);
    out.score += m.event_x - m.events * xbar;
    out.information += m.events * (m.s2 / m.s0 - xbar * xbar.transpose());
  }
  return out;
}

CoxFit fit_cox(const SurvivalSample& sample, const CovariateSpec& design, WeightSpan weights) {
  check_weights(sample, weights);
  if (sample.event_count() == 0) throw Error("Cox model requires at least one event");
  const auto p = static_cast<Eigen::Index>(design.dimension());
  if (p == 0) throw Error("Cox model requires at least one covariate");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto current = cox_partial_likelihood(sample, design, beta, weights);
  const double loglik_null = current.loglik;
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(current.information);
    const double scale = std::max(1.0, current.information.diagonal().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * scale)
      throw Error("design matrix is not of full column rank on the event set");
  }

  std::ostringstream trace;
  int iter = 0;
  bool converged = current.score.cwiseAbs().maxCoeff() < kScoreTolerance;
  while (!converged && iter < kMaxIterations) {
    ++iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(current.information);
    Eigen::VectorXd step = ldlt.solve(current.score);
    Eigen::VectorXd candidate = beta + step;
    auto next = cox_partial_likelihood(sample, design, candidate, weights);
    // Step halving keeps Newton monotone on flat or badly scaled likelihoods.
    for (int half = 0; half < 30 && !(next.loglik >= current.loglik - 1e-12 * std::abs(current.loglik));
         ++half) {
      step *= 0.5;
      candidate = beta + step;
      next = cox_partial_likelihood(sample, design, candidate, weights);
    }
    trace << "iter " << iter << ": loglik " << next.loglik << " max|score| "
          << next.score.cwiseAbs().maxCoeff() << '\n';
    const double change = std::abs(next.loglik - current.loglik) / std::max(1.0, std::abs(current.loglik));
    beta = candidate;
    current = std::move(next);
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) throw Error("separation detected");
    converged = current.score.cwiseAbs().maxCoeff() < kScoreTolerance || change < kLoglikTolerance;
  }
  if (!converged) throw Error("Cox Newton-Raphson did not converge:\n" + trace.str());

  CoxFit fit;
  fit.beta = beta;
  fit.loglik = current.loglik;
  fit.loglik_null = loglik_null;
  fit.iterations = iter;
  fit.weighted = !weights.empty();
  fit.design = design;
  fit.covariance = current.information.inverse();
  fit.beta_se = fit.covariance.diagonal().cwiseSqrt();
  if (!fit.beta.allFinite() || !(fit.beta_se.array() > 0.0).all())
    throw Error("Cox fit produced a non-finite estimate or standard error");
  fit.baseline_cumhaz = breslow_baseline(fit, sample, weights);
  return fit;
}

StepFunction breslow_baseline(const CoxFit& fit, const SurvivalSample& sample, WeightSpan weights) {
  check_weights(sample, weights);
  const auto x = design_matrix(sample, fit.design);
  double shift = 0.0;
  const auto moments = risk_moments(sample, x, fit.beta, weights, false, &shift);
  std::vector<double> times;
  std::vector<double> inc;
  times.reserve(moments.size());
  inc.reserve(moments.size());
  const double unshift = std::exp(-shift);
  for (const auto& m : moments) {
    times.push_back(m.time);
    inc.push_back(m.events * unshift / m.s0);
  }
  return StepFunction(std::move(times), std::move(inc));
}

PHTestResult ph_score_test(const CoxFit& fit, const SurvivalSample& sample, WeightSpan weights,
                           TimeTransform transform) {
  check_weights(sample, weights);
  const auto x = design_matrix(sample, fit.design);
  const auto p = x.cols();
  std::size_t distinct_event_times = 0;
  {
    std::vector<double> et;
    for (const auto& r : sample.records())
      if (r.event) et.push_back(r.time);
    std::sort(et.begin(), et.end());
    distinct_event_times = static_cast<std::size_t>(std::unique(et.begin(), et.end()) - et.begin());
  }
  if (distinct_event_times < static_cast<std::size_t>(p) + 2)
    throw Error("proportional hazards test: insufficient events");

  double shift = 0.0;
  const auto moments = risk_moments(sample, x, fit.beta, weights, true, &shift);

  StepFunction km;
  if (transform == TimeTransform::KmRank) km = kaplan_meier_pooled(sample, weights);
  std::vector<double> g(moments.size());
  double g_mean = 0.0;
  double d_total = 0.0;
  for (std::size_t k = 0; k < moments.size(); ++k) {
    g[k] = transform == TimeTransform::KmRank ? 1.0 - km.value_before(moments[k].time)
                                              : moments[k].time;
    g_mean += moments[k].events * g[k];
    d_total += moments[k].events;
  }
  g_mean /= d_total;

  Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd i_bb = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd i_gb = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd i_gg = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t k = 0; k < moments.size(); ++k) {
    const auto& m = moments[k];
    const double gk = g[k] - g_mean;
    const Eigen::VectorXd xbar = m.s1 / m.s0;
    const Eigen::MatrixXd v = m.events * (m.s2 / m.s0 - xbar * xbar.transpose());
    u += gk * (m.event_x - m.events * xbar);
    i_bb += v;
    i_gb += gk * v;
    i_gg += gk * gk * v;
  }
  Eigen::LDLT<Eigen::MatrixXd> bb(i_bb);
  if (bb.info() != Eigen::Success || !bb.isPositive())
    throw Error("proportional hazards test: singular information");
  const Eigen::MatrixXd cond = i_gg - i_gb * bb.solve(i_gb.transpose());
  Eigen::LDLT<Eigen::MatrixXd> cc(cond);
  const double scale = std::max(1e-300, cond.diagonal().cwiseAbs().maxCoeff());
  if (cc.info() != Eigen::Success || !cc.isPositive() || cc.vectorD().minCoeff() <= 1e-12 * scale)
    throw Error("proportional hazards test: singular residual covariance");

  PHTestResult out;
  out.df = static_cast<std::size_t>(p);
  out.statistic = u.dot(cc.solve(u));
  boost::math::chi_squared global(static_cast<double>(p));
  out.p_value = std::clamp(boost::math::cdf(boost::math::complement(global, std::max(0.0, out.statistic))), 0.0, 1.0);
  boost::math::chi_squared one(1.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double s = u[j] * u[j] / cond(j, j);
    out.per_covariate.push_back(
        {s, std::clamp(boost::math::cdf(boost::math::complement(one, std::max(0.0, s))), 0.0, 1.0)});
  }
  return out;
}

CoxHrcCurve cox_hrc(const CoxFit& fit, const FrailtySpec& spec, const TimeGrid& grid) {
  if (!(fit.design.treatment && fit.design.covariates.empty()))
    throw Error("cox_hrc requires a treatment-only marginal Cox fit");
  const double beta = fit.beta[0];
  const double hr = std::exp(beta);
  CoxHrcCurve out;
  out.times = grid.points();
  out.estimates.resize(grid.size());
  out.available.assign(grid.size(), true);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double base = fit.baseline_cumhaz.value(grid[k]);
    if (spec.family() == FrailtyFamily::Gamma) {
      out.estimates[k] = hr * std::exp(spec.theta() * base * (hr - 1.0));
    } else if (spec.family() == FrailtyFamily::PositiveStable && base == 0.0) {
      out.estimates[k] = std::numeric_limits<double>::quiet_NaN();
      out.available[k] = false;
    } else {
      out.estimates[k] = hr * varphi(spec, base * hr, base);
    }
  }
  return out;
}

}  // namespace hrc
