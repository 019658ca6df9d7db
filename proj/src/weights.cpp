#include "hrc/weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hrc {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kScoreTolerance = 1e-9;
constexpr double kSeparationBound = 30.0;

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd logistic_design(const SurvivalSample& sample) {
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto k = static_cast<Eigen::Index>(sample.covariate_count());
  Eigen::MatrixXd x(n, k + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    const auto& z = sample[static_cast<std::size_t>(i)].covariates;
    for (Eigen::Index j = 0; j < k; ++j) x(i, j + 1) = z[static_cast<std::size_t>(j)];
  }
  return x;
}

}  // namespace

PropensityModel fit_logistic(const SurvivalSample& sample) {
  const auto n1 = sample.arm_size(1);
  if (n1 == 0 || n1 == sample.size())
    throw Error("propensity model needs both treatment values present");

  const Eigen::MatrixXd x = logistic_design(sample);
  const auto n = x.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = sample[static_cast<std::size_t>(i)].treatment;

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw Error("propensity design is not of full column rank");
  }

  PropensityModel model;
  model.coefficients = Eigen::VectorXd::Zero(x.cols());
  Eigen::MatrixXd information;
  for (int iter = 1; iter <= kMaxIterations; ++iter) {
    const Eigen::VectorXd eta = x * model.coefficients;
    Eigen::VectorXd mu(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    const Eigen::VectorXd score = x.transpose() * (y - mu);
    information = x.transpose() * w.asDiagonal() * x;
    model.iterations = iter - 1;
    if (score.cwiseAbs().maxCoeff() < kScoreTolerance) {
      model.converged = true;
      break;
    }
    // IRLS update: weighted least squares on the working response.
    model.coefficients += information.ldlt().solve(score);
    if (model.coefficients.cwiseAbs().maxCoeff() > kSeparationBound)
      throw Error("propensity separation");
  }
  if (!model.converged) {
    std::ostringstream os;
    os << "propensity model did not converge in " << kMaxIterations << " iterations";
    throw Error(os.str());
  }
  model.standard_errors = information.inverse().diagonal().cwiseSqrt();
  return model;
}

std::vector<double> propensity_scores(const PropensityModel& model, const SurvivalSample& sample) {
  const Eigen::MatrixXd x = logistic_design(sample);
  if (x.cols() != model.coefficients.size())
    throw Error("propensity model does not match the sample's covariates");
  const Eigen::VectorXd eta = x * model.coefficients;
  std::vector<double> out(sample.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = expit(eta[static_cast<Eigen::Index>(i)]);
  return out;
}

WeightVector compute_weights(const PropensityModel& model, const SurvivalSample& sample,
                             bool stabilized) {
  if (!model.converged) throw Error("propensity model has not converged");
  const auto pi = propensity_scores(model, sample);
  const auto n = static_cast<double>(sample.size());
  const double marginal[2] = {static_cast<double>(sample.arm_size(0)) / n,
                              static_cast<double>(sample.arm_size(1)) / n};
  // Intercept-only fits have the closed-form MLE pi = Pr(A = 1); using the
  // empirical arm shares directly makes stabilized weights exactly one.
  const bool intercept_only = sample.covariate_count() == 0;
  WeightVector out;
  out.stabilized = stabilized;
  out.weights.resize(sample.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (!(pi[i] > 0.0 && pi[i] < 1.0)) {
      std::ostringstream os;
      os << "record " << i << ": propensity score is numerically 0 or 1";
      throw Error(os.str());
    }
    const int a = sample[i].treatment;
    const double q = intercept_only ? marginal[a] : (a == 1 ? pi[i] : 1.0 - pi[i]);
    out.weights[i] = (stabilized ? marginal[a] : 1.0) / q;
  }
  return out;
}

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw Error("quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

WeightVector truncate_weights(const WeightVector& w, double percentile) {
  if (!(percentile > 0.0 && percentile <= 1.0))
    throw Error("truncation percentile must lie in (0, 1]");
  WeightVector out = w;
  out.truncation_percentile = percentile;
  if (w.weights.empty()) return out;
  const double cap = quantile_linear(w.weights, percentile);
  for (auto& v : out.weights) v = std::min(v, cap);
  return out;
}

namespace {

struct Moments {
  double mean[2] = {0.0, 0.0};
  double var[2] = {0.0, 0.0};
};

Moments arm_moments(const SurvivalSample& sample, std::size_t col, const std::vector<double>* w) {
  Moments m;
  double sw[2] = {0.0, 0.0};
  double sw2[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const int a = sample[i].treatment;
    const double wi = w ? (*w)[i] : 1.0;
    sw[a] += wi;
    sw2[a] += wi * wi;
    m.mean[a] += wi * sample[i].covariates[col];
  }
  for (int a : {0, 1}) m.mean[a] /= sw[a];
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const int a = sample[i].treatment;
    const double wi = w ? (*w)[i] : 1.0;
    const double d = sample[i].covariates[col] - m.mean[a];
    m.var[a] += wi * d * d;
  }
  // Reliability-weighted unbiased variance; equals the usual n - 1 form for unit weights.
  for (int a : {0, 1}) {
    const double denom = sw[a] - sw2[a] / sw[a];
    m.var[a] = denom > 0.0 ? m.var[a] / denom : 0.0;
  }
  return m;
}

}  // namespace

std::vector<BalanceRow> balance_diagnostics(const SurvivalSample& sample, const WeightVector* w,
                                            const std::vector<std::string>& names) {
  if (sample.covariate_count() == 0) throw Error("balance diagnostics need at least one covariate");
  if (sample.arm_size(0) == 0 || sample.arm_size(1) == 0) throw Error("empty treatment arm");
  if (w && w->weights.size() != sample.size())
    throw Error("weights length does not match the number of records");
  if (!names.empty() && names.size() != sample.covariate_count())
    throw Error("covariate names do not match the sample");

  auto smd = [](const Moments& m, bool& zero) {
    const double sd = std::sqrt((m.var[0] + m.var[1]) / 2.0);
    zero = !(sd > 0.0);
    return zero ? 0.0 : (m.mean[1] - m.mean[0]) / sd;
  };

  std::vector<BalanceRow> rows;
  for (std::size_t c = 0; c < sample.covariate_count(); ++c) {
    BalanceRow row;
    row.covariate = names.empty() ? "z" + std::to_string(c + 1) : names[c];
    row.smd_unweighted = smd(arm_moments(sample, c, nullptr), row.zero_sd_unweighted);
    if (w) {
      row.smd_weighted = smd(arm_moments(sample, c, &w->weights), row.zero_sd_weighted);
    } else {
      row.smd_weighted = row.smd_unweighted;
      row.zero_sd_weighted = row.zero_sd_unweighted;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hrc
