#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "hrc/frailty.hpp"
#include "hrc/survival.hpp"

namespace hrc {

/// Which columns enter the Cox design: the treatment indicator and/or a subset
/// of baseline covariate columns (0-based).
struct CovariateSpec {
  bool treatment = true;
  std::vector<std::size_t> covariates;

  static CovariateSpec treatment_only() { return {}; }
  std::size_t dimension() const noexcept { return (treatment ? 1 : 0) + covariates.size(); }
};

struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd beta_se;
  Eigen::MatrixXd covariance;
  StepFunction baseline_cumhaz;
  double loglik = 0.0;
  double loglik_null = 0.0;
  int iterations = 0;
  bool weighted = false;
  CovariateSpec design;
};

/// Breslow log partial likelihood, its score and observed information.
struct PartialLikelihood {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

Eigen::MatrixXd design_matrix(const SurvivalSample& sample, const CovariateSpec& design);

PartialLikelihood cox_partial_likelihood(const SurvivalSample& sample,
                                         const CovariateSpec& design,
                                         const Eigen::VectorXd& beta, WeightSpan weights = {});

/// Newton-Raphson from beta = 0 on the (weighted) Breslow partial likelihood.
CoxFit fit_cox(const SurvivalSample& sample, const CovariateSpec& design = {},
               WeightSpan weights = {});

/// Breslow estimator of the baseline cumulative hazard at the fitted beta.
StepFunction breslow_baseline(const CoxFit& fit, const SurvivalSample& sample,
                              WeightSpan weights = {});

enum class TimeTransform { Identity, KmRank };

struct PHTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  struct Term {
    double statistic;
    double p_value;
  };
  std::vector<Term> per_covariate;
};

/// Score test for a zero slope of the scaled Schoenfeld residuals against
/// transformed time (global and per covariate).
PHTestResult ph_score_test(const CoxFit& fit, const SurvivalSample& sample,
                           WeightSpan weights = {},
                           TimeTransform transform = TimeTransform::KmRank);

/// Causal hazard ratio curve implied by a treatment-only Cox fit.
struct CoxHrcCurve {
  std::vector<double> times;
  std::vector<double> estimates;
  std::vector<bool> available;
};

CoxHrcCurve cox_hrc(const CoxFit& fit, const FrailtySpec& spec, const TimeGrid& grid);

}  // namespace hrc
