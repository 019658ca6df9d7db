#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrc/survival.hpp"

namespace hrc {

/// Logistic model for Pr(A = 1 | Z): intercept followed by one slope per covariate.
struct PropensityModel {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  bool converged = false;
  int iterations = 0;
};

PropensityModel fit_logistic(const SurvivalSample& sample);

/// Fitted probabilities for every record.
std::vector<double> propensity_scores(const PropensityModel& model, const SurvivalSample& sample);

struct WeightVector {
  std::vector<double> weights;
  bool stabilized = false;
  std::optional<double> truncation_percentile;
};

WeightVector compute_weights(const PropensityModel& model, const SurvivalSample& sample,
                             bool stabilized);

/// Empirical quantile by linear interpolation between order statistics
/// (position p * (n - 1) in the sorted values).
double quantile_linear(std::vector<double> values, double p);

WeightVector truncate_weights(const WeightVector& w, double percentile = 0.99);

struct BalanceRow {
  std::string covariate;
  double smd_unweighted = 0.0;
  double smd_weighted = 0.0;
  bool zero_sd_unweighted = false;
  bool zero_sd_weighted = false;
};

/// Standardized mean differences (arm 1 minus arm 0 over the pooled SD).
/// Without weights the weighted column repeats the unweighted one.
std::vector<BalanceRow> balance_diagnostics(const SurvivalSample& sample,
                                            const WeightVector* w = nullptr,
                                            const std::vector<std::string>& names = {});

}  // namespace hrc
