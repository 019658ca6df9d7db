#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hrc/sensitivity.hpp"
#include "hrc/simgen.hpp"

namespace hrc {

/// Estimators compared in a simulation study. ConditionalCox is exp(beta_A)
/// from a Cox model on treatment and all covariates, ignoring the frailty.
enum class StudyMethod { Cox, Kernel, ConditionalCox };
std::string_view to_string(StudyMethod m) noexcept;
StudyMethod parse_study_method(std::string_view name);

struct StudyConfig {
  ScenarioSpec scenario;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::vector<StudyMethod> methods{StudyMethod::Cox, StudyMethod::Kernel};
  /// Grid: 51 points; data-driven from the first dataset unless bounds are set.
  std::size_t grid_points = 51;
  std::size_t min_at_risk = 10;
  std::optional<std::array<double, 2>> grid_bounds;
  /// IPTW weighting (stabilized, optionally truncated) for the Cox and kernel backends.
  bool iptw = false;
  std::optional<double> truncation;
  /// Bootstrap replicates per dataset; 0 disables SE and coverage.
  std::size_t bootstrap = 0;
  bool reselect_bandwidths = true;
  BiasEstimator bias_estimator = BiasEstimator::Pilot;
  double confidence_level = 0.95;
  unsigned threads = 1;

  void validate() const;
};

struct StudyPoint {
  double t = 0.0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double relative_bias = 0.0;
  double emp_sd = 0.0;   // NaN with fewer than 2 usable replications
  double est_se = 0.0;   // NaN without bootstrap
  double se_ratio = 0.0;
  double coverage = 0.0;
  std::size_t n_valid = 0;
};

struct StudyMethodSummary {
  StudyMethod method;
  std::vector<StudyPoint> points;
  /// estimates[replication][point]; NaN when unusable.
  std::vector<std::vector<double>> estimates;
};

struct StudySummary {
  ScenarioSpec scenario;  // resolved (calibrated) specification
  TimeGrid grid;
  std::vector<StudyMethodSummary> methods;
  std::size_t failed_replications = 0;
};

StudySummary run_study(const StudyConfig& cfg);

/// method,t,true,mean,bias,rel_bias,emp_sd,est_se,se_ratio,coverage,n_valid
std::string study_csv(const StudySummary& summary);

}  // namespace hrc
