#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hrc/error.hpp"

namespace hrc {

/// One row of observed data: follow-up time X, event indicator, arm and
/// baseline covariates.
struct SubjectRecord {
  std::string id;
  double time = 0.0;
  bool event = false;
  int treatment = 0;
  std::vector<double> covariates;
};

/// Immutable collection of subject records. Validates on construction.
class SurvivalSample {
 public:
  explicit SurvivalSample(std::vector<SubjectRecord> records);

  const std::vector<SubjectRecord>& records() const noexcept { return records_; }
  const SubjectRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t covariate_count() const noexcept { return covariate_count_; }
  std::size_t arm_size(int arm) const noexcept;
  std::size_t event_count() const noexcept;
  std::size_t arm_event_count(int arm) const noexcept;

  /// Rows reordered by `index` (repeats allowed). Used by the bootstrap.
  SurvivalSample subset(std::span<const std::size_t> index) const;

 private:
  std::vector<SubjectRecord> records_;
  std::size_t covariate_count_ = 0;
};

/// Right-continuous step function: value(t) = base + sum of increments at
/// jump times <= t.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> jump_times, std::vector<double> increments,
               double base = 0.0);

  double value(double t) const;
  /// Value just before t (left limit).
  double value_before(double t) const;
  double base() const noexcept { return base_; }
  const std::vector<double>& jump_times() const noexcept { return times_; }
  const std::vector<double>& increments() const noexcept { return increments_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }

  friend bool operator==(const StepFunction&, const StepFunction&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> increments_;
  std::vector<double> partial_;  // running sums
  double base_ = 0.0;
};

/// Equally spaced estimation grid.
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Throws when hi <= lo or count < 2.
  static TimeGrid equally_spaced(double lo, double hi, std::size_t count);

  const std::vector<double>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  double operator[](std::size_t i) const { return points_[i]; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> points_;
};

/// Optional per-subject weights; an empty span means unit weights.
using WeightSpan = std::span<const double>;

StepFunction nelson_aalen(const SurvivalSample& sample, int arm,
                          WeightSpan weights = {});

/// Product-limit survival curve (base 1, non-positive increments).
StepFunction kaplan_meier(const SurvivalSample& sample, int arm,
                          WeightSpan weights = {});

/// Product-limit curve over both arms pooled.
StepFunction kaplan_meier_pooled(const SurvivalSample& sample,
                                 WeightSpan weights = {});

struct LogRankResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

LogRankResult logrank_test(const SurvivalSample& sample, WeightSpan weights = {});

/// Grid from the first pooled event time to the latest time at which at least
/// `min_at_risk` subjects remain at risk in both arms.
TimeGrid build_time_grid(const SurvivalSample& sample, std::size_t n_points = 51,
                         std::size_t min_at_risk = 10);

/// Number of subjects in `arm` with time >= t.
std::size_t at_risk(const SurvivalSample& sample, int arm, double t);

/// Checks the weight contract (length and positivity); no-op for an empty span.
void check_weights(const SurvivalSample& sample, WeightSpan weights);

}  // namespace hrc
