#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "hrc/survival.hpp"

namespace hrc {

enum class Scenario {
  Ia,  ///< conditional hazard V exp{beta a + theta e^{beta a} t}: marginal Cox model holds
  Ib,  ///< conditional hazard V exp{1.5 t + beta a}: marginal hazards not proportional
  II,  ///< conditional hazard V gamma exp{beta a + beta_z Z}, confounded treatment
};

std::string_view to_string(Scenario s) noexcept;
Scenario parse_scenario(std::string_view name);

struct ScenarioSpec {
  Scenario scenario = Scenario::Ia;
  double tau = 0.7;
  std::size_t n = 2000;
  /// Ia/Ib: target censoring fraction of an exponential censoring time.
  double censoring_fraction = 0.2;
  /// II: administrative censoring time.
  double administrative_time = 10.0;
  double beta = -0.69314718055994530942;  // log 0.5
  double beta_z = 0.0;
  double event_rate_target = 0.05;
  /// Calibrated values; filled by resolve() when absent.
  std::optional<double> censoring_rate;
  std::optional<double> event_scale;

  double theta() const;
  void validate() const;
};

struct SimulatedDataset {
  SurvivalSample sample;
  std::vector<double> frailty;
  std::vector<double> t0;
  std::vector<double> t1;
  std::vector<double> censoring;
};

struct CalibrationResult {
  double value = 0.0;
  double achieved = 0.0;  // Monte-Carlo fraction at `value`
  bool flagged = false;   // boundary of the search bracket was returned
};

/// Exponential censoring rate giving the target censoring fraction (Ia/Ib).
CalibrationResult calibrate_censoring_rate(const ScenarioSpec& spec, std::uint64_t seed,
                                           std::size_t pilot_n = 100000);

/// Scale gamma giving the target fraction of events before the administrative
/// censoring time (II).
CalibrationResult calibrate_event_scale(const ScenarioSpec& spec, std::uint64_t seed,
                                        std::size_t pilot_n = 100000);

/// Copy of `spec` with calibrated quantities filled in.
ScenarioSpec resolve(ScenarioSpec spec, std::uint64_t seed);

SimulatedDataset generate(const ScenarioSpec& spec, std::uint64_t seed);

/// Closed-form causal hazard ratio of the data-generating mechanism.
double true_hrc(const ScenarioSpec& spec, double t);

}  // namespace hrc
