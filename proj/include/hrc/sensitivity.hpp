#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hrc/frailty.hpp"
#include "hrc/kernel.hpp"
#include "hrc/survival.hpp"
#include "hrc/weights.hpp"

namespace hrc {

enum class Method { Cox, Kernel };
std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view name);

enum class PointFlag { Ok, Unstable, Unavailable };
std::string_view to_string(PointFlag f) noexcept;

/// How the estimation grid is obtained.
struct GridRule {
  std::size_t n_points = 51;
  std::size_t min_at_risk = 10;
  /// Fixed [t_min, t_max] instead of the data-driven range.
  std::optional<std::array<double, 2>> bounds;
  /// A fully resolved grid overrides everything above.
  std::optional<TimeGrid> grid;

  TimeGrid resolve(const SurvivalSample& sample) const;
};

struct Weighting {
  bool iptw = false;
  bool stabilized = true;
  std::optional<double> truncation;  // percentile in (0, 1]
};

struct SensitivityRequest {
  Method method = Method::Kernel;
  std::vector<FrailtyFamily> families{FrailtyFamily::Gamma};
  std::vector<double> taus{0.7};
  GridRule grid;
  Weighting weighting;
  /// Kernel backend: candidate bandwidths (default 21 geometric values).
  std::vector<double> bandwidth_candidates;
  /// Kernel backend: per-arm bandwidth plans to reuse instead of selecting.
  std::optional<std::array<std::vector<double>, 2>> fixed_bandwidths;
  BiasEstimator bias_estimator = BiasEstimator::Pilot;

  void validate() const;
};

struct SensitivityCurve {
  FrailtyFamily family = FrailtyFamily::Gamma;
  double tau = 0.0;
  double theta = 0.0;
  Method method = Method::Kernel;
  std::vector<double> times;
  std::vector<double> estimates;
  std::vector<PointFlag> flags;
  // Filled by the bootstrap; empty otherwise.
  std::vector<double> se;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::vector<bool> ci_flagged;
};

/// Plug-in causal hazard ratio from two smoothed arm hazards on one grid.
SensitivityCurve kernel_hrc(const SmoothedHazard& arm1, const SmoothedHazard& arm0,
                            const FrailtySpec& spec);

/// Everything estimated once per sample, shared by all (family, tau) curves.
struct SensitivityFit {
  TimeGrid grid;
  std::vector<double> weights;  // empty when unweighted
  std::optional<WeightVector> weight_vector;
  // Kernel backend
  std::optional<SmoothedHazard> smoothed[2];
  // Cox backend
  double cox_beta = 0.0;
  double cox_beta_se = 0.0;
  StepFunction cox_baseline;
};

SensitivityFit fit_sensitivity(const SurvivalSample& sample, const SensitivityRequest& req);

std::vector<SensitivityCurve> curves_from_fit(const SensitivityFit& fit,
                                              const SensitivityRequest& req);

std::vector<SensitivityCurve> run_sensitivity(const SurvivalSample& sample,
                                              const SensitivityRequest& req);

/// Long-format CSV: family,tau,theta,method,t,estimate,flag,se,ci_lo,ci_hi
std::string sensitivity_csv(const std::vector<SensitivityCurve>& curves);

}  // namespace hrc
