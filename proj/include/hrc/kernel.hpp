#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "hrc/survival.hpp"

namespace hrc {

/// Epanechnikov boundary kernel K(u; q) on [-1, q]; zero outside. q = 1 is the
/// ordinary Epanechnikov kernel 0.75 (1 - u^2).
double boundary_kernel(double u, double q);

/// Support [beg, end] of the event times for boundary correction.
class KernelSpec {
 public:
  KernelSpec(double beg, double end);
  double beg() const noexcept { return beg_; }
  double end() const noexcept { return end_; }
  double width() const noexcept { return end_ - beg_; }

 private:
  double beg_;
  double end_;
};

/// K_t(u) for estimation point t and bandwidth b: the boundary branch is picked
/// by t's distance to the nearer end of the support.
double local_kernel(const KernelSpec& spec, double t, double b, double u);

/// Smallest y and largest y at which K_t(y) can be nonzero.
struct KernelWindow {
  double lo;
  double hi;
};
KernelWindow local_kernel_window(const KernelSpec& spec, double t, double b);

/// Nelson-Aalen increments of one arm together with the event weights the
/// variance estimator needs.
struct ArmIncrements {
  StepFunction increments;
  std::vector<double> event_times;    // one entry per event (ties repeated), sorted
  std::vector<double> event_weights;  // matching weights
};

ArmIncrements arm_increments(const SurvivalSample& sample, int arm, WeightSpan weights = {});

/// b^-1 sum K_t((t - T_i) / b) dLambda(T_i); may be negative near boundaries.
double kernel_hazard_raw(const StepFunction& increments, const KernelSpec& spec, double t, double b);

struct BandwidthPlan {
  TimeGrid grid;
  std::vector<double> local_bandwidth;
  std::vector<double> candidates;

  /// Same bandwidth at every grid point.
  static BandwidthPlan fixed(const TimeGrid& grid, double b);
};

struct SmoothedHazard {
  TimeGrid grid;
  std::vector<double> values;      // smoothed hazard, clipped at zero
  BandwidthPlan plan;
  std::vector<double> cumulative;  // trapezoid integral of `values`
  std::vector<double> presmoothed_cumulative;  // Nelson-Aalen at grid points
};

SmoothedHazard smooth_hazard(const StepFunction& increments, const KernelSpec& spec,
                             const BandwidthPlan& plan);

struct LocalMse {
  double variance = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  bool clamped = false;  // survival of uncensored times hit zero in the window
};

/// How the local bias is estimated during bandwidth selection.
///  Pilot: integral of K_t(y) pilot(t - b y) dy minus pilot(t), where pilot is
///    the hazard smoothed with pilot_bandwidth().
///  Richardson: (lambda_2b(t) - lambda_b(t)) / 3. Only trustworthy for small b;
///    it shrinks towards zero once both smooths approach the global average.
enum class BiasEstimator { Pilot, Richardson };

std::string_view to_string(BiasEstimator e) noexcept;
BiasEstimator parse_bias_estimator(std::string_view name);

/// (end - beg) / (8 m^0.2) for m events.
double pilot_bandwidth(const KernelSpec& spec, std::size_t events);

/// Local variance, bias and MSE of the smoothed hazard at t with bandwidth b.
LocalMse estimate_local_mse(const ArmIncrements& arm, const KernelSpec& spec, double t, double b,
                            BiasEstimator bias = BiasEstimator::Pilot);

/// 21 geometrically spaced bandwidths from width/50 to width/2.
std::vector<double> default_candidates(const KernelSpec& spec);

BandwidthPlan select_bandwidths(const ArmIncrements& arm, const KernelSpec& spec,
                                const TimeGrid& grid, std::vector<double> candidates,
                                BiasEstimator bias = BiasEstimator::Pilot);

/// Gauss-Legendre rule on [-1, 1] with 64 nodes.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const QuadratureRule& gauss_legendre_64();

}  // namespace hrc
