#include "hrc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/legendre.hpp>

namespace hrc {

double boundary_kernel(double u, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw Error("boundary kernel requires q in [0, 1]");
  if (u < -1.0 || u > q) return 0.0;
  const double scale = 12.0 / std::pow(1.0 + q, 4);
  return scale * (u + 1.0) * (u * (1.0 - 2.0 * q) + (3.0 * q * q - 2.0 * q + 1.0) / 2.0);
}

KernelSpec::KernelSpec(double beg, double end) : beg_(beg), end_(end) {
  if (!std::isfinite(beg) || !std::isfinite(end) || !(beg < end))
    throw Error("kernel support must be a finite interval with beg < end");
}

namespace {

enum class Branch { Left, Interior, Right };

struct BranchChoice {
  Branch branch;
  double q;
};

BranchChoice choose_branch(const KernelSpec& spec, double t, double b) {
  const double left = t - spec.beg();
  const double right = spec.end() - t;
  if (left < b && left <= right) return {Branch::Left, std::max(0.0, left / b)};
  if (right < b) return {Branch::Right, std::max(0.0, right / b)};
  return {Branch::Interior, 1.0};
}

}  // namespace

double local_kernel(const KernelSpec& spec, double t, double b, double u) {
  const auto c = choose_branch(spec, t, b);
  switch (c.branch) {
    case Branch::Left:
    case Branch::Interior:
      return boundary_kernel(u, c.q);
    case Branch::Right:
      return boundary_kernel(-u, c.q);
  }
  return 0.0;
}

KernelWindow local_kernel_window(const KernelSpec& spec, double t, double b) {
  const auto c = choose_branch(spec, t, b);
  switch (c.branch) {
    case Branch::Left:
      return {-1.0, c.q};
    case Branch::Interior:
      return {-1.0, 1.0};
    case Branch::Right:
      return {-c.q, 1.0};
  }
  return {-1.0, 1.0};
}

ArmIncrements arm_increments(const SurvivalSample& sample, int arm, WeightSpan weights) {
  ArmIncrements out;
  out.increments = nelson_aalen(sample, arm, weights);
  std::vector<std::pair<double, double>> ev;
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (sample[i].treatment == arm && sample[i].event)
      ev.emplace_back(sample[i].time, weights.empty() ? 1.0 : weights[i]);
  std::stable_sort(ev.begin(), ev.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [t, w] : ev) {
    out.event_times.push_back(t);
    out.event_weights.push_back(w);
  }
  return out;
}

double kernel_hazard_raw(const StepFunction& increments, const KernelSpec& spec, double t, double b) {
  if (!(b > 0.0)) throw Error("bandwidth must be positive");
  const auto c = choose_branch(spec, t, b);
  const auto win = local_kernel_window(spec, t, b);
  // u = (t - T) / b in [lo, hi]  <=>  T in [t - b hi, t - b lo]
  const auto& times = increments.jump_times();
  const auto& inc = increments.increments();
  auto first = std::lower_bound(times.begin(), times.end(), t - b * win.hi);
  auto last = std::upper_bound(times.begin(), times.end(), t - b * win.lo);
  const double sign = c.branch == Branch::Right ? -1.0 : 1.0;
  double sum = 0.0;
  for (auto it = first; it != last; ++it) {
    const auto k = static_cast<std::size_t>(it - times.begin());
    sum += boundary_kernel(sign * (t - *it) / b, c.q) * inc[k];
  }
  return sum / b;
}

BandwidthPlan BandwidthPlan::fixed(const TimeGrid& grid, double b) {
  if (!(b > 0.0)) throw Error("bandwidth must be positive");
  return {grid, std::vector<double>(grid.size(), b), {b}};
}

SmoothedHazard smooth_hazard(const StepFunction& increments, const KernelSpec& spec,
                             const BandwidthPlan& plan) {
  const auto& grid = plan.grid;
  if (plan.local_bandwidth.size() != grid.size())
    throw Error("bandwidth plan does not match its grid");
  SmoothedHazard out;
  out.grid = grid;
  out.plan = plan;
  out.values.resize(grid.size());
  out.cumulative.resize(grid.size());
  out.presmoothed_cumulative.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    if (t < spec.beg() || t > spec.end()) {
      std::ostringstream os;
      os << "grid point " << t << " lies outside the kernel support [" << spec.beg() << ", "
         << spec.end() << "]";
      throw Error(os.str());
    }
    out.values[k] = std::max(0.0, kernel_hazard_raw(increments, spec, t, plan.local_bandwidth[k]));
    out.presmoothed_cumulative[k] = increments.value(t);
  }
  out.cumulative[0] = out.presmoothed_cumulative[0];
  for (std::size_t k = 1; k < grid.size(); ++k)
    out.cumulative[k] = out.cumulative[k - 1] +
                        0.5 * (grid[k] - grid[k - 1]) * (out.values[k] + out.values[k - 1]);
  return out;
}

const QuadratureRule& gauss_legendre_64() {
  static const QuadratureRule rule = [] {
    constexpr int n = 64;
    QuadratureRule r;
    const auto positive = boost::math::legendre_p_zeros<double>(n);
    std::vector<double> nodes;
    for (double x : positive) {
      nodes.push_back(x);
      if (x != 0.0) nodes.push_back(-x);
    }
    std::sort(nodes.begin(), nodes.end());
    for (double x : nodes) {
      const double d = boost::math::legendre_p_prime(n, x);
      r.nodes.push_back(x);
      r.weights.push_back(2.0 / ((1.0 - x * x) * d * d));
    }
    return r;
  }();
  return rule;
}

std::string_view to_string(BiasEstimator e) noexcept {
  return e == BiasEstimator::Pilot ? "pilot" : "richardson";
}

BiasEstimator parse_bias_estimator(std::string_view name) {
  if (name == "pilot") return BiasEstimator::Pilot;
  if (name == "richardson") return BiasEstimator::Richardson;
  throw Error("unknown bias estimator '" + std::string(name) + "' (expected pilot or richardson)");
}

double pilot_bandwidth(const KernelSpec& spec, std::size_t events) {
  return spec.width() / (8.0 * std::pow(static_cast<double>(std::max<std::size_t>(events, 1)), 0.2));
}

LocalMse estimate_local_mse(const ArmIncrements& arm, const KernelSpec& spec, double t, double b,
                            BiasEstimator bias) {
  if (!(b > 0.0)) throw Error("bandwidth must be positive");
  LocalMse out;

  // Event weights rescaled to sum to the event count: the estimator is then
  // invariant to a common weight scale and reduces to the unweighted form
  // for constant weights.
  const auto m = static_cast<double>(arm.event_weights.size());
  const double total = std::accumulate(arm.event_weights.begin(), arm.event_weights.end(), 0.0);
  std::vector<double> cum(arm.event_weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cum.size(); ++i) {
    acc += arm.event_weights[i] * (m / total);
    cum[i] = acc;
  }
  auto survival_uncensored = [&](double s) {
    auto it = std::upper_bound(arm.event_times.begin(), arm.event_times.end(), s);
    const double mass = it == arm.event_times.begin()
                            ? 0.0
                            : cum[static_cast<std::size_t>(it - arm.event_times.begin()) - 1];
    return 1.0 - mass / (m + 1.0);
  };
  const double smallest_positive = 1.0 - (m > 0 ? cum.back() : 0.0) / (m + 1.0);

  const auto win = local_kernel_window(spec, t, b);
  const auto& rule = gauss_legendre_64();
  const double half = 0.5 * (win.hi - win.lo);
  const double mid = 0.5 * (win.hi + win.lo);
  double integral = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double y = mid + half * rule.nodes[k];
    const double kern = local_kernel(spec, t, b, y);
    const double s = std::clamp(t - b * y, spec.beg(), spec.end());
    const double lambda = std::max(0.0, kernel_hazard_raw(arm.increments, spec, s, b));
    double surv = survival_uncensored(s);
    if (!(surv > 0.0)) {
      surv = smallest_positive > 0.0 ? smallest_positive : 1.0 / (m + 1.0);
      out.clamped = true;
    }
    integral += rule.weights[k] * kern * kern * lambda / surv;
  }
  integral *= half;
  out.variance = m > 0 ? integral / (b * m) : 0.0;
  if (bias == BiasEstimator::Richardson) {
    out.bias = (kernel_hazard_raw(arm.increments, spec, t, 2.0 * b) -
                kernel_hazard_raw(arm.increments, spec, t, b)) /
               3.0;
  } else {
    // Kernel-smoothed pilot minus the pilot itself.
    const double pilot = pilot_bandwidth(spec, arm.event_times.size());
    double conv = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double y = mid + half * rule.nodes[k];
      const double s = std::clamp(t - b * y, spec.beg(), spec.end());
      conv += rule.weights[k] * local_kernel(spec, t, b, y) *
              std::max(0.0, kernel_hazard_raw(arm.increments, spec, s, pilot));
    }
    out.bias = conv * half - std::max(0.0, kernel_hazard_raw(arm.increments, spec, t, pilot));
  }
  out.mse = out.variance + out.bias * out.bias;
  return out;
}

std::vector<double> default_candidates(const KernelSpec& spec) {
  constexpr int count = 21;
  const double lo = spec.width() / 50.0;
  const double hi = spec.width() / 2.0;
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  out.back() = hi;
  return out;
}

namespace {

std::vector<double> running_median(const std::vector<double>& x, std::size_t window) {
  std::vector<double> out(x.size());
  const std::size_t half = window / 2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size(), i + half + 1);
    std::vector<double> w(x.begin() + static_cast<std::ptrdiff_t>(lo),
                          x.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(w.begin(), w.end());
    const std::size_t n = w.size();
    out[i] = n % 2 == 1 ? w[n / 2] : 0.5 * (w[n / 2 - 1] + w[n / 2]);
  }
  return out;
}

// Nadaraya-Watson smoothing of a sequence over the grid with an Epanechnikov
// weight of fixed bandwidth.
std::vector<double> smooth_sequence(const TimeGrid& grid, const std::vector<double>& x,
                                    double pilot) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double u = (grid[i] - grid[j]) / pilot;
      if (std::abs(u) >= 1.0) continue;
      const double w = 0.75 * (1.0 - u * u);
      num += w * x[j];
      den += w;
    }
    out[i] = den > 0.0 ? num / den : x[i];
  }
  return out;
}

}  // namespace

BandwidthPlan select_bandwidths(const ArmIncrements& arm, const KernelSpec& spec,
                                const TimeGrid& grid, std::vector<double> candidates,
                                BiasEstimator bias) {
  if (candidates.empty()) throw Error("bandwidth candidate set is empty");
  std::sort(candidates.begin(), candidates.end());
  const double cap = spec.width() / 2.0;
  for (double b : candidates)
    if (!(b > 0.0) || b > cap * (1.0 + 1e-12))
      throw Error("bandwidth candidates must lie in (0, (end - beg) / 2]");

  BandwidthPlan plan;
  plan.grid = grid;
  plan.candidates = candidates;
  if (candidates.size() == 1) {
    plan.local_bandwidth.assign(grid.size(), candidates.front());
    return plan;
  }

  std::vector<double> chosen(grid.size());
  std::vector<double> failed;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    double best_b = std::numeric_limits<double>::quiet_NaN();
    for (double b : candidates) {
      const double mse = estimate_local_mse(arm, spec, grid[k], b, bias).mse;
      // Strict comparison over ascending candidates keeps ties at the smaller bandwidth.
      if (std::isfinite(mse) && mse < best) {
        best = mse;
        best_b = b;
      }
    }
    if (!std::isfinite(best_b)) failed.push_back(grid[k]);
    chosen[k] = best_b;
  }
  if (!failed.empty()) {
    std::ostringstream os;
    os << "no valid bandwidth candidate at t =";
    for (double t : failed) os << ' ' << t;
    throw Error(os.str());
  }

  const double pilot = std::max((grid.back() - grid.front()) / 10.0,
                                2.0 * (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1));
  auto stabilized = smooth_sequence(grid, running_median(chosen, 5), pilot);
  for (auto& b : stabilized) b = std::clamp(b, candidates.front(), candidates.back());
  plan.local_bandwidth = std::move(stabilized);
  return plan;
}

}  // namespace hrc
