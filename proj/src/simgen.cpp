#include "hrc/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "hrc/frailty.hpp"
#include "hrc/rng.hpp"

namespace hrc {

namespace {

constexpr std::uint64_t kCalibrationLabel = 0xCA11B;
constexpr double kCalibrationTolerance = 0.001;

struct Draw {
  double v;
  double z;
  int a;
  double e0;
  double e1;
  double ec;
};

// Baseline draws shared by generation and calibration so the calibrated
// quantity applies to the same law.
Draw draw_subject(const ScenarioSpec& spec, double theta, Philox& rng) {
  std::gamma_distribution<double> frailty(1.0 / theta, theta);
  std::normal_distribution<double> normal(0.0, 1.0);
  Draw d{};
  d.v = frailty(rng);
  if (spec.scenario == Scenario::II) {
    d.z = normal(rng);
    const double p = 1.0 / (1.0 + std::exp(-std::log(0.5) * d.z));
    d.a = rng.uniform() < p ? 1 : 0;
  } else {
    d.z = 0.0;
    d.a = rng.uniform() < 0.5 ? 1 : 0;
  }
  d.e0 = -std::log(rng.uniform());
  d.e1 = -std::log(rng.uniform());
  d.ec = -std::log(rng.uniform());
  return d;
}

// Inverse of the conditional cumulative hazard v e^{a0} (e^{a1 t} - 1) / a1.
double invert_hazard(double e, double v, double a0, double a1) {
  const double scale = v * std::exp(a0);
  if (!(scale > 0.0)) return std::numeric_limits<double>::infinity();
  if (a1 == 0.0) return e / scale;
  return std::log1p(a1 * e / scale) / a1;
}

double event_time(const ScenarioSpec& spec, double theta, const Draw& d, int arm) {
  const double e = arm == 1 ? d.e1 : d.e0;
  const double ba = spec.beta * arm;
  switch (spec.scenario) {
    case Scenario::Ia:
      return invert_hazard(e, d.v, ba, theta * std::exp(ba));
    case Scenario::Ib:
      return invert_hazard(e, d.v, ba, 1.5);
    case Scenario::II:
      return invert_hazard(e, d.v, std::log(*spec.event_scale) + ba + spec.beta_z * d.z, 0.0);
  }
  return 0.0;
}

// Bisection in log scale on a Monte-Carlo fraction that is monotone
// increasing in the parameter (common random numbers make it a step function).
template <class Fraction>
CalibrationResult bisect(Fraction fraction, double target, double lo, double hi,
                         const char* what) {
  CalibrationResult out;
  double f_lo = fraction(lo);
  double f_hi = fraction(hi);
  if (target <= f_lo) {
    out.value = lo;
    out.achieved = f_lo;
    out.flagged = true;
    return out;
  }
  if (f_hi < target - kCalibrationTolerance) {
    std::ostringstream os;
    os << what << ": target " << target << " not reachable inside the search bracket (max "
       << f_hi << ")";
    throw Error(os.str());
  }
  double a = std::log(lo);
  double b = std::log(hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (a + b);
    const double f = fraction(std::exp(mid));
    if (std::abs(f - target) <= kCalibrationTolerance * 0.5 || b - a < 1e-12) {
      out.value = std::exp(mid);
      out.achieved = f;
      return out;
    }
    if (f < target)
      a = mid;
    else
      b = mid;
  }
  out.value = std::exp(0.5 * (a + b));
  out.achieved = fraction(out.value);
  if (std::abs(out.achieved - target) > kCalibrationTolerance) {
    std::ostringstream os;
    os << what << ": bisection did not reach the target " << target;
    throw Error(os.str());
  }
  return out;
}

}  // namespace

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::Ia:
      return "Ia";
    case Scenario::Ib:
      return "Ib";
    case Scenario::II:
      return "II";
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "Ia" || name == "ia") return Scenario::Ia;
  if (name == "Ib" || name == "ib") return Scenario::Ib;
  if (name == "II" || name == "ii") return Scenario::II;
  throw Error("unknown scenario '" + std::string(name) + "' (expected Ia, Ib or II)");
}

double ScenarioSpec::theta() const { return tau_to_theta(FrailtyFamily::Gamma, tau).theta(); }

void ScenarioSpec::validate() const {
  if (n < 2) throw Error("scenario sample size must be at least 2");
  (void)theta();
  if (scenario == Scenario::II) {
    if (!(administrative_time > 0.0)) throw Error("administrative censoring time must be positive");
    if (!(event_rate_target > 0.0 && event_rate_target < 1.0))
      throw Error("event rate target must lie in (0, 1)");
  } else if (!(censoring_fraction >= 0.0 && censoring_fraction < 1.0)) {
    throw Error("censoring fraction must lie in [0, 1)");
  }
}

CalibrationResult calibrate_censoring_rate(const ScenarioSpec& spec, std::uint64_t seed,
                                           std::size_t pilot_n) {
  spec.validate();
  if (spec.scenario == Scenario::II)
    throw Error("scenario II uses administrative censoring, not a censoring rate");
  const double theta = spec.theta();
  Philox rng(derive_seed(seed, kCalibrationLabel), 0);
  std::vector<double> t(pilot_n);
  std::vector<double> ec(pilot_n);
  for (std::size_t i = 0; i < pilot_n; ++i) {
    const auto d = draw_subject(spec, theta, rng);
    t[i] = event_time(spec, theta, d, d.a);
    ec[i] = d.ec;
  }
  // Censored iff C = ec / rate < T.
  auto fraction = [&](double rate) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < pilot_n; ++i)
      if (ec[i] < rate * t[i]) ++c;
    return static_cast<double>(c) / static_cast<double>(pilot_n);
  };
  return bisect(fraction, spec.censoring_fraction, 1e-8, 1e4, "censoring calibration");
}

CalibrationResult calibrate_event_scale(const ScenarioSpec& spec, std::uint64_t seed,
                                        std::size_t pilot_n) {
  spec.validate();
  if (spec.scenario != Scenario::II) throw Error("event-scale calibration applies to scenario II");
  const double theta = spec.theta();
  Philox rng(derive_seed(seed, kCalibrationLabel), 1);
  // Event iff E <= gamma * horizon * V exp(beta a + beta_z z).
  std::vector<double> ratio(pilot_n);
  for (std::size_t i = 0; i < pilot_n; ++i) {
    const auto d = draw_subject(spec, theta, rng);
    const double e = d.a == 1 ? d.e1 : d.e0;
    const double rate = spec.administrative_time * d.v * std::exp(spec.beta * d.a + spec.beta_z * d.z);
    ratio[i] = rate > 0.0 ? e / rate : std::numeric_limits<double>::infinity();
  }
  auto fraction = [&](double gamma) {
    std::size_t c = 0;
    for (double r : ratio)
      if (r <= gamma) ++c;
    return static_cast<double>(c) / static_cast<double>(pilot_n);
  };
  return bisect(fraction, spec.event_rate_target, 1e-10, 1e6, "event-rate calibration");
}

ScenarioSpec resolve(ScenarioSpec spec, std::uint64_t seed) {
  spec.validate();
  if (spec.scenario == Scenario::II) {
    if (!spec.event_scale) spec.event_scale = calibrate_event_scale(spec, seed).value;
  } else if (!spec.censoring_rate) {
    spec.censoring_rate =
        spec.censoring_fraction == 0.0 ? 0.0 : calibrate_censoring_rate(spec, seed).value;
  }
  return spec;
}

SimulatedDataset generate(const ScenarioSpec& spec_in, std::uint64_t seed) {
  const ScenarioSpec spec = resolve(spec_in, seed);
  const double theta = spec.theta();
  Philox rng(seed, 0);
  std::vector<SubjectRecord> records;
  records.reserve(spec.n);
  std::vector<double> v(spec.n), t0(spec.n), t1(spec.n), c(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto d = draw_subject(spec, theta, rng);
    v[i] = d.v;
    t0[i] = event_time(spec, theta, d, 0);
    t1[i] = event_time(spec, theta, d, 1);
    if (spec.scenario == Scenario::II) {
      c[i] = spec.administrative_time;
    } else {
      c[i] = *spec.censoring_rate > 0.0 ? d.ec / *spec.censoring_rate
                                         : std::numeric_limits<double>::infinity();
    }
    const double t = d.a == 1 ? t1[i] : t0[i];
    SubjectRecord r;
    r.id = std::to_string(i + 1);
    r.time = std::min(t, c[i]);
    r.event = t <= c[i];
    r.treatment = d.a;
    if (spec.scenario == Scenario::II) r.covariates = {d.z};
    records.push_back(std::move(r));
  }
  return {SurvivalSample(std::move(records)), std::move(v), std::move(t0), std::move(t1), std::move(c)};
}

double true_hrc(const ScenarioSpec& spec, double t) {
  switch (spec.scenario) {
    case Scenario::Ia:
      return std::exp(spec.beta + spec.theta() * t * (std::exp(spec.beta) - 1.0));
    case Scenario::Ib:
    case Scenario::II:
      return std::exp(spec.beta);
  }
  return 0.0;
}

}  // namespace hrc
