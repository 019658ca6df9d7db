#include "hrc/frailty.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

namespace hrc {

std::string_view to_string(FrailtyFamily family) noexcept {
  switch (family) {
    case FrailtyFamily::Gamma:
      return "gamma";
    case FrailtyFamily::InverseGaussian:
      return "ig";
    case FrailtyFamily::PositiveStable:
      return "ps";
  }
  return "unknown";
}

FrailtyFamily parse_family(std::string_view name) {
  if (name == "gamma") return FrailtyFamily::Gamma;
  if (name == "ig" || name == "inverse_gaussian") return FrailtyFamily::InverseGaussian;
  if (name == "ps" || name == "positive_stable") return FrailtyFamily::PositiveStable;
  throw Error("unknown frailty family '" + std::string(name) + "' (expected gamma, ig or ps)");
}

FrailtySpec::FrailtySpec(FrailtyFamily family, double theta) : family_(family), theta_(theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw Error("frailty theta must be positive");
  if (family == FrailtyFamily::PositiveStable && !(theta < 1.0))
    throw Error("positive stable frailty requires 0 < theta < 1");
}

double laplace(const FrailtySpec& spec, double u) {
  if (!(u >= 0.0)) throw Error("Laplace transform argument must be nonnegative");
  const double th = spec.theta();
  switch (spec.family()) {
    case FrailtyFamily::Gamma:
      // (1/th)^(1/th) / (u + 1/th)^(1/th) == (1 + th u)^(-1/th)
      return std::exp(-std::log1p(th * u) / th);
    case FrailtyFamily::InverseGaussian:
      return std::exp((1.0 - std::sqrt(1.0 + 2.0 * th * u)) / th);
    case FrailtyFamily::PositiveStable:
      return u == 0.0 ? 1.0 : std::exp(-std::pow(u, th));
  }
  return 1.0;
}

double laplace_derivative(const FrailtySpec& spec, double u) {
  if (!(u >= 0.0)) throw Error("Laplace transform argument must be nonnegative");
  const double th = spec.theta();
  switch (spec.family()) {
    case FrailtyFamily::Gamma:
      return -std::exp(-(1.0 / th + 1.0) * std::log1p(th * u));
    case FrailtyFamily::InverseGaussian:
      return -laplace(spec, u) / std::sqrt(1.0 + 2.0 * th * u);
    case FrailtyFamily::PositiveStable:
      if (u == 0.0) return -std::numeric_limits<double>::infinity();
      return -th * std::pow(u, th - 1.0) * std::exp(-std::pow(u, th));
  }
  return 0.0;
}

double varphi(const FrailtySpec& spec, double lambda1_cum, double lambda0_cum) {
  if (!(lambda1_cum >= 0.0) || !(lambda0_cum >= 0.0))
    throw Error("cumulative hazards must be nonnegative");
  const double th = spec.theta();
  switch (spec.family()) {
    case FrailtyFamily::Gamma:
      return std::exp(th * (lambda1_cum - lambda0_cum));
    case FrailtyFamily::InverseGaussian:
      return (1.0 + th * lambda1_cum) / (1.0 + th * lambda0_cum);
    case FrailtyFamily::PositiveStable:
      if (lambda1_cum == 0.0 || lambda0_cum == 0.0)
        throw Error("PS multiplier undefined at zero cumulative hazard");
      return std::pow(lambda1_cum / lambda0_cum, 1.0 / th - 1.0);
  }
  return 1.0;
}

TauRange tau_range(FrailtyFamily family) noexcept {
  if (family == FrailtyFamily::InverseGaussian) return {0.0, 0.5};
  return {0.0, 1.0};
}

namespace {

constexpr double kIgThetaLo = 1e-6;
constexpr double kIgThetaHi = 1e6;

}  // namespace

double laplace_inverse(const FrailtySpec& spec, double s) {
  if (!(s > 0.0 && s <= 1.0)) throw Error("inverse Laplace transform argument must be in (0, 1]");
  const double th = spec.theta();
  const double log_s = std::log(s);
  switch (spec.family()) {
    case FrailtyFamily::Gamma:
      return std::expm1(-th * log_s) / th;
    case FrailtyFamily::InverseGaussian: {
      const double r = 1.0 - th * log_s;
      return (r * r - 1.0) / (2.0 * th);
    }
    case FrailtyFamily::PositiveStable:
      return std::pow(-log_s, 1.0 / th);
  }
  return 0.0;
}

double theta_to_tau_quadrature(const FrailtySpec& spec) {
  // tau = 1 + 4 * int_0^1 g(s)/g'(s) ds with Archimedean generator g, the
  // inverse Laplace transform. Since g'(s) = 1 / L'(g(s)), the integrand is
  // g(s) * L'(g(s)), which stays bounded on (0, 1); tanh-sinh absorbs the
  // endpoint derivative blow-ups.
  auto integrand = [&](double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double u = laplace_inverse(spec, s);
    const double d = laplace_derivative(spec, u);
    const double v = u * d;
    return std::isfinite(v) ? v : 0.0;
  };
  // Large theta concentrates curvature in a layer of width ~1/theta below
  // s = 1, so the range is split geometrically towards that endpoint.
  std::vector<double> breaks{0.0, 0.5};
  const int layers = 1 + static_cast<int>(std::ceil(std::log10(1.0 + spec.theta())));
  for (int k = 1; k <= layers; ++k) breaks.push_back(1.0 - 0.5 * std::pow(10.0, -k));
  breaks.push_back(1.0);
  boost::math::quadrature::tanh_sinh<double> integrator;
  double integral = 0.0;
  double error = 0.0;
  double l1 = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    double piece_error = 0.0;
    double piece_l1 = 0.0;
    integral += integrator.integrate(integrand, breaks[k], breaks[k + 1], 1e-12, &piece_error,
                                     &piece_l1);
    error += piece_error;
    l1 += piece_l1;
  }
  if (!std::isfinite(integral) || error > 1e-10 * std::max(1.0, l1)) {
    std::ostringstream os;
    os << "Kendall tau quadrature did not converge (family " << to_string(spec.family())
       << ", theta " << spec.theta() << ", error estimate " << error << ")";
    throw Error(os.str());
  }
  return 1.0 + 4.0 * integral;
}

double theta_to_tau(const FrailtySpec& spec) {
  switch (spec.family()) {
    case FrailtyFamily::Gamma:
      return spec.theta() / (spec.theta() + 2.0);
    case FrailtyFamily::PositiveStable:
      return 1.0 - spec.theta();
    case FrailtyFamily::InverseGaussian:
      return theta_to_tau_quadrature(spec);
  }
  return 0.0;
}

FrailtySpec tau_to_theta(FrailtyFamily family, double tau) {
  const auto range = tau_range(family);
  if (!(tau > range.lo && tau < range.hi)) {
    std::ostringstream os;
    os << "Kendall's tau " << tau << " outside the valid range (" << range.lo << ", "
       << range.hi << ") for " << to_string(family) << " frailty";
    throw Error(os.str());
  }
  switch (family) {
    case FrailtyFamily::Gamma:
      return FrailtySpec(family, 2.0 * tau / (1.0 - tau));
    case FrailtyFamily::PositiveStable:
      return FrailtySpec(family, 1.0 - tau);
    case FrailtyFamily::InverseGaussian:
      break;
  }

  auto f = [&](double log_theta) {
    return theta_to_tau(FrailtySpec(family, std::exp(log_theta))) - tau;
  };
  const double lo = std::log(kIgThetaLo);
  const double hi = std::log(kIgThetaHi);
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo > 0.0 || f_hi < 0.0) {
    std::ostringstream os;
    os << "Kendall's tau " << tau << " is not attainable for ig frailty with theta in ["
       << kIgThetaLo << ", " << kIgThetaHi << "]";
    throw Error(os.str());
  }
  std::uintmax_t max_iter = 200;
  auto tol = [&](double a, double b) { return std::abs(b - a) < 1e-13 * (1.0 + std::abs(a)); };
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, tol, max_iter);
  const double fa = std::abs(f(a));
  const double fb = std::abs(f(b));
  const double root = fa < fb ? a : b;
  if (std::min(fa, fb) > 1e-8) throw Error("ig tau inversion did not reach 1e-8 tolerance");
  return FrailtySpec(family, std::exp(root));
}

}  // namespace hrc
