#pragma once

#include <string_view>

#include "hrc/error.hpp"

namespace hrc {

enum class FrailtyFamily { Gamma, InverseGaussian, PositiveStable };

std::string_view to_string(FrailtyFamily family) noexcept;
/// Accepts "gamma", "ig"/"inverse_gaussian", "ps"/"positive_stable".
FrailtyFamily parse_family(std::string_view name);

/// Frailty law of V. For Gamma and inverse Gaussian `theta` is the variance of
/// a mean-one frailty; for positive stable it is the stability exponent in (0,1).
class FrailtySpec {
 public:
  FrailtySpec(FrailtyFamily family, double theta);

  FrailtyFamily family() const noexcept { return family_; }
  double theta() const noexcept { return theta_; }

  friend bool operator==(const FrailtySpec&, const FrailtySpec&) = default;

 private:
  FrailtyFamily family_;
  double theta_;
};

/// E[exp(-uV)].
double laplace(const FrailtySpec& spec, double u);

/// d/du E[exp(-uV)].
double laplace_derivative(const FrailtySpec& spec, double u);

/// Generator of the frailty copula: the u with E[exp(-uV)] = s, for s in (0, 1].
double laplace_inverse(const FrailtySpec& spec, double s);

/// Multiplier turning the observed-data hazard ratio into the causal hazard
/// ratio, given the arm cumulative hazards at t.
double varphi(const FrailtySpec& spec, double lambda1_cum, double lambda0_cum);

/// Valid Kendall's tau range (open interval) for a family.
struct TauRange {
  double lo;
  double hi;
};
TauRange tau_range(FrailtyFamily family) noexcept;

FrailtySpec tau_to_theta(FrailtyFamily family, double tau);
double theta_to_tau(const FrailtySpec& spec);

/// Kendall's tau through the Archimedean-copula integral only, for every family.
/// Exposed so the closed forms can be checked against it.
double theta_to_tau_quadrature(const FrailtySpec& spec);

}  // namespace hrc
