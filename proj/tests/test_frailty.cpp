#include <doctest.h>

#include <cmath>
#include <random>

#include "hrc/frailty.hpp"
#include "oracles.hpp"

using namespace hrc;
using F = FrailtyFamily;

TEST_CASE("laplace transforms") {
  for (auto f : {F::Gamma, F::InverseGaussian, F::PositiveStable})
    CHECK(laplace(FrailtySpec(f, 0.5), 0.0) == 1.0);
  CHECK(laplace(FrailtySpec(F::Gamma, 1.0), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(laplace(FrailtySpec(F::PositiveStable, 0.5), 4.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));

  for (auto spec : {FrailtySpec(F::Gamma, 2.0), FrailtySpec(F::InverseGaussian, 3.0),
                    FrailtySpec(F::PositiveStable, 0.4)}) {
    double prev = 1.0;
    for (double u = 0.01; u < 50; u *= 1.3) {
      const double v = laplace(spec, u);
      CHECK(v < prev);
      CHECK(v > 0.0);
      prev = v;
      // Derivative by central differences.
      const double h = 1e-6 * u;
      const double fd = (laplace(spec, u + h) - laplace(spec, u - h)) / (2 * h);
      CHECK(laplace_derivative(spec, u) == doctest::Approx(fd).epsilon(1e-6));
      CHECK(laplace_inverse(spec, v) == doctest::Approx(u).epsilon(1e-9));
    }
  }
}

TEST_CASE("varphi examples") {
  CHECK(varphi(FrailtySpec(F::Gamma, 2.0), 1.0, 0.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(std::abs(varphi(FrailtySpec(F::Gamma, 1e-12), 3.0, 0.2) - 1.0) < 1e-9);
  for (auto spec : {FrailtySpec(F::Gamma, 2.0), FrailtySpec(F::InverseGaussian, 3.0),
                    FrailtySpec(F::PositiveStable, 0.4)})
    CHECK(varphi(spec, 0.7, 0.7) == 1.0);
  CHECK_THROWS_WITH(varphi(FrailtySpec(F::PositiveStable, 0.5), 1.0, 0.0),
                    "PS multiplier undefined at zero cumulative hazard");
}

TEST_CASE("varphi agrees with the first-principles oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> cum(0.01, 3.0), th(0.05, 8.0), ps(0.05, 0.95);
  for (auto f : {F::Gamma, F::InverseGaussian, F::PositiveStable}) {
    for (int i = 0; i < 10; ++i) {
      const double theta = f == F::PositiveStable ? ps(rng) : th(rng);
      const double a = cum(rng), b = cum(rng);
      const double ref = oracle::varphi(static_cast<int>(f), theta, a, b);
      CHECK(varphi(FrailtySpec(f, theta), a, b) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("varphi is at least one when the treated cumulative hazard is larger") {
  for (auto spec : {FrailtySpec(F::Gamma, 2.0), FrailtySpec(F::InverseGaussian, 3.0),
                    FrailtySpec(F::PositiveStable, 0.4)})
    for (double l0 = 0.05; l0 < 3; l0 += 0.3)
      for (double d = 0; d < 2; d += 0.25) CHECK(varphi(spec, l0 + d, l0) >= 1.0);
}

TEST_CASE("tau and theta") {
  CHECK(tau_to_theta(F::Gamma, 0.5).theta() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(tau_to_theta(F::Gamma, 0.7).theta() == doctest::Approx(14.0 / 3.0).epsilon(1e-14));
  CHECK(tau_to_theta(F::PositiveStable, 0.3).theta() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(theta_to_tau(FrailtySpec(F::Gamma, 2.0)) == 0.5);
  CHECK(theta_to_tau(FrailtySpec(F::PositiveStable, 0.7)) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(theta_to_tau(FrailtySpec(F::InverseGaussian, 100.0)) == doctest::Approx(0.5).epsilon(0.02));

  CHECK_THROWS(tau_to_theta(F::InverseGaussian, 0.5));
  CHECK_THROWS(tau_to_theta(F::Gamma, 1.0));
  CHECK_THROWS(tau_to_theta(F::PositiveStable, 0.0));
  CHECK_THROWS(FrailtySpec(F::PositiveStable, 1.0));
  CHECK_THROWS(FrailtySpec(F::Gamma, 0.0));
}

TEST_CASE("tau round trip over each family's range") {
  for (auto f : {F::Gamma, F::InverseGaussian, F::PositiveStable}) {
    const auto r = tau_range(f);
    for (int i = 1; i < 20; ++i) {
      const double tau = r.lo + (r.hi - r.lo) * i / 20.0;
      CHECK(theta_to_tau(tau_to_theta(f, tau)) == doctest::Approx(tau).epsilon(1e-6));
    }
  }
}

TEST_CASE("quadrature path agrees with the closed forms") {
  for (double theta : {0.1, 0.5, 2.0, 14.0 / 3.0, 20.0})
    CHECK(std::abs(theta_to_tau_quadrature(FrailtySpec(F::Gamma, theta)) - theta / (theta + 2)) < 1e-8);
  for (double theta : {0.2, 0.5, 0.9})
    CHECK(std::abs(theta_to_tau_quadrature(FrailtySpec(F::PositiveStable, theta)) - (1 - theta)) < 1e-8);
}

TEST_CASE("family names") {
  CHECK(parse_family("gamma") == F::Gamma);
  CHECK(parse_family("ig") == F::InverseGaussian);
  CHECK(parse_family("ps") == F::PositiveStable);
  CHECK(to_string(F::InverseGaussian) == "ig");
  CHECK_THROWS(parse_family("lognormal"));
}
