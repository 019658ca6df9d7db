#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "hrc/cox.hpp"
#include "hrc/sensitivity.hpp"
#include "hrc/simgen.hpp"
#include "oracles.hpp"

using namespace hrc;
using F = FrailtyFamily;

namespace {

SmoothedHazard smoothed(const SurvivalSample& s, int arm, const TimeGrid& grid) {
  KernelSpec spec(grid.front(), grid.back());
  const auto inc = arm_increments(s, arm);
  return smooth_hazard(inc.increments, spec, select_bandwidths(inc, spec, grid, default_candidates(spec)));
}

}  // namespace

TEST_CASE("kernel_hrc identities") {
  const auto s = oracle::toy_sample(600, 2, 0, -0.5);
  const auto grid = build_time_grid(s, 21, 10);
  const auto h0 = smoothed(s, 0, grid), h1 = smoothed(s, 1, grid);

  for (double theta : {0.3, 4.0}) {
    const auto same = kernel_hrc(h0, h0, FrailtySpec(F::Gamma, theta));
    for (double e : same.estimates) CHECK(e == 1.0);
  }
  const auto zero = kernel_hrc(h1, h0, FrailtySpec(F::Gamma, 1e-12));
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(std::abs(zero.estimates[k] - h1.values[k] / h0.values[k]) < 1e-9 * (h1.values[k] / h0.values[k]));

  // A value from tau and the same value passed as theta agree bit for bit.
  for (auto f : {F::Gamma, F::InverseGaussian, F::PositiveStable}) {
    const auto spec = tau_to_theta(f, 0.3);
    const auto a = kernel_hrc(h1, h0, spec), b = kernel_hrc(h1, h0, FrailtySpec(f, spec.theta()));
    REQUIRE(a.estimates.size() == b.estimates.size());
    for (std::size_t k = 0; k < a.estimates.size(); ++k)
      CHECK(std::memcmp(&a.estimates[k], &b.estimates[k], sizeof(double)) == 0);
  }
}

TEST_CASE("kernel_hrc flags") {
  const auto grid = TimeGrid::equally_spaced(0, 1, 3);
  SmoothedHazard a, b;
  a.grid = b.grid = grid;
  a.values = {1, 1, 1};
  b.values = {0, 1e-12, 1};
  a.presmoothed_cumulative = {0, 0.5, 1};
  b.presmoothed_cumulative = {0, 0.4, 0.8};
  const auto g = kernel_hrc(a, b, FrailtySpec(F::Gamma, 1));
  CHECK(g.flags[0] == PointFlag::Unavailable);
  CHECK(g.flags[1] == PointFlag::Unstable);
  CHECK(g.flags[2] == PointFlag::Ok);
  b.values = {1, 1, 1};
  const auto p = kernel_hrc(a, b, FrailtySpec(F::PositiveStable, 0.5));
  CHECK(p.flags[0] == PointFlag::Unavailable);
  CHECK(p.flags[1] == PointFlag::Ok);
}

TEST_CASE("estimate is non-decreasing in theta when the treated cumulative hazard is larger") {
  // Treated arm has the higher hazard here.
  const auto s = oracle::toy_sample(800, 7, 0, 0.5);
  const auto grid = build_time_grid(s, 21, 10);
  const auto h0 = smoothed(s, 0, grid), h1 = smoothed(s, 1, grid);
  for (auto f : {F::Gamma, F::InverseGaussian}) {
    std::vector<double> prev(grid.size(), 0.0);
    for (double theta = 0.1; theta < 20; theta *= 1.5) {
      const auto c = kernel_hrc(h1, h0, FrailtySpec(f, theta));
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (h1.presmoothed_cumulative[k] < h0.presmoothed_cumulative[k] || c.flags[k] != PointFlag::Ok) continue;
        CHECK(c.estimates[k] >= prev[k]);
        prev[k] = c.estimates[k];
      }
    }
  }
}

TEST_CASE("run_sensitivity composition and weighting identities") {
  const auto s = oracle::toy_sample(500, 3, 0, -0.5);
  SensitivityRequest req;
  req.taus = {0.1, 0.3, 0.5, 0.7};
  const auto all = run_sensitivity(s, req);
  REQUIRE(all.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    SensitivityRequest one = req;
    one.taus = {req.taus[i]};
    CHECK(run_sensitivity(s, one)[0].estimates == all[i].estimates);
  }

  // No covariates: stabilized weights are exactly one.
  SensitivityRequest w = req;
  w.weighting.iptw = true;
  const auto weighted = run_sensitivity(s, w);
  for (std::size_t i = 0; i < 4; ++i) CHECK(weighted[i].estimates == all[i].estimates);

  // Relabeling subject order.
  auto rec = s.records();
  std::mt19937 g(1);
  std::shuffle(rec.begin(), rec.end(), g);
  const auto shuffled = run_sensitivity(SurvivalSample(rec), req);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < all[i].estimates.size(); ++k)
      CHECK(shuffled[i].estimates[k] == doctest::Approx(all[i].estimates[k]).epsilon(1e-12));
}

TEST_CASE("cox backend matches the closed form from the fit") {
  ScenarioSpec spec;
  spec.n = 2000;
  const auto d = generate(resolve(spec, 5), 5);
  SensitivityRequest req;
  req.method = Method::Cox;
  req.taus = {0.7};
  const auto curve = run_sensitivity(d.sample, req)[0];
  const auto fit = fit_cox(d.sample);
  const double theta = 14.0 / 3.0;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const double base = fit.baseline_cumhaz.value(curve.times[k]);
    const double expect = std::exp(fit.beta[0] + theta * base * (std::exp(fit.beta[0]) - 1));
    CHECK(curve.estimates[k] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("request validation") {
  SensitivityRequest req;
  req.families = {F::InverseGaussian};
  req.taus = {0.6};
  CHECK_THROWS(req.validate());
  req.taus = {};
  CHECK_THROWS(req.validate());
  req.taus = {0.3};
  req.weighting.truncation = 1.5;
  CHECK_THROWS(req.validate());
  CHECK_THROWS(parse_method("spline"));
}

TEST_CASE("csv layout") {
  SensitivityCurve c;
  c.tau = 0.5;
  c.theta = 2;
  c.times = {0.5};
  c.estimates = {0.25};
  c.flags = {PointFlag::Ok};
  CHECK(sensitivity_csv({c}) == "family,tau,theta,method,t,estimate,flag,se,ci_lo,ci_hi\n"
                                "gamma,0.5,2,kernel,0.5,0.25,ok,,,\n");
}
