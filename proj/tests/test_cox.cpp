#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hrc/cox.hpp"
#include "hrc/simgen.hpp"
#include "oracles.hpp"

using namespace hrc;
using oracle::rec;

TEST_CASE("cox fit matches grid-search maximization of the partial likelihood") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto s = oracle::toy_sample(20, seed, 0, -0.7);
    const auto fit = fit_cox(s);
    const double best = oracle::argmax_treatment_loglik(s);
    if (std::abs(best) < 4.9) {
      CHECK(std::abs(fit.beta[0] - best) < 1e-4);
    } else {
      // Monotone likelihood (seed 4 has one treated event): no finite maximum.
      CHECK(fit.loglik >= oracle::treatment_loglik(s, best));
    }
    CHECK(fit.loglik == doctest::Approx(oracle::treatment_loglik(s, fit.beta[0])).epsilon(1e-12));
  }
}

TEST_CASE("cox score vanishes and the fit is a local maximum") {
  for (unsigned seed = 1; seed <= 4; ++seed) {
    const auto s = oracle::toy_sample(150, seed, 2, -0.4, seed % 2 == 0);
    CovariateSpec d{true, {0, 1}};
    const auto fit = fit_cox(s, d);
    const auto pl = cox_partial_likelihood(s, d, fit.beta);
    CHECK(pl.score.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fit.loglik >= fit.loglik_null);
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
      for (double step : {-0.1, 0.1}) {
        Eigen::VectorXd b = fit.beta;
        b[j] += step;
        CHECK(cox_partial_likelihood(s, d, b).loglik <= fit.loglik);
      }
    for (Eigen::Index j = 0; j < fit.beta_se.size(); ++j) CHECK(fit.beta_se[j] > 0);
  }
}

TEST_CASE("analytic score matches central differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 0.5);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto s = oracle::toy_sample(40, seed, 2, -0.3, true);
    std::vector<double> w(s.size());
    for (auto& x : w) x = std::exp(nd(rng));
    CovariateSpec d{true, {0, 1}};
    Eigen::VectorXd beta(3);
    beta << nd(rng), nd(rng), nd(rng);
    const auto pl = cox_partial_likelihood(s, d, beta, w);
    const double h = 1e-5;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd up = beta, dn = beta;
      up[j] += h;
      dn[j] -= h;
      const double fd = (cox_partial_likelihood(s, d, up, w).loglik -
                         cox_partial_likelihood(s, d, dn, w).loglik) / (2 * h);
      CHECK(std::abs(fd - pl.score[j]) <= 1e-4 * std::max(1.0, std::abs(pl.score[j])));
      // Information is minus the Hessian: compare with differences of the score.
      const auto su = cox_partial_likelihood(s, d, up, w).score;
      const auto sd = cox_partial_likelihood(s, d, dn, w).score;
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(-(su[k] - sd[k]) / (2 * h) - pl.information(k, j)) <
              1e-4 * std::max(1.0, std::abs(pl.information(k, j))));
    }
  }
}

TEST_CASE("cox symmetry, unit weights, weight scale") {
  SurvivalSample sym({rec(1, true, 0), rec(2, false, 0), rec(3, true, 0), rec(1, true, 1),
                      rec(2, false, 1), rec(3, true, 1)});
  CHECK(std::abs(fit_cox(sym).beta[0]) < 1e-12);

  const auto s = oracle::toy_sample(100, 8, 0, -0.5, true);
  std::vector<double> ones(s.size(), 1.0);
  const auto a = fit_cox(s), b = fit_cox(s, {}, ones);
  CHECK(a.beta[0] == b.beta[0]);
  CHECK(a.baseline_cumhaz == b.baseline_cumhaz);
}

TEST_CASE("breslow baseline") {
  const auto s = oracle::toy_sample(60, 3, 0, -0.5, true);
  const auto fit = fit_cox(s);
  // Hand enumeration of risk-set sums at each distinct event time.
  std::vector<double> times;
  for (const auto& r : s.records())
    if (r.event) times.push_back(r.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double cum = 0;
  for (double t : times) {
    double d = 0, risk = 0;
    for (const auto& r : s.records()) {
      if (r.time >= t) risk += std::exp(fit.beta[0] * r.treatment);
      if (r.time == t && r.event) d += 1;
    }
    cum += d / risk;
    CHECK(fit.baseline_cumhaz.value(t) == doctest::Approx(cum).epsilon(1e-12));
  }

  // At beta = 0 the baseline is the pooled Nelson-Aalen estimator.
  SurvivalSample sym({rec(1, true, 0), rec(2, false, 0), rec(3, true, 0), rec(1, true, 1),
                      rec(2, false, 1), rec(3, true, 1)});
  const auto f0 = fit_cox(sym);
  CHECK(f0.baseline_cumhaz.value(1) == doctest::Approx(2.0 / 6.0));
  CHECK(f0.baseline_cumhaz.value(3) == doctest::Approx(2.0 / 6.0 + 2.0 / 2.0));

  std::vector<double> w(s.size(), 1.7);
  const auto fw = fit_cox(s, {}, w);
  CHECK(fw.beta[0] == doctest::Approx(fit.beta[0]).epsilon(1e-12));
  CHECK(fw.baseline_cumhaz.value(1.0) == doctest::Approx(fit.baseline_cumhaz.value(1.0)).epsilon(1e-12));
}

TEST_CASE("cox_hrc identities") {
  const auto s = oracle::toy_sample(200, 11, 0, -0.6);
  const auto fit = fit_cox(s);
  const auto grid = TimeGrid::equally_spaced(0.05, 1.0, 11);
  const double hr = std::exp(fit.beta[0]);

  const auto zero = cox_hrc(fit, FrailtySpec(FrailtyFamily::Gamma, 1e-12), grid);
  for (double e : zero.estimates) CHECK(std::abs(e - hr) < 1e-9);

  for (double theta : {0.2, 2.0, 14.0 / 3.0}) {
    const FrailtySpec spec(FrailtyFamily::Gamma, theta);
    const auto curve = cox_hrc(fit, spec, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double base = fit.baseline_cumhaz.value(grid[k]);
      const double generic = hr * varphi(spec, base * hr, base);
      CHECK(std::abs(curve.estimates[k] - generic) <= 1e-12 * generic);
      CHECK(curve.estimates[k] ==
            doctest::Approx(std::exp(fit.beta[0] + theta * base * (hr - 1))).epsilon(1e-13));
    }
  }

  // beta = 0 gives one for every family.
  SurvivalSample sym({rec(1, true, 0), rec(2, false, 0), rec(3, true, 0), rec(1, true, 1),
                      rec(2, false, 1), rec(3, true, 1)});
  const auto f0 = fit_cox(sym);
  const auto g0 = TimeGrid::equally_spaced(1, 3, 3);
  for (auto spec : {FrailtySpec(FrailtyFamily::Gamma, 2), FrailtySpec(FrailtyFamily::InverseGaussian, 2),
                    FrailtySpec(FrailtyFamily::PositiveStable, 0.5)})
    for (double e : cox_hrc(f0, spec, g0).estimates) CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cox_hrc follows the analytic decline when the baseline is linear") {
  // Construct a fit by hand with baseline t and beta = log 0.5.
  CoxFit fit;
  fit.beta = Eigen::VectorXd::Constant(1, std::log(0.5));
  std::vector<double> t, inc;
  for (int k = 1; k <= 1000; ++k) t.push_back(k / 1000.0), inc.push_back(1 / 1000.0);
  fit.baseline_cumhaz = StepFunction(t, inc);
  const double theta = 14.0 / 3.0;
  const auto grid = TimeGrid::equally_spaced(0.1, 1.0, 10);
  const auto curve = cox_hrc(fit, FrailtySpec(FrailtyFamily::Gamma, theta), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double base = fit.baseline_cumhaz.value(grid[k]);
    CHECK(curve.estimates[k] == doctest::Approx(std::exp(std::log(0.5) + theta * base * (0.5 - 1))));
    if (k > 0) CHECK(curve.estimates[k] < curve.estimates[k - 1]);
  }
}

TEST_CASE("ph test degenerate input") {
  SurvivalSample two({rec(1, true, 0), rec(2, true, 1)});
  CHECK_THROWS(ph_score_test(fit_cox(two), two));
}

TEST_CASE("ph test p-values are calibrated under proportional hazards") {
  std::vector<double> p;
  for (unsigned r = 0; r < 200; ++r) {
    const auto s = oracle::toy_sample(300, 1000 + r, 0, -0.5);
    p.push_back(ph_score_test(fit_cox(s), s).p_value);
  }
  std::sort(p.begin(), p.end());
  double ks = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    ks = std::max({ks, std::abs(p[i] - double(i) / p.size()), std::abs(p[i] - double(i + 1) / p.size())});
  CHECK(ks < 0.1);
}

TEST_CASE("ph test detects non-proportional marginal hazards") {
  ScenarioSpec spec;
  spec.scenario = Scenario::Ib;
  spec.n = 5000;
  spec = resolve(spec, 3);
  int reject = 0;
  for (unsigned r = 0; r < 100; ++r) {
    const auto d = generate(spec, 500 + r);
    if (ph_score_test(fit_cox(d.sample), d.sample).p_value < 0.05) ++reject;
  }
  CHECK(reject > 80);
}
