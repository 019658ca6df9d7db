#include <doctest.h>

#include <cmath>
#include <random>

#include "hrc/simgen.hpp"
#include "hrc/weights.hpp"
#include "oracles.hpp"

using namespace hrc;

namespace {

// Covariate z ~ N(0,1); treatment ~ Bernoulli(expit(a + b z)).
SurvivalSample confounded(std::size_t n, double a, double b, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nz(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  std::exponential_distribution<double> e(1);
  std::vector<SubjectRecord> r;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = nz(rng);
    const int arm = u(rng) < 1 / (1 + std::exp(-(a + b * z)));
    r.push_back({std::to_string(i), e(rng), true, arm, {z}});
  }
  return SurvivalSample(std::move(r));
}

}  // namespace

TEST_CASE("logistic fit: closed-form log-odds on a two-point design") {
  std::vector<SubjectRecord> r;
  auto add = [&](double z, int arm, int count) {
    for (int i = 0; i < count; ++i) r.push_back({std::to_string(r.size()), 1.0, true, arm, {z}});
  };
  add(0, 1, 10);
  add(0, 0, 30);
  add(1, 1, 30);
  add(1, 0, 10);
  const SurvivalSample s(r);
  const auto m = fit_logistic(s);
  CHECK(m.converged);
  CHECK(m.coefficients[0] == doctest::Approx(std::log(10.0 / 30.0)).epsilon(1e-10));
  CHECK(m.coefficients[1] == doctest::Approx(std::log(3.0) - std::log(1.0 / 3.0)).epsilon(1e-10));
}

TEST_CASE("logistic score vanishes at the optimum") {
  const auto s = confounded(800, 0.2, -0.7, 4);
  const auto m = fit_logistic(s);
  const auto p = propensity_scores(m, s);
  double g0 = 0, g1 = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    g0 += s[i].treatment - p[i];
    g1 += (s[i].treatment - p[i]) * s[i].covariates[0];
  }
  CHECK(std::max(std::abs(g0), std::abs(g1)) < 1e-9);
}

TEST_CASE("independent covariate gives a null slope") {
  int inside = 0;
  for (unsigned r = 0; r < 100; ++r) {
    const auto m = fit_logistic(confounded(2000, 0.0, 0.0, 100 + r));
    if (std::abs(m.coefficients[1]) < 3 * m.standard_errors[1]) ++inside;
  }
  CHECK(inside >= 95);
}

TEST_CASE("propensity slope recovered from the confounded simulation") {
  ScenarioSpec spec;
  spec.scenario = Scenario::II;
  spec.n = 50000;
  spec.beta_z = std::log(0.9);
  const auto data = generate(resolve(spec, 1), 1);
  const auto m = fit_logistic(data.sample);
  CHECK(std::abs(m.coefficients[1] - std::log(0.5)) < 0.05);
}

TEST_CASE("weights") {
  // Symmetric covariate pattern in both arms: fitted propensity is one half.
  std::vector<SubjectRecord> r;
  for (int i = 0; i < 40; ++i) r.push_back({std::to_string(i), 1.0, true, i % 2, {double((i / 2) % 5)}});
  const SurvivalSample s(r);
  const auto m = fit_logistic(s);
  for (double w : compute_weights(m, s, false).weights) CHECK(w == doctest::Approx(2.0).epsilon(1e-12));
  for (double w : compute_weights(m, s, true).weights) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));

  const auto rnd = oracle::toy_sample(101, 3);
  const auto w0 = compute_weights(fit_logistic(rnd), rnd, true);
  for (double w : w0.weights) CHECK(w == 1.0);

  const auto c = confounded(1000, 0.3, 0.8, 7);
  const auto ws = compute_weights(fit_logistic(c), c, true);
  double mean = 0;
  for (double w : ws.weights) mean += w;
  CHECK(std::abs(mean / c.size() - 1) < 0.05);
}

TEST_CASE("stabilized and unstabilized weights give the same per-arm increments") {
  const auto c = confounded(1000, 0.3, 0.8, 8);
  const auto m = fit_logistic(c);
  const auto ws = compute_weights(m, c, true), wu = compute_weights(m, c, false);
  for (int arm : {0, 1}) {
    const auto a = nelson_aalen(c, arm, ws.weights), b = nelson_aalen(c, arm, wu.weights);
    REQUIRE(a.size() == b.size());
    double worst = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
      worst = std::max(worst, std::abs(a.increments()[k] - b.increments()[k]) / b.increments()[k]);
    // The arm factor cancels algebraically; floating point leaves a few ulps.
    CHECK(worst < 1e-14);
  }
}

TEST_CASE("weight truncation") {
  WeightVector w;
  for (int i = 1; i <= 100; ++i) w.weights.push_back(i);
  const auto t = truncate_weights(w, 0.99);
  const double q = 1 + 0.99 * 99;  // order statistic at position p (n - 1)
  CHECK(*std::max_element(t.weights.begin(), t.weights.end()) == doctest::Approx(q).epsilon(1e-15));
  for (std::size_t i = 0; i < w.weights.size(); ++i) CHECK(t.weights[i] <= w.weights[i]);
  CHECK(truncate_weights(w, 1.0).weights == w.weights);
  WeightVector flat;
  flat.weights.assign(10, 1.3);
  CHECK(truncate_weights(flat, 0.9).weights == flat.weights);
  CHECK(quantile_linear({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile_linear({1, 2}, 0.25) == 1.25);
}

TEST_CASE("balance diagnostics") {
  std::vector<SubjectRecord> r;
  for (int i = 0; i < 40; ++i) r.push_back({std::to_string(i), 1.0, true, i % 2, {double((i / 2) % 5)}});
  const auto same = balance_diagnostics(SurvivalSample(r));
  CHECK(same[0].smd_unweighted == doctest::Approx(0.0));

  // An age-like covariate strongly tied to treatment.
  const auto c = confounded(5000, 0.0, 1.2, 9);
  const auto m = fit_logistic(c);
  const auto w = compute_weights(m, c, true);
  const auto rows = balance_diagnostics(c, &w, {"age"});
  CHECK(rows[0].covariate == "age");
  CHECK(std::abs(rows[0].smd_unweighted) > 0.5);
  CHECK(std::abs(rows[0].smd_weighted) < 0.1);

  WeightVector ones;
  ones.weights.assign(c.size(), 1.0);
  const auto flat = balance_diagnostics(c, &ones);
  CHECK(flat[0].smd_weighted == doctest::Approx(flat[0].smd_unweighted).epsilon(1e-12));
}
