#include <doctest.h>

#include <cmath>

#include "hrc/rng.hpp"
#include "hrc/simgen.hpp"
#include "oracles.hpp"

using namespace hrc;

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(Philox::generate({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});

  Philox a(5, 1), b(5, 1), c(5, 2);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    CHECK(x == b());
    (void)c;
  }
  Philox u(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
}

TEST_CASE("true causal hazard ratio") {
  ScenarioSpec ia;
  CHECK(true_hrc(ia, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(true_hrc(ia, 1) == doctest::Approx(std::exp(std::log(0.5) - 7.0 / 3.0)).epsilon(1e-13));
  CHECK(true_hrc(ia, 1) == doctest::Approx(0.0485).epsilon(0.01));
  ScenarioSpec ib;
  ib.scenario = Scenario::Ib;
  for (double t : {0.0, 1.0, 5.0}) CHECK(true_hrc(ib, t) == 0.5);
}

TEST_CASE("scenario Ia marginal cumulative hazard is linear") {
  ScenarioSpec spec;
  spec.n = 100000;
  const auto d = generate(resolve(spec, 2), 2);
  for (int arm : {0, 1}) {
    const auto& t = arm ? d.t1 : d.t0;
    std::vector<SubjectRecord> r;
    for (std::size_t i = 0; i < t.size(); ++i) r.push_back({std::to_string(i), t[i], true, 0, {}});
    const auto na = nelson_aalen(SurvivalSample(std::move(r)), 0);
    const double expect = 0.5 * std::exp(spec.beta * arm);
    CHECK(std::abs(na.value(0.5) / expect - 1) < 0.02);
  }
  // Hidden potential times have the requested Kendall's tau.
  CHECK(std::abs(oracle::kendall_tau(d.t0, d.t1) - 0.7) < 0.02);
}

TEST_CASE("near-zero frailty variance gives exponential marginals") {
  ScenarioSpec spec;
  spec.n = 100000;
  spec.tau = 1e-6;
  const auto d = generate(resolve(spec, 3), 3);
  double vmax = 0;
  for (double v : d.frailty) vmax = std::max(vmax, std::abs(v - 1));
  CHECK(vmax < 0.05);
  for (int arm : {0, 1}) {
    const auto km = kaplan_meier(d.sample, arm);
    for (double t : {0.2, 0.5, 1.0, 2.0})
      CHECK(std::abs(km.value(t) - std::exp(-t * std::exp(spec.beta * arm))) < 0.01);
  }
}

TEST_CASE("potential times are exchangeable when the treatment has no effect") {
  ScenarioSpec spec;
  spec.n = 100000;
  spec.beta = 0;
  const auto d = generate(resolve(spec, 4), 4);
  CHECK(oracle::ks_distance(d.t0, d.t1) < 0.02);
}

TEST_CASE("observed columns are consistent with the hidden ones") {
  for (auto sc : {Scenario::Ia, Scenario::Ib, Scenario::II}) {
    ScenarioSpec spec;
    spec.scenario = sc;
    spec.n = 3000;
    const auto d = generate(resolve(spec, 5), 5);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const auto& r = d.sample[i];
      const double t = r.treatment ? d.t1[i] : d.t0[i];
      CHECK(r.time == std::min(t, d.censoring[i]));
      CHECK(r.event == (t <= d.censoring[i]));
    }
  }
}

TEST_CASE("scenario II treatment follows the logistic law") {
  ScenarioSpec spec;
  spec.scenario = Scenario::II;
  spec.n = 100000;
  const auto d = generate(resolve(spec, 6), 6);
  for (double centre : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    double treated = 0, total = 0;
    for (const auto& r : d.sample.records())
      if (std::abs(r.covariates[0] - centre) < 0.1) total += 1, treated += r.treatment;
    CHECK(std::abs(treated / total - 1 / (1 + std::exp(-std::log(0.5) * centre))) < 0.02);
  }
}

TEST_CASE("censoring calibration") {
  ScenarioSpec spec;
  spec.censoring_fraction = 0.0;
  const auto zero = calibrate_censoring_rate(spec, 1);
  CHECK(zero.flagged);
  CHECK(zero.value <= 1e-8);

  double prev = 0;
  for (double target : {0.1, 0.2, 0.4}) {
    spec.censoring_fraction = target;
    const auto r = calibrate_censoring_rate(spec, 1);
    CHECK(r.value > prev);
    prev = r.value;
    spec.censoring_rate = r.value;
    spec.n = 100000;
    const auto d = generate(spec, 77);
    const double censored = 1.0 - double(d.sample.event_count()) / spec.n;
    CHECK(std::abs(censored - target) < 0.01);
    spec.censoring_rate.reset();
  }
}

TEST_CASE("event-rate calibration") {
  ScenarioSpec spec;
  spec.scenario = Scenario::II;
  spec.beta_z = std::log(0.9);
  double prev = 1e300;
  for (double target : {0.30, 0.10, 0.05, 0.03, 0.01}) {
    spec.event_rate_target = target;
    const auto r = calibrate_event_scale(spec, 1);
    CHECK(r.value < prev);
    prev = r.value;
    spec.event_scale = r.value;
    spec.n = 100000;
    const auto d = generate(spec, 88);
    CHECK(std::abs(double(d.sample.event_count()) / spec.n - target) < 0.005);
    spec.event_scale.reset();
  }
  spec.event_rate_target = 1.0;
  CHECK_THROWS(calibrate_event_scale(spec, 1));
}

TEST_CASE("generation is deterministic in the seed") {
  ScenarioSpec spec;
  spec.n = 500;
  const auto a = generate(spec, 9), b = generate(spec, 9), c = generate(spec, 10);
  CHECK(a.t0 == b.t0);
  CHECK(a.sample.records().size() == b.sample.records().size());
  CHECK(a.t0 != c.t0);
  CHECK_THROWS(parse_scenario("III"));
}
