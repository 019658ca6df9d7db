#include "hrc/bootstrap.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "hrc/parallel.hpp"
#include "hrc/rng.hpp"
#include "hrc/weights.hpp"

namespace hrc {

namespace {
constexpr std::uint64_t kBootstrapLabel = 0xB0075;
constexpr double kMaxFailureShare = 0.10;
}  // namespace

void BootstrapConfig::validate() const {
  if (replications < 2) throw Error("bootstrap needs at least 2 replications");
  if (!(confidence_level > 0.0 && confidence_level < 1.0))
    throw Error("confidence level must lie in (0, 1)");
}

std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::size_t index) {
  Philox rng(derive_seed(seed, kBootstrapLabel), index);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) {
    i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    if (i >= n) i = n - 1;
  }
  return idx;
}

BootstrapResult bootstrap_curves(const SurvivalSample& sample, const SensitivityRequest& req_in,
                                 const BootstrapConfig& cfg) {
  cfg.validate();
  const auto full = fit_sensitivity(sample, req_in);

  // Replicates share the full-sample grid (and, optionally, bandwidths).
  SensitivityRequest req = req_in;
  req.grid.grid = full.grid;
  if (req.method == Method::Kernel && !cfg.reselect_bandwidths) {
    req.fixed_bandwidths = std::array<std::vector<double>, 2>{
        full.smoothed[0]->plan.local_bandwidth, full.smoothed[1]->plan.local_bandwidth};
  }

  BootstrapResult out;
  out.curves = curves_from_fit(full, req);
  const std::size_t n_curves = out.curves.size();
  const std::size_t n_points = full.grid.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::optional<std::vector<SensitivityCurve>>> replicates(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    try {
      const auto idx = resample_indices(sample.size(), cfg.seed, r);
      const auto boot = sample.subset(idx);
      replicates[r] = run_sensitivity(boot, req);
    } catch (const Error&) {
      replicates[r].reset();
    }
  });

  out.replicate_estimates.assign(
      n_curves, std::vector<std::vector<double>>(cfg.replications, std::vector<double>(n_points, nan)));
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    if (!replicates[r]) {
      ++out.failed_replicates;
      continue;
    }
    for (std::size_t c = 0; c < n_curves; ++c) {
      const auto& rc = (*replicates[r])[c];
      for (std::size_t k = 0; k < n_points; ++k)
        if (rc.flags[k] == PointFlag::Ok) out.replicate_estimates[c][r][k] = rc.estimates[k];
    }
  }
  if (out.failed_replicates == cfg.replications) throw Error("all bootstrap replicates failed");

  const double alpha = 1.0 - cfg.confidence_level;
  out.replicate_median.assign(n_curves, std::vector<double>(n_points, nan));
  for (std::size_t c = 0; c < n_curves; ++c) {
    auto& curve = out.curves[c];
    curve.se.assign(n_points, nan);
    curve.ci_lo.assign(n_points, nan);
    curve.ci_hi.assign(n_points, nan);
    curve.ci_flagged.assign(n_points, false);
    for (std::size_t k = 0; k < n_points; ++k) {
      std::vector<double> values;
      values.reserve(cfg.replications);
      for (std::size_t r = 0; r < cfg.replications; ++r) {
        const double v = out.replicate_estimates[c][r][k];
        if (!std::isnan(v)) values.push_back(v);
      }
      const double unusable = static_cast<double>(cfg.replications - values.size()) /
                              static_cast<double>(cfg.replications);
      curve.ci_flagged[k] = unusable > kMaxFailureShare;
      if (values.size() < 2) {
        curve.ci_flagged[k] = true;
        continue;
      }
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      curve.se[k] = std::sqrt(ss / static_cast<double>(values.size() - 1));
      curve.ci_lo[k] = quantile_linear(values, alpha / 2.0);
      curve.ci_hi[k] = quantile_linear(values, 1.0 - alpha / 2.0);
      out.replicate_median[c][k] = quantile_linear(values, 0.5);
    }
  }
  return out;
}

}  // namespace hrc
