#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hrc/sensitivity.hpp"

namespace hrc {

struct BootstrapConfig {
  std::size_t replications = 500;
  std::uint64_t seed = 1;
  double confidence_level = 0.95;
  /// Re-run bandwidth selection inside every replicate (kernel backend).
  bool reselect_bandwidths = true;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 1;

  void validate() const;
};

struct BootstrapResult {
  /// Point estimates from the full sample with se / ci columns filled.
  std::vector<SensitivityCurve> curves;
  /// Median of the usable replicate estimates per curve and grid point.
  std::vector<std::vector<double>> replicate_median;
  /// replicate_estimates[curve][replicate][point]; NaN when unusable.
  std::vector<std::vector<std::vector<double>>> replicate_estimates;
  std::size_t failed_replicates = 0;
};

/// Row indices of one nonparametric bootstrap resample (replicate `index`).
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::size_t index);

BootstrapResult bootstrap_curves(const SurvivalSample& sample, const SensitivityRequest& req,
                                 const BootstrapConfig& cfg);

}  // namespace hrc
