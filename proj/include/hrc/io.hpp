#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hrc/simgen.hpp"
#include "hrc/survival.hpp"
#include "hrc/weights.hpp"

namespace hrc {

struct LoadedSample {
  SurvivalSample sample;
  std::vector<std::string> covariate_names;
};

/// Reads `id,time,event,treatment,z1,...,zk`. Schema violations throw with
/// the 1-based line number.
LoadedSample read_sample_csv(std::istream& in);
LoadedSample read_sample_csv_file(const std::string& path);

void write_sample_csv(std::ostream& out, const SurvivalSample& sample,
                      const std::vector<std::string>& covariate_names = {});

/// Hidden columns of a simulated dataset: `id,v,t0,t1,c`.
void write_hidden_csv(std::ostream& out, const SimulatedDataset& data);

/// covariate,smd_unweighted,smd_weighted
void write_balance_csv(std::ostream& out, const std::vector<BalanceRow>& rows);

/// Shortest round-trippable decimal form used in every CSV the library writes.
std::string format_double(double x);

}  // namespace hrc
