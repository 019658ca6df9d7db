#include "hrc/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

namespace hrc {

namespace {

struct ArmRow {
  double time;
  bool event;
  double weight;
};

// Rows of one arm (or both when arm < 0), sorted by time, events before
// censorings at equal times. Ties keep input order so sums are reproducible.
std::vector<ArmRow> sorted_rows(const SurvivalSample& sample, int arm,
                                WeightSpan weights) {
  std::vector<ArmRow> rows;
  rows.reserve(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& r = sample[i];
    if (arm >= 0 && r.treatment != arm) continue;
    rows.push_back({r.time, r.event, weights.empty() ? 1.0 : weights[i]});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ArmRow& a, const ArmRow& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.event && !b.event;
  });
  return rows;
}

// One entry per distinct event time: weighted event mass and weighted risk set.
struct EventTable {
  std::vector<double> times;
  std::vector<double> events;
  std::vector<double> at_risk;
};

EventTable event_table(const std::vector<ArmRow>& rows) {
  EventTable out;
  // Suffix sums give the weighted risk set at each row.
  std::vector<double> suffix(rows.size() + 1, 0.0);
  for (std::size_t i = rows.size(); i-- > 0;) suffix[i] = suffix[i + 1] + rows[i].weight;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double d = 0.0;
    while (j < rows.size() && rows[j].time == rows[i].time) {
      if (rows[j].event) d += rows[j].weight;
      ++j;
    }
    if (d > 0.0) {
      out.times.push_back(rows[i].time);
      out.events.push_back(d);
      out.at_risk.push_back(suffix[i]);
    }
    i = j;
  }
  return out;
}

void require_arm(const SurvivalSample& sample, int arm) {
  if (arm != 0 && arm != 1) throw Error("treatment arm must be 0 or 1");
  if (sample.arm_size(arm) == 0) throw Error("empty treatment arm");
}

}  // namespace

SurvivalSample::SurvivalSample(std::vector<SubjectRecord> records)
    : records_(std::move(records)) {
  if (records_.empty()) throw Error("survival sample is empty");
  covariate_count_ = records_.front().covariates.size();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!std::isfinite(r.time) || r.time < 0.0) {
      std::ostringstream os;
      os << "record " << i << ": time must be finite and nonnegative";
      throw Error(os.str());
    }
    if (r.treatment != 0 && r.treatment != 1) {
      std::ostringstream os;
      os << "record " << i << ": treatment must be 0 or 1";
      throw Error(os.str());
    }
    if (r.covariates.size() != covariate_count_) {
      std::ostringstream os;
      os << "record " << i << ": expected " << covariate_count_ << " covariates, got "
         << r.covariates.size();
      throw Error(os.str());
    }
  }
}

std::size_t SurvivalSample::arm_size(int arm) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [arm](const auto& r) { return r.treatment == arm; }));
}

std::size_t SurvivalSample::event_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.event; }));
}

std::size_t SurvivalSample::arm_event_count(int arm) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(),
      [arm](const auto& r) { return r.event && r.treatment == arm; }));
}

SurvivalSample SurvivalSample::subset(std::span<const std::size_t> index) const {
  std::vector<SubjectRecord> out;
  out.reserve(index.size());
  for (auto i : index) out.push_back(records_.at(i));
  return SurvivalSample(std::move(out));
}

StepFunction::StepFunction(std::vector<double> jump_times, std::vector<double> increments,
                           double base)
    : times_(std::move(jump_times)), increments_(std::move(increments)), base_(base) {
  if (times_.size() != increments_.size())
    throw Error("step function: jump times and increments differ in length");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!(times_[i] > 0.0) && !(i == 0 && times_[i] == 0.0))
      throw Error("step function: jump times must be positive");
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw Error("step function: jump times must be strictly increasing");
  }
  partial_.resize(times_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    acc += increments_[i];
    partial_[i] = acc;
  }
}

double StepFunction::value(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return base_;
  return base_ + partial_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::value_before(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return base_;
  return base_ + partial_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

TimeGrid TimeGrid::equally_spaced(double lo, double hi, std::size_t count) {
  if (count < 2) throw Error("time grid needs at least 2 points");
  if (!(hi > lo)) throw Error("degenerate grid");
  if (lo < 0.0) throw Error("time grid must be nonnegative");
  TimeGrid g;
  g.points_.resize(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g.points_[i] = lo + step * static_cast<double>(i);
  g.points_.back() = hi;
  return g;
}

void check_weights(const SurvivalSample& sample, WeightSpan weights) {
  if (weights.empty()) return;
  if (weights.size() != sample.size())
    throw Error("weights length does not match the number of records");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("weights must be positive and finite");
}

StepFunction nelson_aalen(const SurvivalSample& sample, int arm, WeightSpan weights) {
  require_arm(sample, arm);
  check_weights(sample, weights);
  auto table = event_table(sorted_rows(sample, arm, weights));
  std::vector<double> inc(table.times.size());
  for (std::size_t k = 0; k < inc.size(); ++k) inc[k] = table.events[k] / table.at_risk[k];
  return StepFunction(std::move(table.times), std::move(inc));
}

namespace {

StepFunction product_limit(const std::vector<ArmRow>& rows) {
  auto table = event_table(rows);
  std::vector<double> inc(table.times.size());
  double s = 1.0;
  for (std::size_t k = 0; k < inc.size(); ++k) {
    const double next = s * (1.0 - table.events[k] / table.at_risk[k]);
    inc[k] = next - s;
    s = next;
  }
  return StepFunction(std::move(table.times), std::move(inc), 1.0);
}

}  // namespace

StepFunction kaplan_meier(const SurvivalSample& sample, int arm, WeightSpan weights) {
  require_arm(sample, arm);
  check_weights(sample, weights);
  return product_limit(sorted_rows(sample, arm, weights));
}

StepFunction kaplan_meier_pooled(const SurvivalSample& sample, WeightSpan weights) {
  check_weights(sample, weights);
  return product_limit(sorted_rows(sample, -1, weights));
}

LogRankResult logrank_test(const SurvivalSample& sample, WeightSpan weights) {
  require_arm(sample, 0);
  require_arm(sample, 1);
  check_weights(sample, weights);
  if (sample.event_count() == 0) throw Error("no events observed");

  // Weights are rescaled to mean one so the hypergeometric variance term is
  // scale free and reduces to the classical test for constant weights.
  std::vector<double> w(sample.size(), 1.0);
  if (!weights.empty()) {
    const double mean = std::accumulate(weights.begin(), weights.end(), 0.0) /
                        static_cast<double>(weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = weights[i] / mean;
  }

  struct Row {
    double time;
    bool event;
    int arm;
    double weight;
  };
  std::vector<Row> rows;
  rows.reserve(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i)
    rows.push_back({sample[i].time, sample[i].event, sample[i].treatment, w[i]});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.time < b.time; });

  double risk[2] = {0.0, 0.0};
  for (const auto& r : rows) risk[r.arm] += r.weight;

  double observed_minus_expected = 0.0;
  double variance = 0.0;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double d[2] = {0.0, 0.0};
    double leaving[2] = {0.0, 0.0};
    while (j < rows.size() && rows[j].time == rows[i].time) {
      if (rows[j].event) d[rows[j].arm] += rows[j].weight;
      leaving[rows[j].arm] += rows[j].weight;
      ++j;
    }
    const double dt = d[0] + d[1];
    const double y = risk[0] + risk[1];
    if (dt > 0.0 && y > 0.0) {
      observed_minus_expected += d[1] - dt * risk[1] / y;
      if (y > 1.0) variance += dt * (risk[1] / y) * (risk[0] / y) * (y - dt) / (y - 1.0);
    }
    risk[0] -= leaving[0];
    risk[1] -= leaving[1];
    i = j;
  }

  LogRankResult out;
  if (variance <= 0.0) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.statistic = observed_minus_expected * observed_minus_expected / variance;
  boost::math::chi_squared chi2(1.0);
  out.p_value = std::clamp(boost::math::cdf(boost::math::complement(chi2, out.statistic)), 0.0, 1.0);
  return out;
}

std::size_t at_risk(const SurvivalSample& sample, int arm, double t) {
  return static_cast<std::size_t>(std::count_if(
      sample.records().begin(), sample.records().end(),
      [arm, t](const auto& r) { return r.treatment == arm && r.time >= t; }));
}

TimeGrid build_time_grid(const SurvivalSample& sample, std::size_t n_points,
                         std::size_t min_at_risk) {
  if (sample.event_count() == 0) throw Error("time grid requires at least one event");
  if (min_at_risk == 0) throw Error("min_at_risk must be at least 1");
  double first_event = std::numeric_limits<double>::infinity();
  for (const auto& r : sample.records())
    if (r.event) first_event = std::min(first_event, r.time);

  double last = std::numeric_limits<double>::infinity();
  for (int arm : {0, 1}) {
    std::vector<double> times;
    for (const auto& r : sample.records())
      if (r.treatment == arm) times.push_back(r.time);
    if (times.size() <= min_at_risk) {
      std::ostringstream os;
      os << "arm " << arm << " has " << times.size() << " subjects; need more than "
         << min_at_risk;
      throw Error(os.str());
    }
    // At-risk count at t is #{X >= t}; it stays >= k up to the k-th largest time.
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(min_at_risk - 1),
                     times.end(), std::greater<>());
    last = std::min(last, times[min_at_risk - 1]);
  }
  if (!(last > first_event)) throw Error("degenerate grid");
  return TimeGrid::equally_spaced(first_event, last, n_points);
}

}  // namespace hrc
