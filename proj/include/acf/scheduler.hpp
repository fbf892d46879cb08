#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "acf/random.hpp"

namespace acf {

// Constants of the adaptive coordinate frequency rule.
struct AcfConfig {
  double c = 1.0 / 5.0;
  double p_min = 1.0 / 20.0;
  double p_max = 20.0;
  // Fading rate of the average gain; 1/n when unset.
  std::optional<double> eta;

  // Throws ConfigError unless 0 < p_min <= 1 <= p_max, c > 0, 0 < eta <= 1.
  void validate() const;
};

// Gains below this are treated as "no progress" when seeding and comparing
// against the average gain.
inline constexpr double kGainFloor = 1e-300;

// Adaptive preference state over n coordinates together with the block
// scheduler that turns preferences into coordinate sequences.
//
// Preferences p_i are unnormalized; the selection distribution is
// pi_i = p_i / p_sum. Each generated schedule holds on average n indices and
// at most 2n, and coordinate i appears at least once every
// ceil(1 / (n * pi_i)) schedules.
class AcfScheduler {
 public:
  AcfScheduler(std::size_t n, const AcfConfig& config, std::uint64_t seed);
  // Starts from the given preferences instead of the uniform p_i = 1. Each
  // value is clipped into [p_min, p_max].
  AcfScheduler(std::vector<double> initial_preferences, const AcfConfig& config,
               std::uint64_t seed);

  std::size_t size() const noexcept { return prefs_.size(); }

  // Feeds the gain of a step on coordinate i. While the warm-up is active the
  // gain only contributes to the initial average; afterwards the preference
  // of i is multiplied by exp(c * (gain / rbar - 1)), clipped, and then the
  // average gain is faded towards `gain`.
  // Throws std::invalid_argument for negative or non-finite gains.
  void acf_update(std::size_t i, double gain);

  // Records one warm-up gain. After n records the average gain is set to
  // their mean (floored at kGainFloor) and adaptation starts.
  void warmup_record(double gain);

  bool warming_up() const noexcept { return warmup_remaining_ > 0; }

  // Ends the warm-up with the given average gain.
  void set_average_gain(double rbar);

  // Appends floor(a_i) copies of each i after a_i += n * p_i / p_sum, keeps
  // the fractional parts, and shuffles the result.
  std::vector<std::size_t> generate_schedule();

  // Pops from the pending schedule, regenerating it when exhausted.
  std::size_t next_coordinate();

  std::span<const double> preferences() const noexcept { return prefs_; }
  double preference_sum() const noexcept { return p_sum_; }
  double probability(std::size_t i) const { return prefs_.at(i) / p_sum_; }
  double average_gain() const noexcept { return rbar_; }
  double eta() const noexcept { return eta_; }
  std::span<const double> accumulators() const noexcept { return accum_; }
  const AcfConfig& config() const noexcept { return config_; }

  // ceil(1 / (n * min_i pi_i)) for the current preferences.
  std::size_t waiting_time_bound() const;

  // CSV snapshot with header "i,p,pi".
  void write_csv(std::ostream& out) const;

 private:
  void resync_sum();

  AcfConfig config_;
  double eta_;
  std::vector<double> prefs_;
  double p_sum_ = 0.0;
  double rbar_ = 0.0;
  std::vector<double> accum_;
  std::vector<std::size_t> pending_;
  std::size_t pending_pos_ = 0;
  std::size_t warmup_remaining_;
  double warmup_total_ = 0.0;
  std::size_t updates_since_resync_ = 0;
  Rng rng_;
};

// Baseline selection: sweeps over a fresh random permutation each epoch.
class UniformScheduler {
 public:
  UniformScheduler(std::size_t n, std::uint64_t seed);

  std::size_t size() const noexcept { return order_.size(); }

  // A fresh random permutation of 0..n-1.
  std::vector<std::size_t> next_epoch();
  std::size_t uniform_next();

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_;
  Rng rng_;
};

}  // namespace acf
