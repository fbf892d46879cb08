#include "acf/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "acf/error.hpp"

namespace acf {

void AcfConfig::validate() const {
  if (!(c > 0.0)) throw ConfigError("ACF learning rate c must be positive");
  if (!(p_min > 0.0 && p_min <= 1.0 && 1.0 <= p_max))
    throw ConfigError("ACF bounds must satisfy 0 < p_min <= 1 <= p_max");
  if (eta && !(*eta > 0.0 && *eta <= 1.0)) throw ConfigError("ACF fading rate must be in (0, 1]");
}

AcfScheduler::AcfScheduler(std::size_t n, const AcfConfig& config, std::uint64_t seed)
    : AcfScheduler(std::vector<double>(n, 1.0), config, seed) {}

AcfScheduler::AcfScheduler(std::vector<double> initial_preferences, const AcfConfig& config,
                           std::uint64_t seed)
    : config_(config),
      eta_(0.0),
      prefs_(std::move(initial_preferences)),
      accum_(prefs_.size(), 0.0),
      warmup_remaining_(prefs_.size()),
      rng_(seed) {
  if (prefs_.empty()) throw ConfigError("scheduler needs at least one coordinate");
  config_.validate();
  eta_ = config_.eta.value_or(1.0 / static_cast<double>(prefs_.size()));
  for (double& p : prefs_) {
    if (!std::isfinite(p)) throw ConfigError("initial preferences must be finite");
    p = std::clamp(p, config_.p_min, config_.p_max);
  }
  resync_sum();
}

void AcfScheduler::resync_sum() {
  p_sum_ = std::accumulate(prefs_.begin(), prefs_.end(), 0.0);
  updates_since_resync_ = 0;
}

void AcfScheduler::warmup_record(double gain) {
  if (!warming_up()) return;
  warmup_total_ += gain;
  if (--warmup_remaining_ == 0)
    rbar_ = std::max(warmup_total_ / static_cast<double>(prefs_.size()), kGainFloor);
}

void AcfScheduler::set_average_gain(double rbar) {
  if (!(rbar > 0.0) || !std::isfinite(rbar))
    throw std::invalid_argument("average gain must be positive and finite");
  rbar_ = rbar;
  warmup_remaining_ = 0;
}

void AcfScheduler::acf_update(std::size_t i, double gain) {
  if (!std::isfinite(gain) || gain < 0.0)
    throw std::invalid_argument("gain must be finite and non-negative, got " +
                                std::to_string(gain));
  if (i >= prefs_.size()) throw std::out_of_range("coordinate index out of range");
  if (warming_up()) {
    warmup_record(gain);
    return;
  }
  if (!(rbar_ > 0.0)) throw NumericalError("average gain not initialized");

  const double ratio = (gain < kGainFloor && rbar_ <= kGainFloor) ? 1.0 : gain / rbar_;
  const double p_new =
      std::clamp(std::exp(config_.c * (ratio - 1.0)) * prefs_[i], config_.p_min, config_.p_max);
  p_sum_ += p_new - prefs_[i];
  prefs_[i] = p_new;
  rbar_ = std::max((1.0 - eta_) * rbar_ + eta_ * gain, kGainFloor);

  if (++updates_since_resync_ >= prefs_.size()) resync_sum();
}

std::vector<std::size_t> AcfScheduler::generate_schedule() {
  const double n = static_cast<double>(prefs_.size());
  std::vector<std::size_t> schedule;
  schedule.reserve(2 * prefs_.size());
  for (std::size_t i = 0; i < prefs_.size(); ++i) {
    accum_[i] += n * prefs_[i] / p_sum_;
    const double whole = std::floor(accum_[i]);
    for (std::size_t k = 0; k < static_cast<std::size_t>(whole); ++k) schedule.push_back(i);
    accum_[i] -= whole;
  }
  fisher_yates(std::span<std::size_t>(schedule), rng_);
  return schedule;
}

std::size_t AcfScheduler::next_coordinate() {
  while (pending_pos_ >= pending_.size()) {
    pending_ = generate_schedule();
    pending_pos_ = 0;
  }
  return pending_[pending_pos_++];
}

std::size_t AcfScheduler::waiting_time_bound() const {
  const double p_lo = *std::min_element(prefs_.begin(), prefs_.end());
  const double pi_min = p_lo / p_sum_;
  return static_cast<std::size_t>(std::ceil(1.0 / (static_cast<double>(prefs_.size()) * pi_min)));
}

void AcfScheduler::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "i,p,pi\n";
  for (std::size_t i = 0; i < prefs_.size(); ++i)
    out << i << ',' << prefs_[i] << ',' << prefs_[i] / p_sum_ << '\n';
  out.precision(old_precision);
}

UniformScheduler::UniformScheduler(std::size_t n, std::uint64_t seed)
    : order_(n), pos_(n), rng_(seed) {
  if (n == 0) throw ConfigError("scheduler needs at least one coordinate");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

std::vector<std::size_t> UniformScheduler::next_epoch() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  fisher_yates(std::span<std::size_t>(order_), rng_);
  pos_ = order_.size();
  return order_;
}

std::size_t UniformScheduler::uniform_next() {
  if (pos_ >= order_.size()) {
    next_epoch();
    pos_ = 0;
  }
  return order_[pos_++];
}

}  // namespace acf
