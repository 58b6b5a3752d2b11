// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/schedules.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cminv {

NoiseSchedule::NoiseSchedule(std::vector<double> levels, double t_min, double t_max)
    : levels_(std::move(levels)), t_min_(t_min), t_max_(t_max) {
  if (!(t_min_ > 0.0) || !(t_max_ > t_min_) || !std::isfinite(t_max_)) {
    throw std::invalid_argument("NoiseSchedule: need 0 < t_min < T");
  }
  if (levels_.size() < 2) throw std::invalid_argument("NoiseSchedule: need at least 2 levels");
  if (levels_.front() > t_max_ || levels_.back() < t_min_) {
    throw std::invalid_argument("NoiseSchedule: levels must lie in [t_min, T]");
  }
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (!(levels_[i] < levels_[i - 1])) {
      std::ostringstream os;
      os << "NoiseSchedule: levels must be strictly decreasing (index " << i << ")";
      throw std::invalid_argument(os.str());
    }
  }
}

NoiseSchedule NoiseSchedule::with_levels(std::size_t n) const {
  if (!rho_) throw std::logic_error("NoiseSchedule: explicit schedules cannot be resampled");
  return make_karras_schedule(n, t_min_, t_max_, *rho_);
}

NoiseSchedule make_karras_schedule(std::size_t n, double t_min, double t_max, double rho) {
  if (n < 2) throw std::invalid_argument("make_karras_schedule: N must be >= 2");
  if (!(t_min > 0.0) || !(t_max > t_min)) {
    throw std::invalid_argument("make_karras_schedule: need 0 < t_min < T");
  }
  if (!(rho > 0.0)) throw std::invalid_argument("make_karras_schedule: rho must be positive");

  const double hi = std::pow(t_max, 1.0 / rho);
  const double lo = std::pow(t_min, 1.0 / rho);
  std::vector<double> levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    levels[i] = std::pow(hi + frac * (lo - hi), rho);
  }
  levels.front() = t_max;
  levels.back() = t_min;
  NoiseSchedule schedule(std::move(levels), t_min, t_max);
  schedule.rho_ = rho;
  return schedule;
}

std::vector<StepPair> step_pairs(const NoiseSchedule& schedule) {
  const auto& lv = schedule.levels();
  std::vector<StepPair> pairs;
  pairs.reserve(lv.size() - 1);
  for (std::size_t i = 0; i + 1 < lv.size(); ++i) pairs.push_back({lv[i], lv[i + 1]});
  return pairs;
}

}  // namespace cminv
